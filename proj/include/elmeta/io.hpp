#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "elmeta/analysis.hpp"
#include "elmeta/simulation.hpp"
#include "elmeta/types.hpp"

namespace elmeta::io {

enum class DataFormat { Csv, Json };

/// By file extension; anything other than .json is CSV.
DataFormat format_from_path(const std::filesystem::path& path);

struct ReadOptions {
    Scale scale = Scale::Linear;
    /// Values are ratios; natural log is applied before validation. Requires Scale::Log.
    bool input_ratio = false;
};

/// CSV: comma-delimited with header; columns lower, upper required; label, level, n optional.
MetaDataset parse_csv_dataset(std::string_view text, const ReadOptions& options);
/// JSON: an array of records, or {"scale": ..., "studies": [records]}.
MetaDataset parse_json_dataset(std::string_view text, const ReadOptions& options);
MetaDataset read_dataset(const std::filesystem::path& path, DataFormat format,
                         const ReadOptions& options);

std::string dataset_to_csv(const MetaDataset& data);
std::string dataset_to_json(const MetaDataset& data);
void write_dataset(const MetaDataset& data, const std::filesystem::path& path, DataFormat format);

/// 17 significant digits; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);

enum class ReportScale { Native, Ratio };
ReportScale parse_report_scale(std::string_view text);

struct AnalysisReport {
    Scale data_scale = Scale::Linear;
    ReportScale report_scale = ReportScale::Native;
    double beta = 0.05;
    std::size_t studies = 0;
    std::vector<MethodOutcome> outcomes;

    /// True when every requested method failed for a numeric reason.
    bool all_failed() const;
};

/// Runs the methods and applies the ratio transform when requested (log data only).
AnalysisReport make_report(const MetaDataset& data, std::span<const Method> methods, double beta,
                           ReportScale report_scale, const AnalysisOptions& options = {});

std::string report_to_json(const AnalysisReport& report);
std::string report_to_table(const AnalysisReport& report);

/// Parsed `simulate` configuration: one cell per (scenario, K, tau2).
struct SimulateGrid {
    std::vector<Scenario> scenarios;
    double theta = 0.0;
    double sigma2 = 1.0;
    std::vector<double> tau2_list;
    std::vector<std::int64_t> k_list;
    SampleSizeRule n_rule;
    std::int64_t replicates = 1000;
    std::uint64_t seed = 1;
    double beta = 0.05;
    std::vector<Method> methods;
    std::optional<std::string> out_dir;

    SimulationConfig cell(Scenario scenario, std::int64_t k, double tau2) const;
};

/// key = value lines; '#' starts a comment; lists are comma-separated.
SimulateGrid parse_simulate_config(std::string_view text);
SimulateGrid read_simulate_config(const std::filesystem::path& path);

std::string coverage_to_csv(const ExperimentResult& result);
std::string cell_file_name(Scenario scenario, std::int64_t k, double tau2);

/// Runs every cell, writing one CSV each plus manifest.json into out_dir. Returns the manifest.
std::string run_simulate(const SimulateGrid& grid, const std::filesystem::path& out_dir);

std::string qq_to_csv(std::span<const QqResult> results);
std::string divergence_to_csv(std::span<const DivergenceRow> rows);

/// ELMETA_OUTPUT_DIR when set, else the current directory.
std::filesystem::path default_output_dir();

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace elmeta::io
