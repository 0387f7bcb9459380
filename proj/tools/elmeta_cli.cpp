// Command-line front end. Talks to the library only through the C interface.
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "elmeta/elmeta.h"

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

int report_error(const std::string& code, const std::string& message, int exit_code) {
    const nlohmann::json doc = {
        {"error", {{"code", code}, {"message", message}, {"exit_code", exit_code}}}};
    std::cerr << doc.dump(2) << '\n';
    return exit_code;
}

int report_status(elmeta_status status) {
    const int exit_code = elmeta_status_is_input_error(status) ? kExitInput : kExitNumeric;
    return report_error(elmeta_status_name(status), elmeta_last_error(), exit_code);
}

// Owns a malloc'd string from the library.
struct LibString {
    char* ptr = nullptr;
    ~LibString() { elmeta_string_free(ptr); }
    std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

fs::path output_dir() {
    const char* env = std::getenv("ELMETA_OUTPUT_DIR");
    return env && *env ? fs::path(env) : fs::path(".");
}

bool write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    return static_cast<bool>(out);
}

struct AnalyzeArgs {
    std::string input;
    std::string scale = "linear";
    bool input_ratio = false;
    std::string methods = "all";
    double beta = 0.05;
    std::string report_scale = "native";
    std::string format = "table";
    std::string json_out;
    std::string cd_tau2 = "dl";
};

int run_analyze(const AnalyzeArgs& a) {
    const elmeta_scale scale = a.scale == "log" ? ELMETA_SCALE_LOG : ELMETA_SCALE_LINEAR;
    if (a.input_ratio && scale != ELMETA_SCALE_LOG) {
        return report_error("BadArgument", "--input-ratio requires --scale log", kExitInput);
    }
    if (a.report_scale == "ratio" && scale != ELMETA_SCALE_LOG) {
        return report_error("BadArgument", "--report-scale ratio requires --scale log", kExitInput);
    }
    elmeta_dataset* data = nullptr;
    if (auto s = elmeta_dataset_read(a.input.c_str(), ELMETA_FORMAT_AUTO, scale, a.input_ratio, &data);
        s != ELMETA_OK) {
        return report_status(s);
    }
    elmeta_report* report = nullptr;
    const auto s = elmeta_analyze(data, a.methods.c_str(), a.beta, a.report_scale == "ratio",
                                  a.cd_tau2 == "reml", &report);
    elmeta_dataset_free(data);
    if (s != ELMETA_OK) return report_status(s);

    LibString json;
    LibString table;
    elmeta_report_json(report, &json.ptr);
    elmeta_report_table(report, &table.ptr);
    std::cout << (a.format == "json" ? json.str() : table.str());
    if (!a.json_out.empty() && !write_file(a.json_out, json.str())) {
        elmeta_report_free(report);
        return report_error("IoError", "cannot write '" + a.json_out + "'", kExitInput);
    }
    const bool all_failed = elmeta_report_all_failed(report) != 0;
    elmeta_report_free(report);
    if (all_failed) {
        return report_error("NumericFailure", "every requested method failed", kExitNumeric);
    }
    return kExitOk;
}

int run_simulate(const std::string& config, const std::string& out_dir) {
    LibString manifest;
    const auto s = elmeta_simulate(config.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(),
                                   &manifest.ptr);
    if (s != ELMETA_OK) return report_status(s);
    std::cout << manifest.str();
    return kExitOk;
}

struct QqArgs {
    std::int64_t n = 0;
    std::int64_t k = 0;
    std::int64_t replicates = 1000;
    std::uint64_t seed = 1;
    std::string variants = "EL1,EL2,EL3";
    std::string out;
};

int run_qq(const QqArgs& a) {
    LibString csv;
    const auto s = elmeta_qq(a.n, a.k, a.replicates, a.seed, a.variants.c_str(), &csv.ptr);
    if (s != ELMETA_OK) return report_status(s);
    const fs::path path = a.out.empty() ? output_dir() / ("qq_n" + std::to_string(a.n) + "_K" +
                                                          std::to_string(a.k) + "_seed" +
                                                          std::to_string(a.seed) + ".csv")
                                        : fs::path(a.out);
    if (!write_file(path, csv.str())) {
        return report_error("IoError", "cannot write '" + path.string() + "'", kExitInput);
    }
    std::cout << path.string() << '\n';
    return kExitOk;
}

struct DivergeArgs {
    std::vector<std::int64_t> ks;
    std::vector<std::int64_t> ns;
    std::int64_t replicates = 1000;
    std::uint64_t seed = 1;
    bool gaussian = false;
    std::string out;
};

int run_diverge(const DivergeArgs& a) {
    LibString csv;
    const auto s = elmeta_diverge(a.ks.data(), a.ks.size(), a.ns.data(), a.ns.size(), a.replicates,
                                  a.seed, a.gaussian, &csv.ptr);
    if (s != ELMETA_OK) return report_status(s);
    const fs::path path =
        a.out.empty() ? output_dir() / ((a.gaussian ? "diverge_gaussian_seed" : "diverge_seed") +
                                        std::to_string(a.seed) + ".csv")
                      : fs::path(a.out);
    if (!write_file(path, csv.str())) {
        return report_error("IoError", "cannot write '" + path.string() + "'", kExitInput);
    }
    std::cout << path.string() << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Empirical likelihood meta-analysis from study-level confidence intervals"};
    app.require_subcommand(1);

    AnalyzeArgs analyze;
    auto* an = app.add_subcommand("analyze", "Combine study intervals with the requested methods");
    an->add_option("--input", analyze.input, "CSV or JSON dataset")->required()->check(CLI::ExistingFile);
    an->add_option("--scale", analyze.scale, "Scale of the effect sizes")
        ->check(CLI::IsMember({"linear", "log"}));
    an->add_flag("--input-ratio", analyze.input_ratio, "Input bounds are ratios; take logs first");
    an->add_option("--methods", analyze.methods, "Comma-separated methods or 'all'");
    an->add_option("--beta", analyze.beta, "1 - confidence level of the combined interval")
        ->check(CLI::Range(0.0, 1.0));
    an->add_option("--report-scale", analyze.report_scale, "native or ratio")
        ->check(CLI::IsMember({"native", "ratio"}));
    an->add_option("--format", analyze.format, "Standard output format")
        ->check(CLI::IsMember({"table", "json"}));
    an->add_option("--json-out", analyze.json_out, "Also write the JSON document here");
    an->add_option("--cd-tau2", analyze.cd_tau2, "tau2 estimator behind CD-RE")
        ->check(CLI::IsMember({"dl", "reml"}));

    std::string config;
    std::string sim_out;
    auto* sim = app.add_subcommand("simulate", "Run a coverage experiment grid from a config file");
    sim->add_option("--config", config, "key = value configuration")->required()->check(CLI::ExistingFile);
    sim->add_option("--out-dir", sim_out, "Overrides out_dir and ELMETA_OUTPUT_DIR");

    QqArgs qq;
    auto* q = app.add_subcommand("qq", "Quantiles of -2 log R at the true value under chi-square data");
    q->add_option("--n", qq.n, "Observations per study")->required();
    q->add_option("--K", qq.k, "Number of studies")->required();
    q->add_option("--replicates", qq.replicates, "Replicated datasets");
    q->add_option("--seed", qq.seed, "Random seed");
    q->add_option("--variants", qq.variants, "Comma-separated EL variants");
    q->add_option("--out", qq.out, "Output CSV path");

    DivergeArgs dv;
    auto* d = app.add_subcommand("diverge", "Mean of the standardized sum for large K and small n");
    d->add_option("--K-list", dv.ks, "Study counts")->required()->delimiter(',');
    d->add_option("--n-list", dv.ns, "Per-study sample sizes")->required()->delimiter(',');
    d->add_option("--replicates", dv.replicates, "Replicates per cell");
    d->add_option("--seed", dv.seed, "Random seed");
    d->add_flag("--gaussian", dv.gaussian, "Gaussian control instead of chi-square data");
    d->add_option("--out", dv.out, "Output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("BadFlags", e.what(), kExitInput);
    }

    if (*an) return run_analyze(analyze);
    if (*sim) return run_simulate(config, sim_out);
    if (*q) return run_qq(qq);
    return run_diverge(dv);
}
