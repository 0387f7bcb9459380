#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elmeta/el_engine.hpp"
#include "elmeta/random.hpp"
#include "elmeta/types.hpp"

namespace elmeta {

/// Distribution pairs (within-study F, between-study G):
/// S1 Gaussian/Gaussian, S2 Gaussian/log-normal, S3 chi-square/Gaussian,
/// S4 log-normal/chi-square, FixedChiSq raw chi-square(4) with no random effect.
enum class Scenario { S1, S2, S3, S4, FixedChiSq };

const char* to_string(Scenario scenario) noexcept;
Scenario parse_scenario(std::string_view text);

/// How per-study sample sizes are drawn.
struct SampleSizeRule {
    enum class Kind { UniformScaled, UniformK, Fixed };

    Kind kind = Kind::UniformScaled;
    /// UniformScaled: n = round(factor * U[lo, hi]); UniformK: n = round(U[lo*K, hi*K]).
    double lo = 100.0;
    double hi = 500.0;
    double factor = 0.2;
    std::int64_t fixed = 0;

    static SampleSizeRule uniform_scaled(double lo, double hi, double factor);
    static SampleSizeRule uniform_k(double lo, double hi);
    static SampleSizeRule fixed_size(std::int64_t n);
    /// Parses "uniform_scaled(100,500,0.2)", "uniform_k(4,5)" or "fixed(50)".
    static SampleSizeRule parse(std::string_view text);

    std::int64_t draw(std::int64_t k, RandomStream& rng) const;
    /// Smallest value the rule can produce for K studies.
    std::int64_t minimum(std::int64_t k) const;
    std::string to_string() const;
};

struct SimulationConfig {
    Scenario scenario = Scenario::S1;
    double theta = 0.0;
    double sigma2 = 1.0;
    double tau2 = 0.0;
    std::int64_t studies = 20;
    SampleSizeRule n_rule;
    std::int64_t replicates = 1000;
    std::uint64_t seed = 1;
    double beta = 0.05;
    /// Level 1 - alpha of the per-study intervals.
    double study_level = 0.95;

    /// Throws Error(BadConfig) naming the offending field.
    void validate() const;
};

/// Defaults for the fixed-effect chi-square(4) study: theta 4, sigma2 8, tau2 0.
SimulationConfig fixed_chisq_config(std::int64_t n, std::int64_t k, std::int64_t replicates,
                                    std::uint64_t seed);

/// Moment-matched variates: target_mean + target_sd * standardized draw.
double scaled_chi_square4(RandomStream& rng, double target_mean, double target_sd);
double scaled_lognormal11(RandomStream& rng, double target_mean, double target_sd);

/// One simulated meta-analysis; per-study intervals use the z rule for n >= 30 and t(n-1)
/// otherwise.
MetaDataset gen_dataset(const SimulationConfig& config, RandomStream& rng);
/// gen_dataset with the stream for replicate `replicate` of config.seed.
MetaDataset gen_dataset(const SimulationConfig& config, std::uint64_t replicate);

struct ReplicateRecord {
    bool failed = false;
    bool covered = false;
    double estimate = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
};

struct MethodCoverage {
    Method method = Method::ELRE;
    double coverage = 0.0;
    /// Mean width over replicates in which the method produced an interval.
    double mean_width = 0.0;
    std::int64_t replicates = 0;
    std::int64_t covered = 0;
    std::int64_t failures = 0;
    std::vector<ReplicateRecord> records;
};

struct ExperimentResult {
    SimulationConfig config;
    std::vector<MethodCoverage> methods;
};

/// Runs every method on `config.replicates` simulated datasets. Method failures count as
/// non-covering and are tallied separately.
ExperimentResult run_coverage(const SimulationConfig& config, std::span<const Method> methods,
                              bool keep_records = false);

struct QqResult {
    ElVariant variant = ElVariant::FixedSymmetry;
    /// -2 log R(theta0) per replicate, in replicate order.
    std::vector<double> samples;
    std::vector<double> sample_quantiles;
    std::vector<double> theoretical_quantiles;
    double ks_distance = 0.0;
    std::int64_t failures = 0;
};

/// Distribution of -2 log R at the true theta for each variant on the same datasets.
std::vector<QqResult> run_qq(const SimulationConfig& config, std::span<const ElVariant> variants);
QqResult run_qq(const SimulationConfig& config, ElVariant variant);

/// Kolmogorov-Smirnov distance between the empirical distribution of `samples` and `cdf`.
double ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf);

enum class DivergenceModel { ChiSquare, Gaussian };

struct DivergenceRow {
    std::int64_t studies = 0;
    std::int64_t n = 0;
    double mean_z = 0.0;
    double se_z = 0.0;
    /// Same statistic with s_i^2 = sigma_i^2 (no between-study variance).
    double mean_z_fixed = 0.0;
    double se_z_fixed = 0.0;
};

/// Mean of Z = K^{-1/2} sum_i (theta - Y_i) / s_i with theta_i ~ N(0, 1) and
/// y_ij = chi2(4) - 4 + theta_i (or a variance-8 Gaussian control).
std::vector<DivergenceRow> run_divergence(std::span<const std::int64_t> studies,
                                          std::span<const std::int64_t> sizes,
                                          std::int64_t replicates, std::uint64_t seed,
                                          DivergenceModel model = DivergenceModel::ChiSquare);

/// Worker threads used by the harness (ELMETA_THREADS overrides hardware concurrency).
unsigned worker_count();

}  // namespace elmeta
