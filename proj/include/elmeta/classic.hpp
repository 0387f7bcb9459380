#pragma once

#include <span>
#include <vector>

#include "elmeta/types.hpp"

namespace elmeta {

enum class Tau2Estimator { None, DerSimonianLaird, REML };

const char* to_string(Tau2Estimator estimator) noexcept;

/// Study centers and standard errors together with the between-study variance used to
/// form total standard errors s_k = sqrt(sd_k^2 + tau2).
class WeightedSummaries {
public:
    WeightedSummaries(std::vector<double> centers, std::vector<double> sds, double tau2 = 0.0);

    /// Summaries recovered from every interval of the dataset.
    static WeightedSummaries from_dataset(const MetaDataset& data, double tau2 = 0.0);

    WeightedSummaries with_tau2(double tau2) const;

    std::size_t size() const { return centers_.size(); }
    std::span<const double> centers() const { return centers_; }
    std::span<const double> sds() const { return sds_; }
    double tau2() const { return tau2_; }
    double total_sd(std::size_t k) const { return total_sd_[k]; }
    /// w_k = 1 / s_k.
    double weight(std::size_t k) const { return 1.0 / total_sd_[k]; }

private:
    std::vector<double> centers_;
    std::vector<double> sds_;
    std::vector<double> total_sd_;
    double tau2_;
};

/// DerSimonian-Laird moment estimator, truncated at zero.
double dl_tau2(const WeightedSummaries& summaries);

/// Gaussian restricted log-likelihood of tau2.
double reml_log_likelihood(const WeightedSummaries& summaries, double tau2);

/// Upper end of the REML search range: 10 * (max center - min center)^2.
double reml_search_limit(const WeightedSummaries& summaries);

/// Restricted maximum-likelihood tau2 on [0, reml_search_limit()].
double reml_tau2(const WeightedSummaries& summaries);

double estimate_tau2(const WeightedSummaries& summaries, Tau2Estimator estimator);

/// Inverse-variance pooled estimate and Wald interval at level 1 - beta.
AnalysisResult conventional_ci(const WeightedSummaries& summaries, double beta);

/// Combined confidence distribution H_c(theta) for the linear combination with w_k = 1/s_k.
double cd_function(const WeightedSummaries& summaries, double theta);

/// Interval [H_c^{-1}(beta/2), H_c^{-1}(1 - beta/2)] with median estimate H_c^{-1}(1/2).
AnalysisResult cd_ci(const WeightedSummaries& summaries, double beta);

}  // namespace elmeta
