#include "elmeta/classic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

#include "elmeta/distributions.hpp"
#include "elmeta/error.hpp"

namespace elmeta {

const char* to_string(Tau2Estimator estimator) noexcept {
    switch (estimator) {
        case Tau2Estimator::None: return "none";
        case Tau2Estimator::DerSimonianLaird: return "DL";
        case Tau2Estimator::REML: return "REML";
    }
    return "unknown";
}

WeightedSummaries::WeightedSummaries(std::vector<double> centers, std::vector<double> sds,
                                     double tau2)
    : centers_(std::move(centers)), sds_(std::move(sds)), tau2_(tau2) {
    if (centers_.empty() || centers_.size() != sds_.size()) {
        throw Error(ErrorCode::BadArgument, "summaries need matching, non-empty centers and sds");
    }
    if (!(tau2_ >= 0.0) || !std::isfinite(tau2_)) {
        throw Error(ErrorCode::BadArgument, "tau2 must be finite and non-negative");
    }
    total_sd_.reserve(sds_.size());
    for (std::size_t k = 0; k < sds_.size(); ++k) {
        if (!(sds_[k] > 0.0) || !std::isfinite(sds_[k]) || !std::isfinite(centers_[k])) {
            throw Error(ErrorCode::BadArgument, "summary standard errors must be positive");
        }
        total_sd_.push_back(std::sqrt(sds_[k] * sds_[k] + tau2_));
    }
}

WeightedSummaries WeightedSummaries::from_dataset(const MetaDataset& data, double tau2) {
    std::vector<double> centers;
    std::vector<double> sds;
    centers.reserve(data.size());
    sds.reserve(data.size());
    for (const auto& s : data.studies()) {
        const auto r = recover_summary(s);
        centers.push_back(r.center);
        sds.push_back(r.sd);
    }
    return {std::move(centers), std::move(sds), tau2};
}

WeightedSummaries WeightedSummaries::with_tau2(double tau2) const {
    return {centers_, sds_, tau2};
}

double dl_tau2(const WeightedSummaries& summaries) {
    const std::size_t k = summaries.size();
    if (k < 2) throw Error(ErrorCode::TooFewStudies, "DerSimonian-Laird needs K >= 2");
    double sum_a = 0.0, sum_a2 = 0.0, sum_ay = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double a = 1.0 / (summaries.sds()[i] * summaries.sds()[i]);
        sum_a += a;
        sum_a2 += a * a;
        sum_ay += a * summaries.centers()[i];
    }
    const double pooled = sum_ay / sum_a;
    double q = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double a = 1.0 / (summaries.sds()[i] * summaries.sds()[i]);
        const double d = summaries.centers()[i] - pooled;
        q += a * d * d;
    }
    const double denom = sum_a - sum_a2 / sum_a;
    return std::max(0.0, (q - static_cast<double>(k - 1)) / denom);
}

double reml_log_likelihood(const WeightedSummaries& summaries, double tau2) {
    const std::size_t k = summaries.size();
    double sum_log_v = 0.0, sum_w = 0.0, sum_wy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double v = summaries.sds()[i] * summaries.sds()[i] + tau2;
        sum_log_v += std::log(v);
        sum_w += 1.0 / v;
        sum_wy += summaries.centers()[i] / v;
    }
    const double pooled = sum_wy / sum_w;
    double rss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double v = summaries.sds()[i] * summaries.sds()[i] + tau2;
        const double d = summaries.centers()[i] - pooled;
        rss += d * d / v;
    }
    return -0.5 * (sum_log_v + std::log(sum_w) + rss);
}

double reml_search_limit(const WeightedSummaries& summaries) {
    const auto [lo, hi] = std::minmax_element(summaries.centers().begin(), summaries.centers().end());
    const double range = *hi - *lo;
    return 10.0 * range * range;
}

double reml_tau2(const WeightedSummaries& summaries) {
    if (summaries.size() < 2) throw Error(ErrorCode::TooFewStudies, "REML needs K >= 2");
    const double limit = reml_search_limit(summaries);
    if (!(limit > 0.0)) return 0.0;

    // A coarse scan guards against a secondary mode before Brent refines the bracket.
    constexpr int kScan = 400;
    int best_i = 0;
    double best = reml_log_likelihood(summaries, 0.0);
    for (int i = 1; i <= kScan; ++i) {
        const double t = limit * i / kScan;
        const double v = reml_log_likelihood(summaries, t);
        if (v > best) {
            best = v;
            best_i = i;
        }
    }
    const double lo = limit * std::max(best_i - 1, 0) / kScan;
    const double hi = limit * std::min(best_i + 1, kScan) / kScan;
    const auto neg = [&](double t) { return -reml_log_likelihood(summaries, t); };
    // 26 bits is the most Brent can honour in double precision (relative tolerance ~1.5e-8).
    const auto [arg, value] = boost::math::tools::brent_find_minima(neg, lo, hi, 26);
    double tau2 = arg;
    // Boundary maximum at zero when the likelihood is decreasing from the origin.
    if (reml_log_likelihood(summaries, 0.0) >= -value) tau2 = 0.0;
    return std::clamp(tau2, 0.0, limit);
}

double estimate_tau2(const WeightedSummaries& summaries, Tau2Estimator estimator) {
    switch (estimator) {
        case Tau2Estimator::None: return 0.0;
        case Tau2Estimator::DerSimonianLaird: return dl_tau2(summaries);
        case Tau2Estimator::REML: return reml_tau2(summaries);
    }
    return 0.0;
}

namespace {

void require_beta(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::BadArgument, "beta must lie in (0, 1)");
}

}  // namespace

AnalysisResult conventional_ci(const WeightedSummaries& summaries, double beta) {
    require_beta(beta);
    double sum_w = 0.0, sum_wy = 0.0;
    for (std::size_t k = 0; k < summaries.size(); ++k) {
        const double s = summaries.total_sd(k);
        const double w = 1.0 / (s * s);
        sum_w += w;
        sum_wy += w * summaries.centers()[k];
    }
    AnalysisResult r;
    r.method = summaries.tau2() > 0.0 ? Method::ConventionalREDL : Method::ConventionalFE;
    r.estimate = sum_wy / sum_w;
    const double half = dist::normal_quantile(1.0 - 0.5 * beta) / std::sqrt(sum_w);
    r.ci_lower = r.estimate - half;
    r.ci_upper = r.estimate + half;
    r.ci_level = 1.0 - beta;
    r.tau2 = summaries.tau2();
    r.diagnostics["standard_error"] = 1.0 / std::sqrt(sum_w);
    return r;
}

namespace {

// H_c(theta) = Phi((A theta - B) / C) with A = sum w_k/s_k, B = sum w_k Y_k/s_k,
// C = sqrt(sum w_k^2).
struct CdCoefficients {
    double slope = 0.0;
    double offset = 0.0;
    double norm = 0.0;
};

CdCoefficients cd_coefficients(const WeightedSummaries& summaries) {
    CdCoefficients c;
    double sum_w2 = 0.0;
    for (std::size_t k = 0; k < summaries.size(); ++k) {
        const double s = summaries.total_sd(k);
        const double w = summaries.weight(k);
        c.slope += w / s;
        c.offset += w * summaries.centers()[k] / s;
        sum_w2 += w * w;
    }
    c.norm = std::sqrt(sum_w2);
    return c;
}

double cd_inverse(const CdCoefficients& c, double u) {
    return (c.offset + c.norm * dist::normal_quantile(u)) / c.slope;
}

}  // namespace

double cd_function(const WeightedSummaries& summaries, double theta) {
    double g = 0.0, sum_w2 = 0.0;
    for (std::size_t k = 0; k < summaries.size(); ++k) {
        const double s = summaries.total_sd(k);
        const double w = summaries.weight(k);
        // w_k * Phi^{-1}(H_k(theta)) with H_k(theta) = Phi((theta - Y_k)/s_k).
        g += w * (theta - summaries.centers()[k]) / s;
        sum_w2 += w * w;
    }
    return dist::normal_cdf(g / std::sqrt(sum_w2));
}

AnalysisResult cd_ci(const WeightedSummaries& summaries, double beta) {
    require_beta(beta);
    const auto c = cd_coefficients(summaries);
    AnalysisResult r;
    r.method = summaries.tau2() > 0.0 ? Method::CDRE : Method::CDFE;
    r.estimate = c.offset / c.slope;
    r.ci_lower = cd_inverse(c, 0.5 * beta);
    r.ci_upper = cd_inverse(c, 1.0 - 0.5 * beta);
    r.ci_level = 1.0 - beta;
    r.tau2 = summaries.tau2();
    return r;
}

}  // namespace elmeta
