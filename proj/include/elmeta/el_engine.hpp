#pragma once

#include <cstddef>
#include <vector>

#include "elmeta/dual_solver.hpp"
#include "elmeta/types.hpp"

namespace elmeta {

/// Which estimating equation defines the empirical likelihood.
enum class ElVariant {
    RandomEffects,   ///< W_i = (U+L-2t)/(U-L)
    FixedIndicator,  ///< 1{L <= t <= U} - (1 - alpha)
    FixedSymmetry,   ///< z * W_i
    FixedBoth,       ///< both of the above stacked (r = 2)
};

const char* to_string(ElVariant variant) noexcept;
int dimension(ElVariant variant) noexcept;
Method method_of(ElVariant variant) noexcept;
/// Throws BadArgument for non-EL methods.
ElVariant variant_of(Method method);
bool is_el_method(Method method) noexcept;

/// Per-study estimating vectors for one dataset and variant.
class EstimatingFunction {
public:
    EstimatingFunction(const MetaDataset& data, ElVariant variant);

    ElVariant variant() const { return variant_; }
    int dimension() const { return elmeta::dimension(variant_); }
    std::size_t size() const { return lower_.size(); }
    double alpha() const { return alpha_; }
    /// z_{1-alpha/2} used by the symmetry-based components.
    double critical_value() const { return z_; }

    double lower(std::size_t i) const { return lower_[i]; }
    double upper(std::size_t i) const { return upper_[i]; }
    /// (U_i + L_i - 2 theta) / (U_i - L_i).
    double symmetry_component(std::size_t i, double theta) const;
    bool covers(std::size_t i, double theta) const {
        return lower_[i] <= theta && theta <= upper_[i];
    }

    /// Estimating vectors at theta; their weighted mean is constrained to zero.
    std::vector<Moment> evaluate(double theta) const;
    /// Same as evaluate() but with the coverage pattern supplied explicitly.
    std::vector<Moment> evaluate_with_pattern(double theta, const std::vector<char>& covered) const;

private:
    ElVariant variant_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    double alpha_;
    double z_;
};

/// Closed-form log empirical likelihood under the coverage-indicator constraint when m of K
/// intervals cover theta: m log((1-a)/m) + (K-m) log(a/(K-m)); -inf unless 1 <= m <= K-1.
double indicator_log_likelihood(std::size_t covered, std::size_t total, double alpha);

struct ElEvaluation {
    double theta = 0.0;
    /// -2 log R(theta); +inf when the constraint set is infeasible.
    double neg2logr = 0.0;
    double log_likelihood = 0.0;
    Moment lambda{0.0, 0.0};
    bool feasible = false;
    std::vector<double> weights;
    int iterations = 0;
};

/// Empirical-likelihood ratio for one (dataset, variant). The profile maximum is computed at
/// construction, so every const member function is a pure function of theta.
class ElModel {
public:
    /// Throws Error(NoFeasibleTheta) when no theta gives a feasible constraint set.
    ElModel(const MetaDataset& data, ElVariant variant, DualOptions options = {});

    const EstimatingFunction& estimating_function() const { return ef_; }
    ElVariant variant() const { return ef_.variant(); }
    double estimate() const { return theta_hat_; }
    double max_log_likelihood() const { return log_lik_max_; }

    /// log L(theta), -inf when infeasible.
    double log_likelihood(double theta) const;
    ElEvaluation evaluate(double theta) const;
    double neg2logr(double theta) const { return evaluate(theta).neg2logr; }

    /// Connected component of {theta : -2 log R(theta) <= chi2_{1-beta}(r)} containing the
    /// estimate. The full (possibly disconnected) set is attached as level_set for the
    /// indicator-based variants.
    AnalysisResult confidence_interval(double beta) const;

    /// Every piece of {theta : -2 log R(theta) <= threshold}, sorted and merged.
    std::vector<ClosedInterval> level_set(double threshold) const;

    /// Closure of the set of theta with a feasible constraint set.
    ClosedInterval feasible_range() const;

    /// Sorted distinct interval endpoints (empty for the symmetry-only variants).
    const std::vector<double>& breakpoints() const { return breakpoints_; }

private:
    // A point {lo} or an open segment (lo, hi) on which the coverage pattern is constant.
    struct Atom {
        double lo = 0.0;
        double hi = 0.0;
        bool point = false;
        std::size_t covered = 0;
        std::vector<char> pattern;
    };

    struct SegmentOptimum {
        double theta = 0.0;
        double log_likelihood = 0.0;
    };

    void build_atoms();
    void compute_profile();
    double atom_log_likelihood(const Atom& atom, double theta) const;
    double atom_neg2logr(const Atom& atom, double theta) const;
    SegmentOptimum maximize_atom(const Atom& atom) const;
    double atom_upper_bound(const Atom& atom) const;
    std::size_t atom_containing(double theta) const;
    double walk(double threshold, int direction, int& evaluations) const;
    std::vector<ClosedInterval> level_set(double threshold, int& evaluations) const;
    double bisect(const Atom& atom, double inside, double outside, double threshold,
                  int& evaluations) const;

    EstimatingFunction ef_;
    DualOptions options_;
    std::vector<double> breakpoints_;
    std::vector<Atom> atoms_;
    double theta_hat_ = 0.0;
    double log_lik_max_ = 0.0;
};

}  // namespace elmeta
