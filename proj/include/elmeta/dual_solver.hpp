#pragma once

#include <array>
#include <span>
#include <vector>

namespace elmeta {

/// Estimating vector of dimension 1 or 2; unused trailing entries are zero.
using Moment = std::array<double, 2>;

struct DualSolution {
    bool feasible = false;
    /// Lagrange multiplier of the moment constraint.
    Moment lambda{0.0, 0.0};
    /// sum_i log p_i, or -inf when the target is not in the relative interior of the hull.
    double log_likelihood = 0.0;
    /// Empirical-likelihood weights p_i (empty when infeasible).
    std::vector<double> weights;
    int iterations = 0;
    /// max_j |sum_i p_i v_ij| after centering.
    double residual = 0.0;
};

struct DualOptions {
    int max_iterations = 100;
    double tolerance = 1e-12;
};

/// Maximizes prod p_i subject to sum p_i = 1 and sum p_i (v_i - target) = 0 through the
/// convex dual: lambda maximizes sum_i log(1 + lambda'(v_i - target)), after which
/// p_i = 1 / (K (1 + lambda'(v_i - target))).
///
/// The target must lie strictly inside the convex hull of the vectors (relative interior
/// when the vectors are collinear); otherwise the optimum puts zero weight on some study and
/// the result is reported as infeasible. Throws Error(NoConvergence) if Newton stalls on a
/// feasible problem.
DualSolution solve_dual(std::span<const Moment> vectors, int dimension, const Moment& target,
                        const DualOptions& options = {});

/// Relative-interior test for the origin against the (already centered) vectors.
bool origin_in_relative_interior(std::span<const Moment> centered, int dimension);

}  // namespace elmeta
