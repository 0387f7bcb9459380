#include "elmeta/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "elmeta/error.hpp"

namespace elmeta {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double cross(const Moment& o, const Moment& a, const Moment& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

double scale_of(std::span<const Moment> v, int dim) {
    double s = 0.0;
    for (const auto& m : v) {
        for (int j = 0; j < dim; ++j) s = std::max(s, std::fabs(m[j]));
    }
    return s;
}

bool all_zero(std::span<const Moment> v, int dim) { return scale_of(v, dim) == 0.0; }

bool straddles_zero(std::span<const double> s) {
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    return *lo < 0.0 && *hi > 0.0;
}

// Direction of the line through the origin that carries every vector, if one exists.
bool collinear_through_origin(std::span<const Moment> v, Moment& direction) {
    const Moment* far = &v.front();
    double best = 0.0;
    for (const auto& m : v) {
        const double n = std::hypot(m[0], m[1]);
        if (n > best) {
            best = n;
            far = &m;
        }
    }
    direction = {(*far)[0] / best, (*far)[1] / best};
    const double tol = 1e-13 * best;
    for (const auto& m : v) {
        if (std::fabs(direction[0] * m[1] - direction[1] * m[0]) > tol) return false;
    }
    return true;
}

// Strict interior test against the planar convex hull (Andrew's monotone chain).
bool origin_strictly_inside_hull(std::span<const Moment> v) {
    std::vector<Moment> pts(v.begin(), v.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return false;

    std::vector<Moment> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    if (hull.size() < 3) return false;

    const Moment origin{0.0, 0.0};
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Moment& a = hull[i];
        const Moment& b = hull[(i + 1) % hull.size()];
        if (cross(a, b, origin) <= 0.0) return false;
    }
    return true;
}

struct ScalarSolve {
    double lambda = 0.0;
    int iterations = 0;
};

// Safeguarded Newton for sum_i s_i / (1 + lambda s_i) = 0. The left side is strictly
// decreasing on the admissible interval, so bisection keeps a valid bracket.
ScalarSolve solve_scalar(std::span<const double> s, const DualOptions& opt) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (double x : s) {
        if (x > 0.0) lo = std::max(lo, -1.0 / x);
        if (x < 0.0) hi = std::min(hi, -1.0 / x);
    }
    double lambda = 0.0;
    ScalarSolve out;
    // Newton is capped at max_iterations; the bisection fallback gets its own budget.
    const int budget = opt.max_iterations + 200;
    for (int it = 1; it <= budget; ++it) {
        double g = 0.0;
        double h = 0.0;
        double magnitude = 0.0;
        for (double x : s) {
            const double d = 1.0 + lambda * x;
            g += x / d;
            h += x * x / (d * d);
            magnitude += std::fabs(x) / d;
        }
        out.iterations = it;
        // Relative to the size of its terms, so the test is unchanged by rescaling the
        // vectors; near the hull boundary lambda is huge and every term is tiny.
        if (std::fabs(g) <= opt.tolerance * magnitude) {
            out.lambda = lambda;
            return out;
        }
        if (g > 0.0) lo = lambda; else hi = lambda;
        double next = lambda + g / h;
        if (!(next > lo && next < hi) || it > opt.max_iterations) next = 0.5 * (lo + hi);
        if (next == lambda || !(hi > lo)) {
            out.lambda = lambda;
            return out;
        }
        lambda = next;
    }
    std::ostringstream msg;
    msg << "dual Newton did not converge in 1-D (K=" << s.size() << ", lambda=" << lambda << ")";
    throw Error(ErrorCode::NoConvergence, msg.str());
}

double dual_objective(std::span<const Moment> v, const Moment& lambda) {
    double f = 0.0;
    for (const auto& m : v) {
        const double d = 1.0 + lambda[0] * m[0] + lambda[1] * m[1];
        if (!(d > 0.0)) return kNegInf;
        f += std::log(d);
    }
    return f;
}

// Damped Newton ascent on the concave 2-D dual with step halving.
int solve_planar(std::span<const Moment> v, const DualOptions& opt, Moment& lambda) {
    lambda = {0.0, 0.0};
    double f = 0.0;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0, m0 = 0.0, m1 = 0.0;
        for (const auto& m : v) {
            const double inv = 1.0 / (1.0 + lambda[0] * m[0] + lambda[1] * m[1]);
            const double a = m[0] * inv;
            const double b = m[1] * inv;
            g0 += a;
            g1 += b;
            h00 += a * a;
            h01 += a * b;
            h11 += b * b;
            m0 += std::fabs(a);
            m1 += std::fabs(b);
        }
        if (std::fabs(g0) <= opt.tolerance * m0 && std::fabs(g1) <= opt.tolerance * m1) return it;

        const double det = h00 * h11 - h01 * h01;
        Moment step;
        if (det > 0.0 && std::isfinite(det)) {
            step = {(h11 * g0 - h01 * g1) / det, (h00 * g1 - h01 * g0) / det};
        } else {
            step = {g0 / std::max(h00, 1e-300), g1 / std::max(h11, 1e-300)};
        }
        // Near the optimum the predicted gain drops below the resolution of f, so the
        // full step is taken whenever it stays inside the domain.
        // The decrement is twice the remaining gain in f up to third-order terms and does not
        // depend on how the vectors are scaled.
        const double decrement = step[0] * g0 + step[1] * g1;
        if (decrement <= 1e-20) return it;
        const bool polish = decrement <= 1e-12 * std::max(1.0, std::fabs(f));
        double t = 1.0;
        bool moved = false;
        for (int halving = 0; halving < 80; ++halving, t *= 0.5) {
            const Moment trial{lambda[0] + t * step[0], lambda[1] + t * step[1]};
            if (trial == lambda) break;
            const double ft = dual_objective(v, trial);
            if (ft >= f || (polish && ft > kNegInf)) {
                lambda = trial;
                f = ft;
                moved = true;
                break;
            }
        }
        if (!moved) {
            if (polish) return it;
            break;
        }
    }
    std::ostringstream msg;
    msg << "dual Newton did not converge in 2-D (K=" << v.size() << ", lambda=(" << lambda[0]
        << ", " << lambda[1] << "))";
    throw Error(ErrorCode::NoConvergence, msg.str());
}

}  // namespace

bool origin_in_relative_interior(std::span<const Moment> centered, int dimension) {
    if (centered.empty()) return false;
    if (all_zero(centered, dimension)) return true;
    if (dimension == 1) {
        std::vector<double> s;
        s.reserve(centered.size());
        for (const auto& m : centered) s.push_back(m[0]);
        return straddles_zero(s);
    }
    Moment direction;
    if (collinear_through_origin(centered, direction)) {
        std::vector<double> s;
        s.reserve(centered.size());
        for (const auto& m : centered) s.push_back(direction[0] * m[0] + direction[1] * m[1]);
        return straddles_zero(s);
    }
    return origin_strictly_inside_hull(centered);
}

DualSolution solve_dual(std::span<const Moment> vectors, int dimension, const Moment& target,
                        const DualOptions& options) {
    if (dimension != 1 && dimension != 2) {
        throw Error(ErrorCode::BadArgument, "solve_dual: dimension must be 1 or 2");
    }
    if (vectors.size() < 2) throw Error(ErrorCode::TooFewStudies, "solve_dual: need K >= 2");

    std::vector<Moment> v(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        for (int j = 0; j < dimension; ++j) {
            if (!std::isfinite(vectors[i][j])) {
                throw Error(ErrorCode::BadArgument, "solve_dual: non-finite estimating vector");
            }
            v[i][j] = vectors[i][j] - target[j];
        }
        if (dimension == 1) v[i][1] = 0.0;
    }

    DualSolution sol;
    const double k = static_cast<double>(v.size());
    if (!origin_in_relative_interior(v, dimension)) {
        sol.feasible = false;
        sol.log_likelihood = kNegInf;
        return sol;
    }

    if (all_zero(v, dimension)) {
        sol.iterations = 0;
    } else if (dimension == 1) {
        std::vector<double> s(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) s[i] = v[i][0];
        const ScalarSolve r = solve_scalar(s, options);
        sol.lambda = {r.lambda, 0.0};
        sol.iterations = r.iterations;
    } else {
        Moment direction;
        if (collinear_through_origin(v, direction)) {
            std::vector<double> s(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) {
                s[i] = direction[0] * v[i][0] + direction[1] * v[i][1];
            }
            const ScalarSolve r = solve_scalar(s, options);
            sol.lambda = {r.lambda * direction[0], r.lambda * direction[1]};
            sol.iterations = r.iterations;
        } else {
            sol.iterations = solve_planar(v, options, sol.lambda);
        }
    }

    sol.feasible = true;
    sol.weights.resize(v.size());
    double sum_log_denominator = 0.0;
    Moment residual{0.0, 0.0};
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = 1.0 + sol.lambda[0] * v[i][0] + sol.lambda[1] * v[i][1];
        sum_log_denominator += std::log(d);
        sol.weights[i] = 1.0 / (k * d);
        residual[0] += sol.weights[i] * v[i][0];
        residual[1] += sol.weights[i] * v[i][1];
    }
    sol.log_likelihood = -k * std::log(k) - sum_log_denominator;
    sol.residual = std::max(std::fabs(residual[0]), std::fabs(residual[1]));
    return sol;
}

}  // namespace elmeta
