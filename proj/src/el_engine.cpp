#include "elmeta/el_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "elmeta/distributions.hpp"
#include "elmeta/error.hpp"

namespace elmeta {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Golden-section search for the maximum of a unimodal function on [a, b]. Ties (including
// both probes being -inf) move toward `prefer_right`.
template <class F>
std::pair<double, double> golden_section_max(F&& f, double a, double b, double tol,
                                             bool prefer_right) {
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        const bool go_right = fd > fc || (fd == fc && prefer_right);
        if (go_right) {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        }
        if (!(c < d)) break;
    }
    return fc > fd || (fc == fd && !prefer_right) ? std::pair{c, fc} : std::pair{d, fd};
}

}  // namespace

const char* to_string(ElVariant variant) noexcept {
    switch (variant) {
        case ElVariant::RandomEffects: return "EL-RE";
        case ElVariant::FixedIndicator: return "EL1";
        case ElVariant::FixedSymmetry: return "EL2";
        case ElVariant::FixedBoth: return "EL3";
    }
    return "Unknown";
}

int dimension(ElVariant variant) noexcept { return variant == ElVariant::FixedBoth ? 2 : 1; }

Method method_of(ElVariant variant) noexcept {
    switch (variant) {
        case ElVariant::RandomEffects: return Method::ELRE;
        case ElVariant::FixedIndicator: return Method::EL1;
        case ElVariant::FixedSymmetry: return Method::EL2;
        case ElVariant::FixedBoth: return Method::EL3;
    }
    return Method::ELRE;
}

bool is_el_method(Method method) noexcept {
    return method == Method::ELRE || method == Method::EL1 || method == Method::EL2 ||
           method == Method::EL3;
}

ElVariant variant_of(Method method) {
    switch (method) {
        case Method::ELRE: return ElVariant::RandomEffects;
        case Method::EL1: return ElVariant::FixedIndicator;
        case Method::EL2: return ElVariant::FixedSymmetry;
        case Method::EL3: return ElVariant::FixedBoth;
        default: break;
    }
    throw Error(ErrorCode::BadArgument,
                std::string(to_string(method)) + " is not an empirical-likelihood method");
}

EstimatingFunction::EstimatingFunction(const MetaDataset& data, ElVariant variant)
    : variant_(variant),
      alpha_(data.alpha()),
      z_(dist::normal_quantile(1.0 - 0.5 * data.alpha())) {
    lower_.reserve(data.size());
    upper_.reserve(data.size());
    for (const auto& s : data.studies()) {
        lower_.push_back(s.lower);
        upper_.push_back(s.upper);
    }
}

double EstimatingFunction::symmetry_component(std::size_t i, double theta) const {
    // Written around the midpoint so the sign is exact and W vanishes exactly there; the hull
    // test at the ends of the feasible range then does not depend on rounding.
    const double mid = 0.5 * (lower_[i] + upper_[i]);
    return 2.0 * (mid - theta) / (upper_[i] - lower_[i]);
}

std::vector<Moment> EstimatingFunction::evaluate(double theta) const {
    std::vector<char> covered(size());
    for (std::size_t i = 0; i < size(); ++i) covered[i] = covers(i, theta) ? 1 : 0;
    return evaluate_with_pattern(theta, covered);
}

std::vector<Moment> EstimatingFunction::evaluate_with_pattern(
    double theta, const std::vector<char>& covered) const {
    std::vector<Moment> out(size(), Moment{0.0, 0.0});
    const double level = 1.0 - alpha_;
    for (std::size_t i = 0; i < size(); ++i) {
        const double indicator = (covered[i] ? 1.0 : 0.0) - level;
        switch (variant_) {
            case ElVariant::RandomEffects:
                out[i][0] = symmetry_component(i, theta);
                break;
            case ElVariant::FixedIndicator:
                out[i][0] = indicator;
                break;
            case ElVariant::FixedSymmetry:
                out[i][0] = z_ * symmetry_component(i, theta);
                break;
            case ElVariant::FixedBoth:
                out[i][0] = indicator;
                out[i][1] = z_ * symmetry_component(i, theta);
                break;
        }
    }
    return out;
}

double indicator_log_likelihood(std::size_t covered, std::size_t total, double alpha) {
    if (covered == 0 || covered >= total) return kNegInf;
    const double m = static_cast<double>(covered);
    const double rest = static_cast<double>(total - covered);
    return m * std::log((1.0 - alpha) / m) + rest * std::log(alpha / rest);
}

ElModel::ElModel(const MetaDataset& data, ElVariant variant, DualOptions options)
    : ef_(data, variant), options_(options) {
    build_atoms();
    compute_profile();
}

void ElModel::build_atoms() {
    const std::size_t k = ef_.size();
    if (ef_.variant() == ElVariant::RandomEffects || ef_.variant() == ElVariant::FixedSymmetry) {
        double lo = kInf;
        double hi = kNegInf;
        for (std::size_t i = 0; i < k; ++i) {
            const double mid = 0.5 * (ef_.lower(i) + ef_.upper(i));
            lo = std::min(lo, mid);
            hi = std::max(hi, mid);
        }
        Atom atom;
        atom.lo = lo;
        atom.hi = hi;
        atom.point = lo == hi;
        atoms_.push_back(std::move(atom));
        return;
    }

    breakpoints_.reserve(2 * k);
    for (std::size_t i = 0; i < k; ++i) {
        breakpoints_.push_back(ef_.lower(i));
        breakpoints_.push_back(ef_.upper(i));
    }
    std::sort(breakpoints_.begin(), breakpoints_.end());
    breakpoints_.erase(std::unique(breakpoints_.begin(), breakpoints_.end()), breakpoints_.end());

    atoms_.reserve(2 * breakpoints_.size() - 1);
    for (std::size_t j = 0; j < breakpoints_.size(); ++j) {
        Atom point;
        point.lo = point.hi = breakpoints_[j];
        point.point = true;
        point.pattern.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            point.pattern[i] = ef_.lower(i) <= breakpoints_[j] && breakpoints_[j] <= ef_.upper(i);
            point.covered += point.pattern[i];
        }
        atoms_.push_back(std::move(point));
        if (j + 1 == breakpoints_.size()) break;

        Atom segment;
        segment.lo = breakpoints_[j];
        segment.hi = breakpoints_[j + 1];
        segment.pattern.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            segment.pattern[i] = ef_.lower(i) <= segment.lo && segment.hi <= ef_.upper(i);
            segment.covered += segment.pattern[i];
        }
        atoms_.push_back(std::move(segment));
    }
}

double ElModel::atom_log_likelihood(const Atom& atom, double theta) const {
    const std::size_t k = ef_.size();
    switch (ef_.variant()) {
        case ElVariant::RandomEffects:
        case ElVariant::FixedSymmetry: {
            const auto v = ef_.evaluate(theta);
            return solve_dual(v, 1, Moment{0.0, 0.0}, options_).log_likelihood;
        }
        case ElVariant::FixedIndicator:
            return indicator_log_likelihood(atom.covered, k, ef_.alpha());
        case ElVariant::FixedBoth: {
            if (atom.covered == 0 || atom.covered >= k) return kNegInf;
            const auto v = ef_.evaluate_with_pattern(theta, atom.pattern);
            return solve_dual(v, 2, Moment{0.0, 0.0}, options_).log_likelihood;
        }
    }
    return kNegInf;
}

double ElModel::atom_neg2logr(const Atom& atom, double theta) const {
    const double ll = atom_log_likelihood(atom, theta);
    if (!std::isfinite(ll)) return kInf;
    return std::max(0.0, -2.0 * (ll - log_lik_max_));
}

double ElModel::atom_upper_bound(const Atom& atom) const {
    switch (ef_.variant()) {
        case ElVariant::FixedIndicator:
        case ElVariant::FixedBoth:
            return indicator_log_likelihood(atom.covered, ef_.size(), ef_.alpha());
        default:
            return -static_cast<double>(ef_.size()) * std::log(static_cast<double>(ef_.size()));
    }
}

ElModel::SegmentOptimum ElModel::maximize_atom(const Atom& atom) const {
    if (atom.point) return {atom.lo, atom_log_likelihood(atom, atom.lo)};

    const std::size_t k = ef_.size();
    switch (ef_.variant()) {
        case ElVariant::RandomEffects:
        case ElVariant::FixedSymmetry:
            return {theta_hat_, atom_log_likelihood(atom, theta_hat_)};
        case ElVariant::FixedIndicator:
            return {0.5 * (atom.lo + atom.hi), atom_upper_bound(atom)};
        case ElVariant::FixedBoth:
            break;
    }
    if (atom.covered == 0 || atom.covered >= k) return {0.5 * (atom.lo + atom.hi), kNegInf};

    // Without the symmetry constraint the optimal weights are (1-a)/m on covering studies and
    // a/(K-m) elsewhere; the theta solving the symmetry equation under those weights attains
    // the indicator-only bound if it falls inside the segment.
    const double m = static_cast<double>(atom.covered);
    const double w_in = (1.0 - ef_.alpha()) / m;
    const double w_out = ef_.alpha() / (static_cast<double>(k) - m);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double p = atom.pattern[i] ? w_in : w_out;
        const double width = ef_.upper(i) - ef_.lower(i);
        num += p * (ef_.upper(i) + ef_.lower(i)) / width;
        den += 2.0 * p / width;
    }
    const double theta_star = num / den;
    if (theta_star > atom.lo && theta_star < atom.hi) {
        return {theta_star, atom_upper_bound(atom)};
    }
    // Quasi-concave on the segment with its peak outside: search toward the peak's side.
    const bool prefer_right = theta_star >= atom.hi;
    const double tol = 1e-11 * (1.0 + std::fabs(atom.lo) + std::fabs(atom.hi));
    const auto f = [&](double t) { return atom_log_likelihood(atom, t); };
    SegmentOptimum best;
    std::tie(best.theta, best.log_likelihood) = golden_section_max(f, atom.lo, atom.hi, tol, prefer_right);
    // The segment is open and its supremum may be approached at an end, which the search
    // only reaches to within its tolerance.
    const double edge = prefer_right ? std::nextafter(atom.hi, atom.lo) : std::nextafter(atom.lo, atom.hi);
    const double at_edge = f(edge);
    if (at_edge > best.log_likelihood) best = {edge, at_edge};
    return best;
}

void ElModel::compute_profile() {
    const std::size_t k = ef_.size();
    const double kd = static_cast<double>(k);

    switch (ef_.variant()) {
        case ElVariant::RandomEffects:
        case ElVariant::FixedSymmetry: {
            // Equal weights satisfy sum_i W_i(theta) = 0 at the weighted midpoint mean.
            double num = 0.0;
            double den = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                const double width = ef_.upper(i) - ef_.lower(i);
                num += (ef_.lower(i) + ef_.upper(i)) / width;
                den += 1.0 / width;
            }
            theta_hat_ = num / (2.0 * den);
            log_lik_max_ = -kd * std::log(kd);
            return;
        }
        case ElVariant::FixedIndicator: {
            double best = kNegInf;
            for (const auto& a : atoms_) best = std::max(best, atom_upper_bound(a));
            if (!std::isfinite(best)) {
                throw Error(ErrorCode::NoFeasibleTheta,
                            "EL1: no theta is covered by between 1 and K-1 intervals");
            }
            // Maximal runs of adjacent atoms attaining the maximum; take the widest run
            // (leftmost on ties) and report its midpoint.
            double best_width = -1.0;
            for (std::size_t i = 0; i < atoms_.size();) {
                if (atom_upper_bound(atoms_[i]) != best) {
                    ++i;
                    continue;
                }
                std::size_t j = i;
                while (j + 1 < atoms_.size() && atom_upper_bound(atoms_[j + 1]) == best) ++j;
                const double width = atoms_[j].hi - atoms_[i].lo;
                if (width > best_width) {
                    best_width = width;
                    theta_hat_ = 0.5 * (atoms_[i].lo + atoms_[j].hi);
                }
                i = j + 1;
            }
            log_lik_max_ = best;
            return;
        }
        case ElVariant::FixedBoth:
            break;
    }

    // Branch and bound over atoms: the indicator-only likelihood bounds each atom from above.
    std::vector<std::size_t> order(atoms_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> bound(atoms_.size());
    for (std::size_t i = 0; i < atoms_.size(); ++i) bound[i] = atom_upper_bound(atoms_[i]);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return bound[a] > bound[b]; });

    double best = kNegInf;
    double best_theta = 0.0;
    for (std::size_t idx : order) {
        if (!std::isfinite(bound[idx]) || bound[idx] < best) break;
        const auto opt = maximize_atom(atoms_[idx]);
        if (opt.log_likelihood > best) {
            best = opt.log_likelihood;
            best_theta = opt.theta;
        }
    }
    if (!std::isfinite(best)) {
        throw Error(ErrorCode::NoFeasibleTheta,
                    "EL3: no theta satisfies both the coverage and symmetry constraints");
    }
    theta_hat_ = best_theta;
    log_lik_max_ = best;
}

std::size_t ElModel::atom_containing(double theta) const {
    if (breakpoints_.empty()) return 0;
    const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), theta);
    const auto j = static_cast<std::size_t>(it - breakpoints_.begin());
    if (it != breakpoints_.end() && *it == theta) return 2 * j;
    if (j == 0) return 0;
    if (j == breakpoints_.size()) return atoms_.size() - 1;
    return 2 * j - 1;
}

double ElModel::log_likelihood(double theta) const {
    const std::size_t k = ef_.size();
    switch (ef_.variant()) {
        case ElVariant::RandomEffects:
        case ElVariant::FixedSymmetry:
            return atom_log_likelihood(atoms_.front(), theta);
        case ElVariant::FixedIndicator: {
            std::size_t m = 0;
            for (std::size_t i = 0; i < k; ++i) m += ef_.covers(i, theta);
            return indicator_log_likelihood(m, k, ef_.alpha());
        }
        case ElVariant::FixedBoth: {
            const auto v = ef_.evaluate(theta);
            return solve_dual(v, 2, Moment{0.0, 0.0}, options_).log_likelihood;
        }
    }
    return kNegInf;
}

ElEvaluation ElModel::evaluate(double theta) const {
    ElEvaluation out;
    out.theta = theta;
    const std::size_t k = ef_.size();
    if (ef_.variant() == ElVariant::FixedIndicator) {
        std::size_t m = 0;
        for (std::size_t i = 0; i < k; ++i) m += ef_.covers(i, theta);
        out.log_likelihood = indicator_log_likelihood(m, k, ef_.alpha());
        out.feasible = std::isfinite(out.log_likelihood);
        if (out.feasible) {
            const double a = ef_.alpha();
            const double w_in = (1.0 - a) / static_cast<double>(m);
            const double w_out = a / static_cast<double>(k - m);
            out.weights.resize(k);
            for (std::size_t i = 0; i < k; ++i) out.weights[i] = ef_.covers(i, theta) ? w_in : w_out;
            // p_i = 1/(K(1 + lambda v_i)) with v_i = a on covering studies.
            out.lambda = {(1.0 / (static_cast<double>(k) * w_in) - 1.0) / a, 0.0};
        }
    } else {
        const auto v = ef_.evaluate(theta);
        auto sol = solve_dual(v, ef_.dimension(), Moment{0.0, 0.0}, options_);
        out.log_likelihood = sol.log_likelihood;
        out.feasible = sol.feasible;
        out.lambda = sol.lambda;
        out.weights = std::move(sol.weights);
        out.iterations = sol.iterations;
    }
    out.neg2logr = out.feasible ? std::max(0.0, -2.0 * (out.log_likelihood - log_lik_max_)) : kInf;
    return out;
}

double ElModel::bisect(const Atom& atom, double inside, double outside, double threshold,
                       int& evaluations) const {
    const double tol = 1e-9 * (1.0 + std::fabs(theta_hat_));
    while (std::fabs(outside - inside) > tol) {
        const double mid = 0.5 * (inside + outside);
        if (mid == inside || mid == outside) break;
        ++evaluations;
        if (atom_neg2logr(atom, mid) <= threshold) inside = mid; else outside = mid;
    }
    return 0.5 * (inside + outside);
}

double ElModel::walk(double threshold, int direction, int& evaluations) const {
    std::size_t i = atom_containing(theta_hat_);
    double pos = theta_hat_;
    const auto at_end = [&](std::size_t idx) {
        return direction > 0 ? idx + 1 == atoms_.size() : idx == 0;
    };
    for (;;) {
        const Atom& atom = atoms_[i];
        if (atom.point) {
            ++evaluations;
            if (atom_neg2logr(atom, atom.lo) > threshold) return atom.lo;
            if (at_end(i)) return atom.lo;
            const Atom& next = atoms_[direction > 0 ? i + 1 : i - 1];
            ++evaluations;
            if (atom_neg2logr(next, atom.lo) > threshold) return atom.lo;
            pos = atom.lo;
            i = direction > 0 ? i + 1 : i - 1;
            continue;
        }
        const double edge = direction > 0 ? atom.hi : atom.lo;
        ++evaluations;
        if (atom_neg2logr(atom, edge) > threshold) {
            return bisect(atom, pos, edge, threshold, evaluations);
        }
        if (at_end(i)) return edge;
        pos = edge;
        i = direction > 0 ? i + 1 : i - 1;
    }
}

std::vector<ClosedInterval> ElModel::level_set(double threshold) const {
    int evaluations = 0;
    return level_set(threshold, evaluations);
}

std::vector<ClosedInterval> ElModel::level_set(double threshold, int& evaluations) const {
    std::vector<ClosedInterval> pieces;
    for (const auto& atom : atoms_) {
        if (atom.point) {
            ++evaluations;
            if (atom_neg2logr(atom, atom.lo) <= threshold) pieces.push_back({atom.lo, atom.lo});
            continue;
        }
        if (atom_upper_bound(atom) < log_lik_max_ - 0.5 * threshold) continue;
        const auto opt = maximize_atom(atom);
        if (!std::isfinite(opt.log_likelihood) ||
            std::max(0.0, -2.0 * (opt.log_likelihood - log_lik_max_)) > threshold) {
            continue;
        }
        evaluations += 2;
        const double left = atom_neg2logr(atom, atom.lo) <= threshold
                                ? atom.lo
                                : bisect(atom, opt.theta, atom.lo, threshold, evaluations);
        const double right = atom_neg2logr(atom, atom.hi) <= threshold
                                 ? atom.hi
                                 : bisect(atom, opt.theta, atom.hi, threshold, evaluations);
        pieces.push_back({left, right});
    }
    std::vector<ClosedInterval> merged;
    for (const auto& p : pieces) {
        if (!merged.empty() && p.lower <= merged.back().upper) {
            merged.back().upper = std::max(merged.back().upper, p.upper);
        } else {
            merged.push_back(p);
        }
    }
    return merged;
}

ClosedInterval ElModel::feasible_range() const {
    double lo = kInf;
    double hi = kNegInf;
    for (const auto& atom : atoms_) {
        if (!std::isfinite(atom_upper_bound(atom))) continue;
        if (ef_.variant() == ElVariant::FixedBoth &&
            !std::isfinite(maximize_atom(atom).log_likelihood)) {
            continue;
        }
        lo = std::min(lo, atom.lo);
        hi = std::max(hi, atom.hi);
    }
    return {lo, hi};
}

AnalysisResult ElModel::confidence_interval(double beta) const {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw Error(ErrorCode::BadArgument, "beta must lie in (0, 1)");
    }
    const double threshold = dist::chi_square_quantile(1.0 - beta, ef_.dimension());
    int evaluations = 0;

    AnalysisResult r;
    r.method = method_of(ef_.variant());
    r.estimate = theta_hat_;
    r.ci_level = 1.0 - beta;
    bool located = false;
    if (!breakpoints_.empty()) {
        // The reported interval is the component of the level set holding the estimate, so
        // both share the same endpoints bit for bit.
        r.level_set = level_set(threshold, evaluations);
        for (const auto& piece : r.level_set) {
            if (piece.lower <= theta_hat_ && theta_hat_ <= piece.upper) {
                r.ci_lower = piece.lower;
                r.ci_upper = piece.upper;
                located = true;
                break;
            }
        }
    }
    if (!located) {
        r.ci_lower = walk(threshold, -1, evaluations);
        r.ci_upper = walk(threshold, +1, evaluations);
    }

    const ClosedInterval feasible = feasible_range();
    r.diagnostics["threshold"] = threshold;
    r.diagnostics["max_log_likelihood"] = log_lik_max_;
    r.diagnostics["evaluations"] = evaluations;
    r.diagnostics["feasible_lower"] = feasible.lower;
    r.diagnostics["feasible_upper"] = feasible.upper;
    r.diagnostics["estimating_dimension"] = ef_.dimension();
    if (!breakpoints_.empty()) {
        r.diagnostics["level_set_pieces"] = static_cast<double>(r.level_set.size());
        r.diagnostics["disconnected"] = r.level_set.size() > 1 ? 1.0 : 0.0;
    }
    return r;
}

}  // namespace elmeta
