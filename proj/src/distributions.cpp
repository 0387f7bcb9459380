#include "elmeta/distributions.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "elmeta/error.hpp"

namespace elmeta::dist {

namespace {

namespace bm = boost::math;

// Arguments are validated here, so Boost only ever sees valid input; overflow in the
// extreme tails saturates to infinity instead of throwing.
using Policy = bm::policies::policy<bm::policies::overflow_error<bm::policies::ignore_error>>;

const bm::normal_distribution<double, Policy> kStandardNormal;

void require_probability(double p, const char* what) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error(ErrorCode::BadArgument, std::string(what) + ": probability must lie in (0, 1)");
    }
}

void require_positive(double v, const char* what) {
    if (!(v > 0.0)) throw Error(ErrorCode::BadArgument, std::string(what) + " must be positive");
}

}  // namespace

double normal_pdf(double x) { return bm::pdf(kStandardNormal, x); }

double normal_cdf(double x) { return bm::cdf(kStandardNormal, x); }

double normal_sf(double x) { return bm::cdf(bm::complement(kStandardNormal, x)); }

double normal_quantile(double p) {
    require_probability(p, "normal_quantile");
    return bm::quantile(kStandardNormal, p);
}

double incomplete_beta(double a, double b, double x) {
    require_positive(a, "incomplete_beta: a");
    require_positive(b, "incomplete_beta: b");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return bm::ibeta(a, b, x, Policy());
}

double incomplete_gamma_p(double a, double x) {
    require_positive(a, "incomplete_gamma_p: a");
    if (x <= 0.0) return 0.0;
    return bm::gamma_p(a, x, Policy());
}

double incomplete_gamma_q(double a, double x) {
    require_positive(a, "incomplete_gamma_q: a");
    if (x <= 0.0) return 1.0;
    return bm::gamma_q(a, x, Policy());
}

double student_t_cdf(double x, double df) {
    require_positive(df, "student_t_cdf: df");
    return bm::cdf(bm::students_t_distribution<double, Policy>(df), x);
}

double student_t_quantile(double p, double df) {
    require_probability(p, "student_t_quantile");
    require_positive(df, "student_t_quantile: df");
    return bm::quantile(bm::students_t_distribution<double, Policy>(df), p);
}

double chi_square_pdf(double x, double df) {
    require_positive(df, "chi_square_pdf: df");
    if (x < 0.0) return 0.0;
    if (x == 0.0) {
        // Boost rejects the density at the origin; its limit depends on df.
        if (df < 2.0) return std::numeric_limits<double>::infinity();
        return df == 2.0 ? 0.5 : 0.0;
    }
    return bm::pdf(bm::chi_squared_distribution<double, Policy>(df), x);
}

double chi_square_cdf(double x, double df) {
    require_positive(df, "chi_square_cdf: df");
    if (x <= 0.0) return 0.0;
    return bm::cdf(bm::chi_squared_distribution<double, Policy>(df), x);
}

double chi_square_quantile(double p, double df) {
    require_probability(p, "chi_square_quantile");
    require_positive(df, "chi_square_quantile: df");
    return bm::quantile(bm::chi_squared_distribution<double, Policy>(df), p);
}

}  // namespace elmeta::dist
