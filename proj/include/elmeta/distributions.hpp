#pragma once

// Gaussian, Student-t and chi-square distribution functions.

namespace elmeta::dist {

double normal_pdf(double x);
double normal_cdf(double x);
/// Upper tail 1 - Phi(x), accurate for large x.
double normal_sf(double x);
double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
/// Regularized lower incomplete gamma P(a, x).
double incomplete_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x).
double incomplete_gamma_q(double a, double x);

double student_t_cdf(double x, double df);
double student_t_quantile(double p, double df);

double chi_square_pdf(double x, double df);
double chi_square_cdf(double x, double df);
double chi_square_quantile(double p, double df);

}  // namespace elmeta::dist
