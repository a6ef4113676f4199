#pragma once

namespace sleepassoc {

// standard normal CDF and the two-sided tail probability of a z statistic
double norm_cdf(double x);
double two_sided_p_from_z(double z);

double ln_gamma(double x);

// regularized incomplete beta I_x(a, b)
double reg_inc_beta(double a, double b, double x);

// regularized upper incomplete gamma Q(a, x)
double reg_gamma_q(double a, double x);

// two-sided p for a Student-t statistic with df degrees of freedom
double student_t_two_sided_p(double t, double df);

// chi-square upper tail
double chi2_sf(double x, double df);

}  // namespace sleepassoc
