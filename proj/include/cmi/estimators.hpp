#pragma once

#include <span>

namespace cmi {

// Odds ratio w / (1 - w) of a clamped classifier output: the plug-in
// estimate of p(x,y,z) / (p(x|z) p(y,z)).
double lambda_ratio(double omega);

// Optimal critic 1 + ln(lambda(w)).
double f_star(double omega);

// (1/b) sum f_joint - ln((1/b) sum exp f_prod), with a max-shifted
// log-sum-exp. Throws InputError on empty/mismatched/non-finite input and
// NumericalError if the result still overflows.
double estimate_dv(std::span<const double> f_joint, std::span<const double> f_prod);

// 1 + (1/b) sum ln(lambda(w_joint)) - (1/b) sum lambda(w_prod).
double estimate_nwj(std::span<const double> omega_joint, std::span<const double> omega_prod);

// estimate_dv evaluated at f = f_star(w).
double estimate_dv_from_omega(std::span<const double> omega_joint, std::span<const double> omega_prod);

// Same estimators with the critic given as a log density ratio r, i.e.
// f = 1 + r. Lets exact ratios bypass the odds clamp.
double estimate_nwj_from_log_ratio(std::span<const double> log_ratio_joint, std::span<const double> log_ratio_prod);
double estimate_dv_from_log_ratio(std::span<const double> log_ratio_joint, std::span<const double> log_ratio_prod);

}  // namespace cmi
