#include "cmi/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cmi/error.hpp"
#include "cmi/nn.hpp"

namespace cmi {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.empty() || b.empty()) throw InputError(std::string(what) + ": batches must be non-empty");
    if (a.size() != b.size()) throw InputError(std::string(what) + ": joint and product batches differ in size");
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(a.begin(), a.end(), finite) || !std::all_of(b.begin(), b.end(), finite))
        throw InputError(std::string(what) + ": non-finite input");
}

double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double clamp_omega(double omega) { return std::clamp(omega, nn::kOmegaClamp, 1.0 - nn::kOmegaClamp); }

double log_lambda(double omega) {
    const double w = clamp_omega(omega);
    return std::log(w) - std::log1p(-w);
}

}  // namespace

double lambda_ratio(double omega) {
    const double w = clamp_omega(omega);
    return w / (1.0 - w);
}

double f_star(double omega) { return 1.0 + log_lambda(omega); }

double estimate_dv(std::span<const double> f_joint, std::span<const double> f_prod) {
    check_pair(f_joint, f_prod, "DV estimate");
    const double shift = *std::max_element(f_prod.begin(), f_prod.end());
    double acc = 0.0;
    for (double f : f_prod) acc += std::exp(f - shift);
    const double log_mean_exp = shift + std::log(acc / static_cast<double>(f_prod.size()));
    const double value = mean(f_joint) - log_mean_exp;
    if (!std::isfinite(value)) throw NumericalError("DV estimate overflowed");
    return value;
}

double estimate_nwj(std::span<const double> omega_joint, std::span<const double> omega_prod) {
    check_pair(omega_joint, omega_prod, "NWJ estimate");
    double log_sum = 0.0, ratio_sum = 0.0;
    for (double w : omega_joint) log_sum += log_lambda(w);
    for (double w : omega_prod) ratio_sum += lambda_ratio(w);
    const double b = static_cast<double>(omega_joint.size());
    return 1.0 + log_sum / b - ratio_sum / b;
}

double estimate_dv_from_omega(std::span<const double> omega_joint, std::span<const double> omega_prod) {
    check_pair(omega_joint, omega_prod, "DV estimate");
    std::vector<double> fj(omega_joint.size()), fp(omega_prod.size());
    std::transform(omega_joint.begin(), omega_joint.end(), fj.begin(), f_star);
    std::transform(omega_prod.begin(), omega_prod.end(), fp.begin(), f_star);
    return estimate_dv(fj, fp);
}

double estimate_nwj_from_log_ratio(std::span<const double> log_ratio_joint, std::span<const double> log_ratio_prod) {
    check_pair(log_ratio_joint, log_ratio_prod, "NWJ estimate");
    double ratio_sum = 0.0;
    for (double r : log_ratio_prod) ratio_sum += std::exp(r);
    const double value = 1.0 + mean(log_ratio_joint) - ratio_sum / static_cast<double>(log_ratio_prod.size());
    if (!std::isfinite(value)) throw NumericalError("NWJ estimate overflowed");
    return value;
}

double estimate_dv_from_log_ratio(std::span<const double> log_ratio_joint, std::span<const double> log_ratio_prod) {
    check_pair(log_ratio_joint, log_ratio_prod, "DV estimate");
    std::vector<double> fj(log_ratio_joint.size()), fp(log_ratio_prod.size());
    std::transform(log_ratio_joint.begin(), log_ratio_joint.end(), fj.begin(), [](double r) { return 1.0 + r; });
    std::transform(log_ratio_prod.begin(), log_ratio_prod.end(), fp.begin(), [](double r) { return 1.0 + r; });
    return estimate_dv(fj, fp);
}

}  // namespace cmi
