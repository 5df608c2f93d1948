#include "platoon/macro.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace platoon {

void MacroWeights::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("macro weights: ") + what);
    };
    require(gamma_dp > 0.0, "gamma_dp must be > 0");
    require(gamma_dv > 0.0, "gamma_dv must be > 0");
    require(a >= 0.0, "a must be >= 0");
    require(b >= 0.0, "b must be >= 0");
    require(lambda1 > 0.0, "lambda1 must be > 0");
    require(lambda2 > 0.0, "lambda2 must be > 0");
}

PrefixStats prefix_mean_variance(std::span<const double> values, std::size_t upto) {
    if (upto >= values.size()) {
        throw std::out_of_range("prefix index " + std::to_string(upto) + " out of range for " +
                                std::to_string(values.size()) + " values");
    }
    const double n = static_cast<double>(upto + 1);
    double sum = 0.0;
    for (std::size_t j = 0; j <= upto; ++j) sum += values[j];
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t j = 0; j <= upto; ++j) {
        const double e = values[j] - mean;
        ss += e * e;
    }
    return {mean, std::max(ss / n, 0.0)};
}

namespace {

double signed_spread(double gamma, double sign_arg, double variance) {
    return gamma * sign(sign_arg) * std::sqrt(variance);
}

}  // namespace

double psi_dp(std::span<const double> dp, double dp_bar, const MacroWeights& w, long i) {
    if (i < 0) return 0.0;
    const auto s = prefix_mean_variance(dp, static_cast<std::size_t>(i));
    return signed_spread(w.gamma_dp, dp_bar + s.mean, s.variance);
}

double psi_dv(std::span<const double> dv, const MacroWeights& w, long i) {
    if (i < 0) return 0.0;
    const auto s = prefix_mean_variance(dv, static_cast<std::size_t>(i));
    return signed_spread(w.gamma_dv, s.mean, s.variance);
}

MacroSignals macro_signals(std::span<const double> dp, std::span<const double> dv, double dp_bar,
                           const MacroWeights& w, std::size_t i) {
    MacroSignals m;
    m.dp = prefix_mean_variance(dp, i);
    m.dv = prefix_mean_variance(dv, i);
    m.psi_dp = signed_spread(w.gamma_dp, dp_bar + m.dp.mean, m.dp.variance);
    m.psi_dv = signed_spread(w.gamma_dv, m.dv.mean, m.dv.variance);
    return m;
}

std::pair<double, double> rho_derivative(double rho1, double rho2, double psi_dp_prev,
                                         double psi_dv_prev, const MacroWeights& w) noexcept {
    return {-w.lambda1 * rho1 + rho2, -w.lambda2 * rho2 + w.a * psi_dp_prev + w.b * psi_dv_prev};
}

}  // namespace platoon
