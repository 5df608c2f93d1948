#pragma once

#include <span>
#include <utility>

namespace platoon {

/// Weights of the macroscopic functions and of the rho filter.
struct MacroWeights {
    double gamma_dp = 0.5;  // > 0
    double gamma_dv = 0.5;  // > 0
    double a = 0.2;         // 1/s^2, >= 0
    double b = 1.0;         // 1/s, >= 0
    double lambda1 = 1.5;   // 1/s, > 0
    double lambda2 = 1.5;   // 1/s, > 0

    /// Throws std::invalid_argument naming the first offending field.
    void validate() const;
};

struct PrefixStats {
    double mean = 0.0;
    double variance = 0.0;
};

/// Macroscopic signals computed over vehicles 0..i.
struct MacroSignals {
    double psi_dp = 0.0;
    double psi_dv = 0.0;
    PrefixStats dp;
    PrefixStats dv;
};

/// Population mean and variance over values[0..upto], divisor upto+1.
/// Two-pass; a negative variance from rounding is clamped to 0.
/// Throws std::out_of_range when upto >= values.size().
[[nodiscard]] PrefixStats prefix_mean_variance(std::span<const double> values, std::size_t upto);

/// Three-valued sign with sign(0) = 0.
[[nodiscard]] constexpr int sign(double y) noexcept { return (y > 0.0) - (y < 0.0); }

/// Spacing macroscopic function over vehicles 0..i. Pass i = -1 for the head vehicle's
/// (empty) prefix, which yields 0.
[[nodiscard]] double psi_dp(std::span<const double> dp, double dp_bar, const MacroWeights& w, long i);

/// Speed-error macroscopic function over vehicles 0..i; i = -1 yields 0.
[[nodiscard]] double psi_dv(std::span<const double> dv, const MacroWeights& w, long i);

/// Both macroscopic functions and their prefix statistics for vehicles 0..i (i >= 0).
[[nodiscard]] MacroSignals macro_signals(std::span<const double> dp, std::span<const double> dv,
                                         double dp_bar, const MacroWeights& w, std::size_t i);

/// Time derivative of the rho filter driven by the predecessor's macroscopic signals.
[[nodiscard]] std::pair<double, double> rho_derivative(double rho1, double rho2, double psi_dp_prev,
                                                       double psi_dv_prev,
                                                       const MacroWeights& w) noexcept;

}  // namespace platoon
