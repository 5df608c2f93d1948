#pragma once

#include "platoon/core.hpp"
#include "platoon/macro.hpp"

namespace platoon {

/// Gains shared by every vehicle plus the macroscopic weights and the desired spacing.
struct ControllerParams {
    double k_dp = 1.0;  // 1/s^2
    double k_dv = 2.0;  // 1/s
    MacroWeights weights;
    double dp_bar = 10.0;  // m
    double upsilon = 0.9;  // ISS margin split, (0, 1); used only by the certificate

    void validate() const;

    [[nodiscard]] Equilibrium equilibrium() const { return Equilibrium::at_spacing(dp_bar); }
};

/// What vehicle i receives about its predecessor.
struct LeaderFeed {
    double u_prev = 0.0;       // communicated acceleration of vehicle i-1
    double psi_dp_prev = 0.0;  // psi over vehicles 0..i-1
    double psi_dv_prev = 0.0;
    bool available = true;  // macroscopic information reaches the vehicle

    [[nodiscard]] double effective_psi_dp() const noexcept { return available ? psi_dp_prev : 0.0; }
    [[nodiscard]] double effective_psi_dv() const noexcept { return available ? psi_dv_prev : 0.0; }
};

/// Desired (negative) spacing, -dp_bar - rho1.
[[nodiscard]] constexpr double spacing_reference(double rho1, double dp_bar) noexcept {
    return -dp_bar - rho1;
}

/// Virtual speed-difference reference produced by the first backstepping step.
[[nodiscard]] double velocity_reference(const ExtendedState& x, const ControllerParams& p) noexcept;

/// Mesoscopic backstepping law (compact form).
[[nodiscard]] double control_input(const ExtendedState& x, const LeaderFeed& feed,
                                   const ControllerParams& p) noexcept;

/// Same law with every reference substituted out. Kept as an algebraic cross-check.
[[nodiscard]] double control_input_expanded(const ExtendedState& x, const LeaderFeed& feed,
                                            const ControllerParams& p) noexcept;

struct Saturated {
    double value = 0.0;
    bool clamped = false;
};

[[nodiscard]] Saturated saturate(double u, double a_max) noexcept;

}  // namespace platoon
