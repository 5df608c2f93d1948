#pragma once

#include <array>
#include <span>
#include <vector>

namespace platoon {

/// Absolute longitudinal state of one vehicle.
struct VehicleState {
    double p = 0.0;  // m
    double v = 0.0;  // m/s
};

/// Relative state of a car-following pair, follower minus leader.
/// A follower physically behind its leader has dp < 0.
struct CarFollowingState {
    double dp = 0.0;  // m
    double dv = 0.0;  // m/s
};

/// Car-following state extended with the two macroscopic controller states.
struct ExtendedState {
    double dp = 0.0;    // m
    double dv = 0.0;    // m/s
    double rho1 = 0.0;  // m
    double rho2 = 0.0;  // m/s
};

/// Equilibrium of one extended pair: spacing -dp_bar, zero speed and controller states.
struct Equilibrium {
    double dp_eq = 0.0;

    /// Throws std::invalid_argument unless dp_bar > 0.
    static Equilibrium at_spacing(double dp_bar);

    [[nodiscard]] ExtendedState state() const noexcept { return {dp_eq, 0.0, 0.0, 0.0}; }
};

using Deviation = std::array<double, 4>;

/// Lumped platoon: the virtual leader (vehicle -1) and one extended pair per vehicle 0..N.
struct PlatoonState {
    VehicleState leader;
    std::vector<ExtendedState> followers;

    [[nodiscard]] std::size_t n_followers() const noexcept {
        return followers.empty() ? 0 : followers.size() - 1;
    }

    /// Every pair at the given equilibrium.
    static PlatoonState at_equilibrium(std::size_t n_followers, const Equilibrium& eq,
                                       VehicleState leader);
};

/// (dp - dp_eq, dv, rho1, rho2).
[[nodiscard]] Deviation deviation(const ExtendedState& x, const Equilibrium& e) noexcept;

[[nodiscard]] double norm(const Deviation& d) noexcept;

/// |deviation(x, e)|
[[nodiscard]] double deviation_norm(const ExtendedState& x, const Equilibrium& e) noexcept;

/// Element 0 pairs vehicle 0 with the leader; element i pairs vehicle i with vehicle i-1.
/// Throws std::invalid_argument("empty platoon") on an empty list.
[[nodiscard]] std::vector<CarFollowingState> absolute_to_relative(std::span<const VehicleState> states,
                                                                  const VehicleState& leader);

/// Inverse of absolute_to_relative given the leader state.
[[nodiscard]] std::vector<VehicleState> relative_to_absolute(std::span<const CarFollowingState> pairs,
                                                             const VehicleState& leader);

}  // namespace platoon
