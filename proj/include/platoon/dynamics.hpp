#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "platoon/controller.hpp"
#include "platoon/core.hpp"

namespace platoon {

struct SpeedSegment {
    double start = 0.0;  // s
    double v_bar = 0.0;  // m/s
};

/// Piecewise-constant desired speed of the virtual leader, tracked by a saturated
/// proportional law u = sat(gain * (v_bar(t) - v)).
struct LeaderSchedule {
    double v_initial = 14.0;
    std::vector<SpeedSegment> segments;  // sorted by start
    double gain = 2.0;                   // 1/s

    [[nodiscard]] double desired_speed(double t) const noexcept;
    void validate(double v_max) const;
};

/// Exogenous acceleration added to one vehicle over [t_on, t_on + duration).
/// The disturbance is not communicated to the follower. Optionally the macroscopic
/// feed to one vehicle is cut for the same window.
struct DisturbancePulse {
    std::size_t target = 0;
    double t_on = 0.0;
    double duration = 0.0;
    double amplitude = 0.0;
    std::optional<std::size_t> suppress_macro_for;

    [[nodiscard]] bool active(double t) const noexcept { return t >= t_on && t < t_on + duration; }
};

struct Limits {
    double v_max = 36.0;  // m/s
    double a_max = 4.0;   // m/s^2
    double v_min_open = 0.0;  // speeds stay strictly above this

    void validate() const;
};

struct InitialConditionRadius {
    double dp = 2.0;  // m
    double dv = 1.0;  // m/s
};

struct Scenario {
    std::size_t n_followers = 10;
    ControllerParams params;
    LeaderSchedule schedule;
    std::vector<DisturbancePulse> pulses;
    Limits limits;
    double h = 0.01;                // s
    double t_end = 60.0;            // s
    double output_interval = 0.1;   // s, a multiple of h
    std::uint64_t seed = 1;
    InitialConditionRadius ic_radius;
    /// Overrides the random initial condition when set.
    std::optional<PlatoonState> initial_state;

    /// Throws std::invalid_argument with a "field: reason" message.
    void validate() const;
};

/// Draws the initial platoon from the scenario seed stream (seed xor N). Controller
/// states start at zero; the leader starts at position 0 with the initial desired speed.
[[nodiscard]] PlatoonState initial_platoon(const Scenario& s);

/// Per-vehicle quantities of one closed-loop evaluation.
struct VehicleInputs {
    double u_ctrl = 0.0;       // control law output
    double u_comm = 0.0;       // acceleration communicated to the follower
    double u_app = 0.0;        // applied acceleration
    double psi_dp_prev = 0.0;  // macroscopic feed actually used
    double psi_dv_prev = 0.0;
    bool saturated = false;    // acceleration or speed box active
};

struct ClosedLoopInputs {
    double u_leader = 0.0;
    std::vector<VehicleInputs> vehicles;
};

/// Evaluates leader law, macroscopic feed, control law, disturbances and saturation.
[[nodiscard]] ClosedLoopInputs evaluate_inputs(const PlatoonState& x, double t, const Scenario& s);

/// Time derivative of the lumped state. Leader entry holds (p', v'); each follower entry
/// holds (dp', dv', rho1', rho2'). Throws std::invalid_argument on a size mismatch.
[[nodiscard]] PlatoonState closed_loop_derivative(const PlatoonState& x, double t,
                                                  const Scenario& s);

/// One classical Runge-Kutta step of y' = f(t, y).
using DerivativeFn = std::function<std::vector<double>(double, std::span<const double>)>;
[[nodiscard]] std::vector<double> rk4_step(std::span<const double> y, double t, double h,
                                           const DerivativeFn& f);

/// Flat layout used by the integrator: leader (p, v) then (dp, dv, rho1, rho2) per pair.
[[nodiscard]] std::vector<double> pack(const PlatoonState& x);
[[nodiscard]] PlatoonState unpack(std::span<const double> y);

/// RK4 step of the closed loop followed by projection of every speed onto (v_min, v_max].
[[nodiscard]] PlatoonState step(const PlatoonState& x, double t, const Scenario& s);

struct VehicleSample {
    double p = 0.0, v = 0.0;
    double u_ctrl = 0.0, u_app = 0.0;
    double dp = 0.0, dv = 0.0, rho1 = 0.0, rho2 = 0.0;
    double psi_dp_prev = 0.0, psi_dv_prev = 0.0;
    bool saturated = false;

    [[nodiscard]] ExtendedState extended() const noexcept { return {dp, dv, rho1, rho2}; }
};

struct Sample {
    double t = 0.0;
    VehicleState leader;
    double u_leader = 0.0;
    std::vector<VehicleSample> vehicles;
};

struct Trajectory {
    double h = 0.0;
    double output_interval = 0.0;
    ControllerParams params;
    std::vector<Sample> samples;

    [[nodiscard]] std::size_t n_vehicles() const noexcept {
        return samples.empty() ? 0 : samples.front().vehicles.size();
    }
};

[[nodiscard]] Trajectory simulate(const Scenario& s);

}  // namespace platoon
