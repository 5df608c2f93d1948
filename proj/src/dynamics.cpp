#include "platoon/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace platoon {

namespace {

// Speeds are projected to at least v_min_open + this margin.
constexpr double kSpeedFloorMargin = 1e-6;

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

bool is_integer_multiple(double value, double unit) {
    const double ratio = value / unit;
    return std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio);
}

double uniform(std::mt19937_64& gen, double lo, double hi) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

double speed_floor(const Limits& l) { return l.v_min_open + kSpeedFloorMargin; }

// Zeroes an acceleration that would push the speed out of the box.
double respect_speed_box(double u, double v, const Limits& l, bool& saturated) {
    if ((v >= l.v_max && u > 0.0) || (v <= speed_floor(l) && u < 0.0)) {
        saturated = true;
        return 0.0;
    }
    return u;
}

}  // namespace

double LeaderSchedule::desired_speed(double t) const noexcept {
    double v = v_initial;
    for (const auto& seg : segments) {
        if (t >= seg.start) v = seg.v_bar;
        else break;
    }
    return v;
}

void LeaderSchedule::validate(double v_max) const {
    require(v_initial > 0.0 && v_initial <= v_max, "schedule.v_initial: must lie in (0, v_max]");
    require(gain > 0.0, "schedule.gain: must be > 0");
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const auto& seg = segments[k];
        require(seg.v_bar > 0.0 && seg.v_bar <= v_max,
                "schedule.segments[" + std::to_string(k) + "]: speed must lie in (0, v_max]");
        require(k == 0 || segments[k - 1].start <= seg.start,
                "schedule.segments: start times must be sorted");
    }
}

void Limits::validate() const {
    require(v_max > 0.0, "limits.v_max: must be > 0");
    require(a_max > 0.0, "limits.a_max: must be > 0");
    require(v_min_open >= 0.0 && v_min_open < v_max, "limits.v_min_open: must lie in [0, v_max)");
}

void Scenario::validate() const {
    params.validate();
    limits.validate();
    schedule.validate(limits.v_max);
    require(h > 0.0, "integrator.h: must be > 0");
    require(t_end > 0.0, "integrator.t_end: must be > 0");
    require(output_interval > 0.0, "integrator.output_interval: must be > 0");
    require(is_integer_multiple(output_interval, h),
            "integrator.output_interval: must be a multiple of h");
    require(is_integer_multiple(t_end, h), "integrator.t_end: must be a multiple of h");
    require(ic_radius.dp >= 0.0 && ic_radius.dv >= 0.0, "platoon.ic_radius: must be >= 0");
    for (std::size_t k = 0; k < pulses.size(); ++k) {
        const auto tag = "pulses[" + std::to_string(k) + "]";
        require(pulses[k].duration > 0.0, tag + ".duration: must be > 0");
        require(pulses[k].target <= n_followers, tag + ".target: no such vehicle");
    }
    if (initial_state) {
        require(initial_state->followers.size() == n_followers + 1,
                "initial_state: expected N+1 pairs");
    }
}

PlatoonState initial_platoon(const Scenario& s) {
    if (s.initial_state) return *s.initial_state;
    std::mt19937_64 gen(s.seed ^ static_cast<std::uint64_t>(s.n_followers));
    PlatoonState x;
    x.leader = {0.0, s.schedule.v_initial};
    x.followers.reserve(s.n_followers + 1);
    for (std::size_t i = 0; i <= s.n_followers; ++i) {
        const double dp = -s.params.dp_bar + uniform(gen, -s.ic_radius.dp, s.ic_radius.dp);
        const double dv = uniform(gen, -s.ic_radius.dv, s.ic_radius.dv);
        x.followers.push_back({dp, dv, 0.0, 0.0});
    }
    return x;
}

ClosedLoopInputs evaluate_inputs(const PlatoonState& x, double t, const Scenario& s) {
    const std::size_t n = x.followers.size();
    const auto& p = s.params;
    const auto& lim = s.limits;

    std::vector<double> dp(n), dv(n);
    for (std::size_t i = 0; i < n; ++i) {
        dp[i] = x.followers[i].dp;
        dv[i] = x.followers[i].dv;
    }

    std::vector<double> disturbance(n, 0.0);
    std::vector<bool> macro_available(n, true);
    for (const auto& pulse : s.pulses) {
        if (!pulse.active(t)) continue;
        if (pulse.target < n) disturbance[pulse.target] += pulse.amplitude;
        if (pulse.suppress_macro_for && *pulse.suppress_macro_for < n) {
            macro_available[*pulse.suppress_macro_for] = false;
        }
    }

    ClosedLoopInputs out;
    out.vehicles.resize(n);

    bool leader_box = false;
    const double leader_cmd = s.schedule.gain * (s.schedule.desired_speed(t) - x.leader.v);
    out.u_leader = respect_speed_box(saturate(leader_cmd, lim.a_max).value, x.leader.v, lim,
                                     leader_box);

    double u_prev = out.u_leader;
    double v_abs = x.leader.v;
    for (std::size_t i = 0; i < n; ++i) {
        v_abs += dv[i];
        LeaderFeed feed;
        feed.u_prev = u_prev;
        feed.available = macro_available[i];
        if (i > 0) {
            const auto m = macro_signals(dp, dv, p.dp_bar, p.weights, i - 1);
            feed.psi_dp_prev = m.psi_dp;
            feed.psi_dv_prev = m.psi_dv;
        }

        auto& vi = out.vehicles[i];
        vi.u_ctrl = control_input(x.followers[i], feed, p);
        const auto commanded = saturate(vi.u_ctrl, lim.a_max);
        vi.u_comm = commanded.value;
        const auto applied = saturate(vi.u_ctrl + disturbance[i], lim.a_max);
        vi.saturated = applied.clamped;
        vi.u_app = respect_speed_box(applied.value, v_abs, lim, vi.saturated);
        vi.psi_dp_prev = feed.effective_psi_dp();
        vi.psi_dv_prev = feed.effective_psi_dv();
        u_prev = vi.u_comm;
    }
    return out;
}

PlatoonState closed_loop_derivative(const PlatoonState& x, double t, const Scenario& s) {
    if (x.followers.size() != s.n_followers + 1) {
        throw std::invalid_argument("closed_loop_derivative: state has " +
                                    std::to_string(x.followers.size()) + " pairs, scenario expects " +
                                    std::to_string(s.n_followers + 1));
    }
    const auto in = evaluate_inputs(x, t, s);
    PlatoonState d;
    d.leader = {x.leader.v, in.u_leader};
    d.followers.resize(x.followers.size());
    double u_ahead = in.u_leader;
    for (std::size_t i = 0; i < x.followers.size(); ++i) {
        const auto& xi = x.followers[i];
        const auto& vi = in.vehicles[i];
        const auto [r1, r2] =
            rho_derivative(xi.rho1, xi.rho2, vi.psi_dp_prev, vi.psi_dv_prev, s.params.weights);
        d.followers[i] = {xi.dv, vi.u_app - u_ahead, r1, r2};
        u_ahead = vi.u_app;
    }
    return d;
}

std::vector<double> rk4_step(std::span<const double> y, double t, double h, const DerivativeFn& f) {
    const std::size_t n = y.size();
    std::vector<double> tmp(n);
    auto shifted = [&](const std::vector<double>& k, double scale) {
        for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + scale * k[j];
        return std::span<const double>(tmp);
    };
    const auto k1 = f(t, y);
    const auto k2 = f(t + 0.5 * h, shifted(k1, 0.5 * h));
    const auto k3 = f(t + 0.5 * h, shifted(k2, 0.5 * h));
    const auto k4 = f(t + h, shifted(k3, h));
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    return out;
}

std::vector<double> pack(const PlatoonState& x) {
    std::vector<double> y;
    y.reserve(2 + 4 * x.followers.size());
    y.push_back(x.leader.p);
    y.push_back(x.leader.v);
    for (const auto& f : x.followers) {
        y.insert(y.end(), {f.dp, f.dv, f.rho1, f.rho2});
    }
    return y;
}

PlatoonState unpack(std::span<const double> y) {
    if (y.size() < 2 || (y.size() - 2) % 4 != 0) {
        throw std::invalid_argument("unpack: flat state has invalid length " +
                                    std::to_string(y.size()));
    }
    PlatoonState x;
    x.leader = {y[0], y[1]};
    x.followers.reserve((y.size() - 2) / 4);
    for (std::size_t k = 2; k < y.size(); k += 4) {
        x.followers.push_back({y[k], y[k + 1], y[k + 2], y[k + 3]});
    }
    return x;
}

PlatoonState step(const PlatoonState& x, double t, const Scenario& s) {
    const DerivativeFn f = [&s](double tt, std::span<const double> y) {
        return pack(closed_loop_derivative(unpack(y), tt, s));
    };
    auto next = unpack(rk4_step(pack(x), t, s.h, f));

    const double lo = speed_floor(s.limits);
    const double hi = s.limits.v_max;
    double v_ahead_old = next.leader.v;
    next.leader.v = std::clamp(next.leader.v, lo, hi);
    double v_ahead_new = next.leader.v;
    for (auto& f : next.followers) {
        const double v_old = v_ahead_old + f.dv;
        const double v_new = std::clamp(v_old, lo, hi);
        f.dv = v_new - v_ahead_new;
        v_ahead_old = v_old;
        v_ahead_new = v_new;
    }
    return next;
}

namespace {

Sample record(const PlatoonState& x, double t, const Scenario& s) {
    const auto in = evaluate_inputs(x, t, s);
    Sample smp;
    smp.t = t;
    smp.leader = x.leader;
    smp.u_leader = in.u_leader;
    smp.vehicles.reserve(x.followers.size());
    VehicleState ahead = x.leader;
    for (std::size_t i = 0; i < x.followers.size(); ++i) {
        const auto& f = x.followers[i];
        const auto& vi = in.vehicles[i];
        ahead = {ahead.p + f.dp, ahead.v + f.dv};
        smp.vehicles.push_back({ahead.p, ahead.v, vi.u_ctrl, vi.u_app, f.dp, f.dv, f.rho1, f.rho2,
                                vi.psi_dp_prev, vi.psi_dv_prev, vi.saturated});
    }
    return smp;
}

}  // namespace

Trajectory simulate(const Scenario& s) {
    s.validate();
    const auto steps = static_cast<std::size_t>(std::llround(s.t_end / s.h));
    const auto decimation = static_cast<std::size_t>(std::llround(s.output_interval / s.h));

    Trajectory traj;
    traj.h = s.h;
    traj.output_interval = s.output_interval;
    traj.params = s.params;
    traj.samples.reserve(steps / decimation + 1);

    auto x = initial_platoon(s);
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * s.h;
        if (k % decimation == 0) traj.samples.push_back(record(x, t, s));
        if (k == steps) break;
        x = step(x, t, s);
    }
    return traj;
}

}  // namespace platoon
