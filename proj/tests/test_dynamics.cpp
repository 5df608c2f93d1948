#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "oracles.hpp"
#include "platoon/certify.hpp"
#include "platoon/dynamics.hpp"

using namespace platoon;

namespace {

Scenario quiescent(std::size_t n) {
    Scenario s;
    s.n_followers = n;
    s.t_end = 5.0;
    s.initial_state = PlatoonState::at_equilibrium(n, s.params.equilibrium(), {0.0, s.schedule.v_initial});
    return s;
}

double max_abs_diff(const PlatoonState& a, const PlatoonState& b) {
    const auto ya = pack(a), yb = pack(b);
    double m = 0.0;
    for (std::size_t k = 0; k < ya.size(); ++k) m = std::max(m, std::abs(ya[k] - yb[k]));
    return m;
}

}  // namespace

TEST_CASE("equilibrium is a fixed point of the closed loop") {
    const auto s = quiescent(10);
    const auto d = closed_loop_derivative(*s.initial_state, 0.0, s);
    CHECK(d.leader.p == s.schedule.v_initial);
    CHECK(d.leader.v == 0.0);
    for (const auto& f : d.followers) {
        CHECK(f.dp == 0.0);
        CHECK(f.dv == 0.0);
        CHECK(f.rho1 == 0.0);
        CHECK(f.rho2 == 0.0);
    }
}

TEST_CASE("head vehicle acceleration behind a steady leader") {
    auto s = quiescent(0);
    s.initial_state->followers[0] = {-10.0, 1.0, 0.0, 0.0};
    const auto d = closed_loop_derivative(*s.initial_state, 0.0, s);
    CHECK(d.followers[0].dv == doctest::Approx(-3.0));
    CHECK(d.followers[0].dp == 1.0);
}

TEST_CASE("macroscopic forcing enters speed and filter with opposite signs") {
    std::mt19937_64 g(21);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = quiescent(6);
        auto& x = *s.initial_state;
        const std::size_t i = 2 + g() % 5;
        for (std::size_t j = 0; j < i; ++j) {
            x.followers[j].dp += oracle::uniform(g, -0.1, 0.1);
            x.followers[j].dv += oracle::uniform(g, -0.1, 0.1);
        }
        const auto in = evaluate_inputs(x, 0.0, s);
        const auto d = closed_loop_derivative(x, 0.0, s);
        REQUIRE_FALSE(in.vehicles[i - 1].saturated);
        const double forcing =
            s.params.weights.a * in.vehicles[i].psi_dp_prev + s.params.weights.b * in.vehicles[i].psi_dv_prev;
        CHECK(d.followers[i].dp == 0.0);
        CHECK(d.followers[i].dv == doctest::Approx(-forcing).epsilon(1e-12).scale(1.0));
        CHECK(d.followers[i].rho2 == doctest::Approx(forcing).epsilon(1e-12).scale(1.0));
        CHECK(d.followers[i].rho1 == 0.0);
    }
}

TEST_CASE("vehicles only react to their predecessors") {
    std::mt19937_64 g(2);
    Scenario s = quiescent(8);
    auto x = *s.initial_state;
    for (auto& f : x.followers) f = oracle::random_state(g, s.params.dp_bar, 0.5);
    const auto d0 = closed_loop_derivative(x, 0.0, s);
    const std::size_t k = 5;
    x.followers[k] = oracle::random_state(g, s.params.dp_bar, 0.5);
    const auto d1 = closed_loop_derivative(x, 0.0, s);
    for (std::size_t i = 0; i < k; ++i) {
        CHECK(d1.followers[i].dv == d0.followers[i].dv);
        CHECK(d1.followers[i].rho2 == d0.followers[i].rho2);
    }
}

TEST_CASE("disturbance is applied but not communicated") {
    auto s = quiescent(2);
    s.pulses.push_back({0, 0.0, 1.0, 1.5, 1});
    const auto in = evaluate_inputs(*s.initial_state, 0.5, s);
    CHECK(in.vehicles[0].u_ctrl == 0.0);
    CHECK(in.vehicles[0].u_comm == 0.0);
    CHECK(in.vehicles[0].u_app == 1.5);
    CHECK(in.vehicles[1].u_app == 0.0);
    const auto d = closed_loop_derivative(*s.initial_state, 0.5, s);
    CHECK(d.followers[0].dv == 1.5);
    CHECK(d.followers[1].dv == -1.5);
    const auto after = evaluate_inputs(*s.initial_state, 1.0, s);
    CHECK(after.vehicles[0].u_app == 0.0);
}

TEST_CASE("size mismatch is rejected") {
    auto s = quiescent(3);
    auto x = *s.initial_state;
    x.followers.pop_back();
    CHECK_THROWS_AS((void)closed_loop_derivative(x, 0.0, s), std::invalid_argument);
    CHECK_THROWS_AS((void)unpack(std::vector<double>{1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("RK4 is exact for constant velocity") {
    const DerivativeFn f = [](double, std::span<const double> y) {
        return std::vector<double>{y[1], 0.0};
    };
    std::vector<double> y{3.0, 14.0};
    for (int k = 0; k < 100; ++k) {
        const double p0 = y[0];
        y = rk4_step(y, 0.01 * k, 0.01, f);
        CHECK(y[0] == p0 + 14.0 * 0.01);
        CHECK(y[1] == 14.0);
    }
}

TEST_CASE("RK4 on y' = -y") {
    const DerivativeFn f = [](double, std::span<const double> y) { return std::vector<double>{-y[0]}; };
    std::vector<double> y{1.0};
    for (int k = 0; k < 100; ++k) y = rk4_step(y, 0.01 * k, 0.01, f);
    CHECK(std::abs(y[0] - std::exp(-1.0)) < 1e-9);
}

TEST_CASE("unforced rho filter against the matrix exponential") {
    std::mt19937_64 g(17);
    for (int trial = 0; trial < 50; ++trial) {
        MacroWeights w;
        w.lambda1 = oracle::uniform(g, 0.2, 4.0);
        w.lambda2 = trial == 0 ? w.lambda1 : oracle::uniform(g, 0.2, 4.0);
        const Eigen::Vector2d r0(oracle::uniform(g, -2, 2), oracle::uniform(g, -2, 2));
        const DerivativeFn f = [&w](double, std::span<const double> y) {
            const auto [a, b] = rho_derivative(y[0], y[1], 0.0, 0.0, w);
            return std::vector<double>{a, b};
        };
        std::vector<double> y{r0[0], r0[1]};
        for (int k = 0; k < 100; ++k) y = rk4_step(y, 0.01 * k, 0.01, f);
        const auto ref = oracle::rho_flow(w.lambda1, w.lambda2, r0, 1.0);
        CHECK(std::abs(y[0] - ref[0]) < 1e-8);
        CHECK(std::abs(y[1] - ref[1]) < 1e-8);
    }
    // Repeated eigenvalue: rho1(t) = e^{-l t}(rho1 + t rho2), rho2(t) = e^{-l t} rho2.
    const auto ref = oracle::rho_flow(1.5, 1.5, {0.3, -0.7}, 1.0);
    CHECK(ref[0] == doctest::Approx(std::exp(-1.5) * (0.3 - 0.7)).epsilon(1e-13));
    CHECK(ref[1] == doctest::Approx(std::exp(-1.5) * -0.7).epsilon(1e-13));
}

TEST_CASE("initial conditions follow the seed stream") {
    Scenario s;
    const auto a = initial_platoon(s);
    const auto b = initial_platoon(s);
    CHECK(max_abs_diff(a, b) == 0.0);
    REQUIRE(a.followers.size() == 11);
    for (const auto& f : a.followers) {
        CHECK(std::abs(f.dp + 10.0) <= 2.0);
        CHECK(std::abs(f.dv) <= 1.0);
        CHECK(f.rho1 == 0.0);
        CHECK(f.rho2 == 0.0);
    }
    s.seed += 1;
    CHECK(max_abs_diff(a, initial_platoon(s)) > 0.0);
    s.seed -= 1;
    s.n_followers = 11;
    const auto c = initial_platoon(s);
    CHECK(c.followers[0].dp != a.followers[0].dp);
}

TEST_CASE("simulation is deterministic") {
    Scenario s;
    s.t_end = 3.0;
    const auto a = simulate(s);
    const auto b = simulate(s);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
        for (std::size_t i = 0; i < a.n_vehicles(); ++i) {
            CHECK(a.samples[k].vehicles[i].p == b.samples[k].vehicles[i].p);
            CHECK(a.samples[k].vehicles[i].rho2 == b.samples[k].vehicles[i].rho2);
        }
    }
}

TEST_CASE("halving the step changes the solution very little") {
    Scenario s;
    s.pulses.clear();
    s.schedule.segments.clear();
    s.t_end = 4.0;
    s.output_interval = 0.02;
    s.h = 0.02;
    const auto coarse = simulate(s);
    s.h = 0.01;
    const auto fine = simulate(s);
    s.h = 0.005;
    const auto finer = simulate(s);
    auto diff = [](const Trajectory& a, const Trajectory& b) {
        const auto& x = a.samples.back().vehicles;
        const auto& y = b.samples.back().vehicles;
        double m = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            m = std::max({m, std::abs(x[i].dp - y[i].dp), std::abs(x[i].dv - y[i].dv),
                          std::abs(x[i].rho1 - y[i].rho1), std::abs(x[i].rho2 - y[i].rho2)});
        }
        return m;
    };
    const double e1 = diff(coarse, finer);
    const double e2 = diff(fine, finer);
    CHECK(e2 < 1e-4);
    CHECK(e2 <= e1);
}

TEST_CASE("without macroscopic coupling the filter stays at rest") {
    Scenario s;
    s.params.weights.a = 0.0;
    s.params.weights.b = 0.0;
    s.t_end = 5.0;
    const auto traj = simulate(s);
    for (const auto& smp : traj.samples) {
        for (const auto& v : smp.vehicles) {
            CHECK(v.rho1 == 0.0);
            CHECK(v.rho2 == 0.0);
        }
    }
}

TEST_CASE("finite-difference W' matches the analytic derivative") {
    std::mt19937_64 g(8);
    const ControllerParams p;
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = oracle::random_state(g, p.dp_bar, 0.5);
        const double pp = oracle::uniform(g, -0.3, 0.3), pv = oracle::uniform(g, -0.3, 0.3);
        const LeaderFeed feed{0.0, pp, pv, true};
        // Pair dynamics with the predecessor's acceleration u_prev = 0.
        auto flow = [&](const ExtendedState& s) {
            const double u = control_input(s, feed, p);
            const auto [r1, r2] = rho_derivative(s.rho1, s.rho2, pp, pv, p.weights);
            return ExtendedState{s.dv, u, r1, r2};
        };
        const double eps = 1e-6;
        const auto f = flow(x);
        const ExtendedState fwd{x.dp + eps * f.dp, x.dv + eps * f.dv, x.rho1 + eps * f.rho1,
                                x.rho2 + eps * f.rho2};
        const ExtendedState bwd{x.dp - eps * f.dp, x.dv - eps * f.dv, x.rho1 - eps * f.rho1,
                                x.rho2 - eps * f.rho2};
        const double fd = (lyapunov_value(fwd, p) - lyapunov_value(bwd, p)) / (2 * eps);
        CHECK(fd == doctest::Approx(lyapunov_derivative(x, pp, pv, p)).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("invalid scenarios are rejected with the field name") {
    auto expect = [](Scenario s, const std::string& field) {
        try {
            s.validate();
            FAIL("accepted invalid scenario, expected " << field);
        } catch (const std::invalid_argument& e) {
            CHECK(std::string(e.what()).rfind(field, 0) == 0);
        }
    };
    Scenario s;
    s.h = 0.0;
    expect(s, "integrator.h");
    s = {};
    s.output_interval = 0.015;
    expect(s, "integrator.output_interval");
    s = {};
    s.t_end = -1.0;
    expect(s, "integrator.t_end");
    s = {};
    s.limits.a_max = 0.0;
    expect(s, "limits.a_max");
    s = {};
    s.schedule.segments = {{30.0, 50.0}};
    expect(s, "schedule.segments");
    s = {};
    s.pulses = {{12, 0.0, 1.0, 1.0, std::nullopt}};
    expect(s, "pulses[0].target");
    s = {};
    s.ic_radius.dp = -1.0;
    expect(s, "platoon.ic_radius");
    s = {};
    s.params.k_dv = 0.0;
    CHECK_THROWS_AS((void)simulate(s), std::invalid_argument);
}

TEST_CASE("a lone head vehicle at equilibrium stays put") {
    auto s = quiescent(0);
    s.t_end = 10.0;
    const auto traj = simulate(s);
    for (const auto& smp : traj.samples) {
        CHECK(smp.leader.v == 14.0);
        CHECK(smp.u_leader == 0.0);
        const auto& v = smp.vehicles[0];
        CHECK(v.dp == -10.0);
        CHECK(v.dv == 0.0);
        CHECK(v.u_app == 0.0);
        CHECK(v.v == 14.0);
        CHECK(v.p == doctest::Approx(smp.leader.p - 10.0));
    }
}

TEST_CASE("speeds stay inside the box") {
    Scenario s;
    s.schedule.segments = {{1.0, 36.0}};
    s.t_end = 20.0;
    s.pulses = {{0, 2.0, 10.0, 4.0, std::nullopt}};
    const auto traj = simulate(s);
    for (const auto& smp : traj.samples) {
        CHECK(smp.leader.v <= s.limits.v_max);
        for (const auto& v : smp.vehicles) {
            CHECK(v.v <= s.limits.v_max + 1e-12);
            CHECK(v.v > s.limits.v_min_open);
            CHECK(std::abs(v.u_app) <= s.limits.a_max);
        }
    }
}

TEST_CASE("without macroscopic coupling a pair ignores its predecessors' states") {
    auto s = quiescent(6);
    s.params.weights.a = s.params.weights.b = 0.0;
    s.t_end = 10.0;
    s.initial_state->followers[5] = {-10.4, 0.3, 0.0, 0.0};
    const auto base = simulate(s);
    s.initial_state->followers[1] = {-9.5, -0.4, 0.0, 0.0};
    s.initial_state->followers[3] = {-10.2, 0.2, 0.0, 0.0};
    const auto moved = simulate(s);
    double diff = 0.0, upstream = 0.0;
    for (std::size_t k = 0; k < base.samples.size(); ++k) {
        const auto& a = base.samples[k].vehicles;
        const auto& b = moved.samples[k].vehicles;
        for (std::size_t i = 4; i < a.size(); ++i) {
            diff = std::max({diff, std::abs(a[i].dp - b[i].dp), std::abs(a[i].dv - b[i].dv)});
        }
        upstream = std::max(upstream, std::abs(a[3].dp - b[3].dp));
        for (const auto& v : b) REQUIRE_FALSE(v.saturated);
    }
    CHECK(upstream > 0.1);
    CHECK(diff < 1e-12);
}
