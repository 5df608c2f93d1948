#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "platoon/core.hpp"

using namespace platoon;

TEST_CASE("deviation from equilibrium") {
    const auto eq = Equilibrium::at_spacing(10.0);
    const auto zero = deviation({-10.0, 0.0, 0.0, 0.0}, eq);
    for (double c : zero) CHECK(c == 0.0);

    const ExtendedState x{-9.0, 0.5, 0.1, -0.2};
    const auto d = deviation(x, eq);
    CHECK(d[0] == doctest::Approx(1.0));
    CHECK(d[1] == 0.5);
    CHECK(d[2] == 0.1);
    CHECK(d[3] == -0.2);
    CHECK(deviation_norm(x, eq) == doctest::Approx(std::sqrt(1.30)).epsilon(1e-14));
}

TEST_CASE("equilibrium spacing must be positive") {
    CHECK_THROWS_AS((void)Equilibrium::at_spacing(0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)Equilibrium::at_spacing(-1.0), std::invalid_argument);
    CHECK(Equilibrium::at_spacing(10.0).state().dp == -10.0);
}

TEST_CASE("absolute to relative") {
    const VehicleState leader{100.0, 14.0};
    const std::vector<VehicleState> one{{90.0, 14.0}};
    const auto r1 = absolute_to_relative(one, leader);
    REQUIRE(r1.size() == 1);
    CHECK(r1[0].dp == -10.0);
    CHECK(r1[0].dv == 0.0);

    const std::vector<VehicleState> two{{-12.0, 11.0}, {-22.0, 9.0}};
    const auto r2 = absolute_to_relative(two, {0.0, 10.0});
    REQUIRE(r2.size() == 2);
    CHECK(r2[0].dp == -12.0);
    CHECK(r2[0].dv == 1.0);
    CHECK(r2[1].dp == -10.0);
    CHECK(r2[1].dv == -2.0);

    CHECK_THROWS_WITH_AS((void)absolute_to_relative(std::vector<VehicleState>{}, leader),
                         "empty platoon", std::invalid_argument);
}

TEST_CASE("relative/absolute round trip on random platoons") {
    std::mt19937_64 g(7);
    for (int trial = 0; trial < 200; ++trial) {
        const VehicleState leader{oracle::uniform(g, -50, 50), oracle::uniform(g, 0, 36)};
        std::vector<VehicleState> xs(1 + g() % 30);
        double p = leader.p;
        for (auto& x : xs) {
            p -= oracle::uniform(g, 1, 30);
            x = {p, oracle::uniform(g, 0, 36)};
        }
        const auto back = relative_to_absolute(absolute_to_relative(xs, leader), leader);
        REQUIRE(back.size() == xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            CHECK(back[i].p == doctest::Approx(xs[i].p).epsilon(1e-12));
            CHECK(back[i].v == doctest::Approx(xs[i].v).epsilon(1e-12));
        }
    }
}

TEST_CASE("platoon at equilibrium") {
    const auto x = PlatoonState::at_equilibrium(3, Equilibrium::at_spacing(7.5), {1.0, 20.0});
    CHECK(x.n_followers() == 3);
    REQUIRE(x.followers.size() == 4);
    for (const auto& f : x.followers) {
        CHECK(f.dp == -7.5);
        CHECK(f.dv == 0.0);
        CHECK(f.rho1 == 0.0);
        CHECK(f.rho2 == 0.0);
    }
    CHECK(x.leader.v == 20.0);
}
