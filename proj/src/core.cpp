#include "platoon/core.hpp"

#include <cmath>
#include <stdexcept>

namespace platoon {

Equilibrium Equilibrium::at_spacing(double dp_bar) {
    if (!(dp_bar > 0.0)) {
        throw std::invalid_argument("equilibrium spacing dp_bar must be positive");
    }
    return Equilibrium{-dp_bar};
}

PlatoonState PlatoonState::at_equilibrium(std::size_t n_followers, const Equilibrium& eq,
                                          VehicleState leader) {
    return PlatoonState{leader, std::vector<ExtendedState>(n_followers + 1, eq.state())};
}

Deviation deviation(const ExtendedState& x, const Equilibrium& e) noexcept {
    return {x.dp - e.dp_eq, x.dv, x.rho1, x.rho2};
}

double norm(const Deviation& d) noexcept {
    double s = 0.0;
    for (double c : d) s += c * c;
    return std::sqrt(s);
}

double deviation_norm(const ExtendedState& x, const Equilibrium& e) noexcept {
    return norm(deviation(x, e));
}

std::vector<CarFollowingState> absolute_to_relative(std::span<const VehicleState> states,
                                                    const VehicleState& leader) {
    if (states.empty()) throw std::invalid_argument("empty platoon");
    std::vector<CarFollowingState> out;
    out.reserve(states.size());
    const VehicleState* ahead = &leader;
    for (const auto& s : states) {
        out.push_back({s.p - ahead->p, s.v - ahead->v});
        ahead = &s;
    }
    return out;
}

std::vector<VehicleState> relative_to_absolute(std::span<const CarFollowingState> pairs,
                                               const VehicleState& leader) {
    if (pairs.empty()) throw std::invalid_argument("empty platoon");
    std::vector<VehicleState> out;
    out.reserve(pairs.size());
    VehicleState ahead = leader;
    for (const auto& c : pairs) {
        ahead = {ahead.p + c.dp, ahead.v + c.dv};
        out.push_back(ahead);
    }
    return out;
}

}  // namespace platoon
