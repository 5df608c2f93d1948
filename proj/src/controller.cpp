#include "platoon/controller.hpp"

#include <stdexcept>

namespace platoon {

void ControllerParams::validate() const {
    if (!(k_dp > 0.0)) throw std::invalid_argument("controller: k_dp must be > 0");
    if (!(k_dv > 0.0)) throw std::invalid_argument("controller: k_dv must be > 0");
    if (!(dp_bar > 0.0)) throw std::invalid_argument("controller: dp_bar must be > 0");
    weights.validate();
}

double velocity_reference(const ExtendedState& x, const ControllerParams& p) noexcept {
    const double spacing_error = x.dp - spacing_reference(x.rho1, p.dp_bar);
    return p.weights.lambda1 * x.rho1 - x.rho2 - p.k_dp * spacing_error;
}

double control_input(const ExtendedState& x, const LeaderFeed& feed,
                     const ControllerParams& p) noexcept {
    const auto& w = p.weights;
    const double spacing_error = x.dp - spacing_reference(x.rho1, p.dp_bar);
    const double speed_error = x.dv - velocity_reference(x, p);
    const double filter = w.lambda1 * x.rho1 - x.rho2;
    return feed.u_prev - spacing_error - p.k_dv * speed_error + (p.k_dp - w.lambda1) * filter +
           w.lambda2 * x.rho2 - p.k_dp * x.dv - w.a * feed.effective_psi_dp() -
           w.b * feed.effective_psi_dv();
}

double control_input_expanded(const ExtendedState& x, const LeaderFeed& feed,
                              const ControllerParams& p) noexcept {
    const auto& w = p.weights;
    const double e = x.dp + p.dp_bar + x.rho1;
    return feed.u_prev - e - w.lambda1 * (w.lambda1 * x.rho1 - x.rho2) + w.lambda2 * x.rho2 -
           p.k_dp * (x.dv - w.lambda1 * x.rho1 + x.rho2) - w.a * feed.effective_psi_dp() -
           w.b * feed.effective_psi_dv() -
           p.k_dv * (x.dv - w.lambda1 * x.rho1 + x.rho2 + p.k_dp * e);
}

Saturated saturate(double u, double a_max) noexcept {
    if (u > a_max) return {a_max, true};
    if (u < -a_max) return {-a_max, true};
    return {u, false};
}

}  // namespace platoon
