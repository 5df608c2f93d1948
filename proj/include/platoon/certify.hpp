#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "platoon/controller.hpp"
#include "platoon/core.hpp"

namespace platoon {

/// Per-pair Lyapunov function: half the squared spacing error, speed error and rho states.
[[nodiscard]] double lyapunov_value(const ExtendedState& x, const ControllerParams& p) noexcept;

struct QuadraticBounds {
    double alpha_lo = 0.0;
    double alpha_hi = 0.0;
};

/// Closed-form constants alpha_lo = 1/2, alpha_hi = max{1 + k_dp^2, 2 + (lambda1 - k_dp)^2} / 2,
/// read off the diagonal of the triangular representation of W.
[[nodiscard]] QuadraticBounds lyapunov_bounds(const ControllerParams& p) noexcept;

/// Closed-form decay constant min{q1, k_dv, q4, lambda2 + k_dv}.
[[nodiscard]] double alpha_decay(const ControllerParams& p) noexcept;

/// Upper-triangular matrix P_W with W = x^T P_W x / 2 in deviation coordinates.
[[nodiscard]] Eigen::Matrix4d lyapunov_matrix(const ControllerParams& p) noexcept;

/// Upper-triangular Q_W as displayed alongside the closed-form alpha.
[[nodiscard]] Eigen::Matrix4d dissipation_matrix_displayed(const ControllerParams& p) noexcept;

/// Symmetric matrix of the exact unforced dissipation: -W' = x^T Q x when the feed is zero.
[[nodiscard]] Eigen::Matrix4d dissipation_matrix_exact(const ControllerParams& p) noexcept;

/// Eigenvalue-based counterparts of the closed-form constants.
struct ExactConstants {
    double alpha_lo = 0.0;            // lambda_min(sym P_W) / 2
    double alpha_hi = 0.0;            // lambda_max(sym P_W) / 2
    double alpha = 0.0;               // lambda_min of the exact dissipation form
    double alpha_displayed_sym = 0.0; // lambda_min of the symmetric part of displayed Q_W
    double gamma_tilde = 0.0;         // gain rebuilt from the constants above
};

[[nodiscard]] ExactConstants exact_constants(const ControllerParams& p);

struct IssGain {
    double d = 0.0;
    double gamma_tilde = 0.0;
    bool string_stable = false;
};

/// d = a gamma_dp + b gamma_dv and gamma_tilde = sqrt(alpha_hi / alpha_lo) d / (alpha upsilon).
/// Throws std::invalid_argument unless upsilon lies in (0, 1).
[[nodiscard]] IssGain iss_gain(const ControllerParams& p);

/// Analytic time derivative of W along the unsaturated closed loop.
[[nodiscard]] double lyapunov_derivative(const ExtendedState& x, double psi_dp_prev,
                                         double psi_dv_prev, const ControllerParams& p) noexcept;

struct IssRegionResult {
    bool inside = false;       // |x_i| >= d / (alpha upsilon) * max_j |x_j|
    bool holds = true;         // decay inequality, only meaningful when inside
    double threshold = 0.0;
    double w_dot = 0.0;
    double decay_bound = 0.0;  // -(1 - upsilon) alpha |x_i|^2
};

/// Checks the decay inequality W' <= -(1 - upsilon) alpha |x_i|^2 for pair i given the states of
/// its predecessors 0..i-1, from which the macroscopic feed is computed.
[[nodiscard]] IssRegionResult iss_region_check(const ExtendedState& x,
                                               std::span<const ExtendedState> predecessors,
                                               const ControllerParams& p, double tol = 1e-8);

/// beta0 / (1 - gamma_tilde). Throws std::domain_error("not string stable") for gamma_tilde >= 1.
[[nodiscard]] double recursive_bound(double gamma_tilde, double beta0);

/// Coupling coefficient of pair i on its predecessors: 2 / sqrt(i) * max{a gamma_dp, b gamma_dv},
/// zero for i = 0.
[[nodiscard]] double k_tilde(const ControllerParams& p, std::size_t i) noexcept;

/// sqrt(3 / i) * max{a gamma_dp, b gamma_dv}; reported only.
[[nodiscard]] double k_tilde_alternate(const ControllerParams& p, std::size_t i) noexcept;

struct MMatrixCertificate {
    Eigen::MatrixXd S;
    Eigen::VectorXd D;
    double pd_margin = 0.0;  // lambda_min((DS + S^T D) / 2)
    double ratio = 1.0;      // d_i = ratio * d_{i+1}, d_last = 1
};

/// S has alpha on the diagonal and -k_tilde[i] at (i, j) for j < i, so row i collects the
/// coupling of pair i to its predecessors. D is found by scanning a geometric weighting over a
/// logarithmic grid of ratios in [1, 1e3]. Throws MMatrixSearchError when no grid point gives a
/// margin above 1e-8.
[[nodiscard]] MMatrixCertificate build_S_and_find_D(std::size_t size, double alpha,
                                                    std::span<const double> k_tilde);

[[nodiscard]] Eigen::MatrixXd coupling_matrix(std::size_t size, double alpha,
                                              std::span<const double> k_tilde);

/// Smallest eigenvalue of (D S + S^T D) / 2.
[[nodiscard]] double pd_margin(const Eigen::MatrixXd& S, const Eigen::VectorXd& D);

/// Determinants of the leading principal submatrices.
[[nodiscard]] std::vector<double> leading_principal_minors(const Eigen::MatrixXd& S);

class MMatrixSearchError : public std::runtime_error {
public:
    MMatrixSearchError(const std::string& what, double best_margin)
        : std::runtime_error(what), best_margin_(best_margin) {}
    [[nodiscard]] double best_margin() const noexcept { return best_margin_; }

private:
    double best_margin_;
};

struct Certificate {
    double alpha_lo = 0.0;
    double alpha_hi = 0.0;
    double alpha = 0.0;
    double d = 0.0;
    double upsilon = 0.0;
    double gamma_tilde = 0.0;
    bool string_stable = false;
    double recursive_bound_factor = 0.0;  // 1 / (1 - gamma_tilde); +inf when not string stable
    std::vector<double> k_tilde;
    std::vector<double> k_tilde_alternate;
    Eigen::MatrixXd S;
    Eigen::VectorXd D;
    double d_ratio = 0.0;
    double pd_margin = 0.0;
    bool m_matrix_found = false;
    ExactConstants exact;
};

/// Full certificate for a platoon with vehicles 0..n_followers.
[[nodiscard]] Certificate certify(const ControllerParams& p, std::size_t n_followers);

}  // namespace platoon
