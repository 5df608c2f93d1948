#include "platoon/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "platoon/macro.hpp"

namespace platoon {

namespace {

constexpr double kMarginTolerance = 1e-8;

double coupling_max(const ControllerParams& p) noexcept {
    const auto& w = p.weights;
    return std::max(w.a * w.gamma_dp, w.b * w.gamma_dv);
}

// Maps a deviation (dp + dp_bar, dv, rho1, rho2) to (spacing error, speed error, rho1, rho2).
Eigen::Matrix4d error_coordinates(const ControllerParams& p) noexcept {
    Eigen::Matrix4d t;
    // clang-format off
    t << 1.0,    0.0, 1.0,                      0.0,
         p.k_dp, 1.0, p.k_dp - p.weights.lambda1, 1.0,
         0.0,    0.0, 1.0,                      0.0,
         0.0,    0.0, 0.0,                      1.0;
    // clang-format on
    return t;
}

Eigen::Vector4d symmetric_eigenvalues(const Eigen::Matrix4d& m) {
    const Eigen::Matrix4d sym = 0.5 * (m + m.transpose());
    return Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(sym, Eigen::EigenvaluesOnly).eigenvalues();
}

}  // namespace

double lyapunov_value(const ExtendedState& x, const ControllerParams& p) noexcept {
    const double ep = x.dp - spacing_reference(x.rho1, p.dp_bar);
    const double ev = x.dv - velocity_reference(x, p);
    return 0.5 * (ep * ep + ev * ev + x.rho1 * x.rho1 + x.rho2 * x.rho2);
}

QuadraticBounds lyapunov_bounds(const ControllerParams& p) noexcept {
    const double l1 = p.weights.lambda1;
    const double top = std::max(1.0 + p.k_dp * p.k_dp, 2.0 + (l1 - p.k_dp) * (l1 - p.k_dp));
    return {0.5, 0.5 * top};
}

double alpha_decay(const ControllerParams& p) noexcept {
    const double kp = p.k_dp, kv = p.k_dv;
    const double l1 = p.weights.lambda1, l2 = p.weights.lambda2;
    const double q1 = kp * (1.0 + kp * kv);
    const double q4 = kp + l1 + kv * (l1 - kp) * (l1 - kp);
    return std::min({q1, kv, q4, l2 + kv});
}

Eigen::Matrix4d lyapunov_matrix(const ControllerParams& p) noexcept {
    const double kp = p.k_dp, l1 = p.weights.lambda1;
    const double p1 = 2.0 * kp;
    const double p2 = 2.0 * (1.0 + kp * kp - l1 * kp);
    const double p3 = 2.0 * (kp - l1);
    Eigen::Matrix4d m;
    // clang-format off
    m << 1.0 + kp * kp, p1,  p2,                          p1,
         0.0,           1.0, p3,                          2.0,
         0.0,           0.0, 2.0 + (l1 - kp) * (l1 - kp), p3,
         0.0,           0.0, 0.0,                         2.0;
    // clang-format on
    return m;
}

Eigen::Matrix4d dissipation_matrix_displayed(const ControllerParams& p) noexcept {
    const double kp = p.k_dp, kv = p.k_dv;
    const double l1 = p.weights.lambda1, l2 = p.weights.lambda2;
    const double q1 = kp * (1.0 + kp * kv);
    const double q2 = 2.0 * kp * (1.0 + kv * (kp - l1));
    const double q3 = 2.0 * kv * (kp - l1);
    const double q4 = kp + l1 + kv * (l1 - kp) * (l1 - kp);
    const double q5 = 1.0 - 2.0 * kv * (kp - l1);
    Eigen::Matrix4d m;
    // clang-format off
    m << q1,  2.0 * kp * kv, q2,  2.0 * kp * kv,
         0.0, kv,            q3,  2.0 * kv,
         0.0, 0.0,           q4,  q5,
         0.0, 0.0,           0.0, l2 + kv;
    // clang-format on
    return m;
}

Eigen::Matrix4d dissipation_matrix_exact(const ControllerParams& p) noexcept {
    Eigen::Matrix4d c = Eigen::Matrix4d::Zero();
    c(0, 0) = p.k_dp;
    c(1, 1) = p.k_dv;
    c(2, 2) = p.weights.lambda1;
    c(3, 3) = p.weights.lambda2;
    c(2, 3) = c(3, 2) = -0.5;
    const Eigen::Matrix4d t = error_coordinates(p);
    return t.transpose() * c * t;
}

ExactConstants exact_constants(const ControllerParams& p) {
    ExactConstants out;
    const auto pw = symmetric_eigenvalues(lyapunov_matrix(p));
    out.alpha_lo = 0.5 * pw.minCoeff();
    out.alpha_hi = 0.5 * pw.maxCoeff();
    out.alpha = symmetric_eigenvalues(dissipation_matrix_exact(p)).minCoeff();
    out.alpha_displayed_sym = symmetric_eigenvalues(dissipation_matrix_displayed(p)).minCoeff();
    const auto& w = p.weights;
    const double d = w.a * w.gamma_dp + w.b * w.gamma_dv;
    out.gamma_tilde = out.alpha > 0.0
                          ? std::sqrt(out.alpha_hi / out.alpha_lo) * d / (out.alpha * p.upsilon)
                          : std::numeric_limits<double>::infinity();
    return out;
}

IssGain iss_gain(const ControllerParams& p) {
    if (!(p.upsilon > 0.0 && p.upsilon < 1.0)) {
        throw std::invalid_argument("upsilon must lie in (0, 1), got " + std::to_string(p.upsilon));
    }
    const auto& w = p.weights;
    const auto bounds = lyapunov_bounds(p);
    IssGain g;
    g.d = w.a * w.gamma_dp + w.b * w.gamma_dv;
    g.gamma_tilde = std::sqrt(bounds.alpha_hi / bounds.alpha_lo) * g.d / (alpha_decay(p) * p.upsilon);
    g.string_stable = g.gamma_tilde < 1.0;
    return g;
}

double lyapunov_derivative(const ExtendedState& x, double psi_dp_prev, double psi_dv_prev,
                           const ControllerParams& p) noexcept {
    const auto& w = p.weights;
    const double ep = x.dp - spacing_reference(x.rho1, p.dp_bar);
    const double ev = x.dv - velocity_reference(x, p);
    return -p.k_dp * ep * ep - p.k_dv * ev * ev - w.lambda1 * x.rho1 * x.rho1 -
           w.lambda2 * x.rho2 * x.rho2 + x.rho1 * x.rho2 +
           x.rho2 * (w.a * psi_dp_prev + w.b * psi_dv_prev);
}

IssRegionResult iss_region_check(const ExtendedState& x,
                                 std::span<const ExtendedState> predecessors,
                                 const ControllerParams& p, double tol) {
    const auto eq = p.equilibrium();
    const auto gain = iss_gain(p);
    const double alpha = alpha_decay(p);

    double psi_p = 0.0, psi_v = 0.0, max_pred = 0.0;
    if (!predecessors.empty()) {
        std::vector<double> dp, dv;
        dp.reserve(predecessors.size());
        dv.reserve(predecessors.size());
        for (const auto& s : predecessors) {
            dp.push_back(s.dp);
            dv.push_back(s.dv);
            max_pred = std::max(max_pred, deviation_norm(s, eq));
        }
        const auto m = macro_signals(dp, dv, p.dp_bar, p.weights, predecessors.size() - 1);
        psi_p = m.psi_dp;
        psi_v = m.psi_dv;
    }

    IssRegionResult r;
    const double own = deviation_norm(x, eq);
    r.threshold = gain.d / (alpha * p.upsilon) * max_pred;
    r.inside = own >= r.threshold;
    r.w_dot = lyapunov_derivative(x, psi_p, psi_v, p);
    r.decay_bound = -(1.0 - p.upsilon) * alpha * own * own;
    r.holds = !r.inside || r.w_dot <= r.decay_bound + tol;
    return r;
}

double recursive_bound(double gamma_tilde, double beta0) {
    if (gamma_tilde >= 1.0) throw std::domain_error("not string stable");
    if (gamma_tilde < 0.0) throw std::invalid_argument("gamma_tilde must be >= 0");
    return beta0 / (1.0 - gamma_tilde);
}

double k_tilde(const ControllerParams& p, std::size_t i) noexcept {
    if (i == 0) return 0.0;
    return 2.0 / std::sqrt(static_cast<double>(i)) * coupling_max(p);
}

double k_tilde_alternate(const ControllerParams& p, std::size_t i) noexcept {
    if (i == 0) return 0.0;
    return std::sqrt(3.0 / static_cast<double>(i)) * coupling_max(p);
}

Eigen::MatrixXd coupling_matrix(std::size_t size, double alpha, std::span<const double> k) {
    if (k.size() < size) throw std::invalid_argument("coupling_matrix: too few coefficients");
    const auto n = static_cast<Eigen::Index>(size);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s(i, i) = alpha;
        for (Eigen::Index j = 0; j < i; ++j) s(i, j) = -k[static_cast<std::size_t>(i)];
    }
    return s;
}

double pd_margin(const Eigen::MatrixXd& S, const Eigen::VectorXd& D) {
    const Eigen::MatrixXd ds = D.asDiagonal() * S;
    const Eigen::MatrixXd sym = 0.5 * (ds + ds.transpose());
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly)
        .eigenvalues()
        .minCoeff();
}

std::vector<double> leading_principal_minors(const Eigen::MatrixXd& S) {
    std::vector<double> out;
    for (Eigen::Index k = 1; k <= S.rows(); ++k) out.push_back(S.topLeftCorner(k, k).determinant());
    return out;
}

MMatrixCertificate build_S_and_find_D(std::size_t size, double alpha, std::span<const double> k) {
    if (!(alpha > 0.0)) throw std::invalid_argument("build_S_and_find_D: alpha must be > 0");
    if (size == 0) throw std::invalid_argument("build_S_and_find_D: size must be >= 1");

    MMatrixCertificate out;
    out.S = coupling_matrix(size, alpha, k);
    const auto n = static_cast<Eigen::Index>(size);

    // 20 points per decade over [1, 1e3].
    constexpr int kPointsPerDecade = 20;
    constexpr int kDecades = 3;
    double best = -std::numeric_limits<double>::infinity();
    for (int g = 0; g <= kPointsPerDecade * kDecades; ++g) {
        const double ratio = std::pow(10.0, static_cast<double>(g) / kPointsPerDecade);
        Eigen::VectorXd d(n);
        d(n - 1) = 1.0;
        for (Eigen::Index i = n - 2; i >= 0; --i) d(i) = ratio * d(i + 1);
        const double margin = pd_margin(out.S, d);
        best = std::max(best, margin);
        if (margin > kMarginTolerance) {
            out.D = std::move(d);
            out.pd_margin = margin;
            out.ratio = ratio;
            return out;
        }
    }
    throw MMatrixSearchError("no diagonal scaling found on the ratio grid [1, 1e3]; best margin " +
                                 std::to_string(best),
                             best);
}

Certificate certify(const ControllerParams& p, std::size_t n_followers) {
    p.validate();
    Certificate c;
    const auto bounds = lyapunov_bounds(p);
    const auto gain = iss_gain(p);
    c.alpha_lo = bounds.alpha_lo;
    c.alpha_hi = bounds.alpha_hi;
    c.alpha = alpha_decay(p);
    c.d = gain.d;
    c.upsilon = p.upsilon;
    c.gamma_tilde = gain.gamma_tilde;
    c.string_stable = gain.string_stable;
    c.recursive_bound_factor = c.string_stable ? recursive_bound(c.gamma_tilde, 1.0)
                                               : std::numeric_limits<double>::infinity();
    const std::size_t size = n_followers + 1;
    for (std::size_t i = 0; i < size; ++i) {
        c.k_tilde.push_back(k_tilde(p, i));
        c.k_tilde_alternate.push_back(k_tilde_alternate(p, i));
    }
    try {
        auto m = build_S_and_find_D(size, c.alpha, c.k_tilde);
        c.S = std::move(m.S);
        c.D = std::move(m.D);
        c.d_ratio = m.ratio;
        c.pd_margin = m.pd_margin;
        c.m_matrix_found = true;
    } catch (const MMatrixSearchError& e) {
        c.S = coupling_matrix(size, c.alpha, c.k_tilde);
        c.pd_margin = e.best_margin();
        c.m_matrix_found = false;
    }
    c.exact = exact_constants(p);
    return c;
}

}  // namespace platoon
