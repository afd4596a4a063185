// Fixed points of the field-spin Hamiltonian system, their energies, the
// coupling matrices C_mn in both the inner-product and direct-quadrature
// forms, and the small-cutoff study that recovers the pairwise dipolar
// (Ising) interaction kernel.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cutoff.hpp"
#include "dynamics.hpp"
#include "mode_space.hpp"
#include "spin_algebra.hpp"

namespace spinphoton {

// Stationary field point sourced by the spin expectations of u:
//   q_h = -h M^{-1} sum a_m(x_lam) S_m^{[lam]},  p_h likewise with b_m.
inline PhaseSpacePoint fixed_point_fields(const System& sys, const SpinState& u, double h) {
    const std::vector<Vec3> S = spin_expectations(u);
    PhaseSpacePoint X(*sys.grid);
    for (std::size_t lam = 0; lam < S.size(); ++lam)
        for (std::size_t m = 0; m < 3; ++m) {
            X.q.axpy(-h * S[lam][m], sys.couplings.a[lam][m]);
            X.p.axpy(-h * S[lam][m], sys.couplings.b[lam][m]);
        }
    X.q = apply_M_inv(X.q);
    X.p = apply_M_inv(X.p);
    return X;
}

struct FixedPointCheck {
    bool is_fixed = false;
    double eigvec_residual = 0.0;  // || T u - <T u, u> u ||
    double eigenvalue = 0.0;       // <T u, u>
};

// (q, p, pi_u) is a fixed point iff q = q_h(u), p = p_h(u) and u is an
// eigenvector of T(q, p); only the eigenvector condition can fail.
inline FixedPointCheck is_fixed_point(const System& sys, const SpinState& u, double h,
                                      double tol = 1e-8) {
    const PhaseSpacePoint X = fixed_point_fields(sys, u, h);
    const SpinState Tu = apply_T(X, sys.couplings, sys.spins, u);
    FixedPointCheck out;
    out.eigenvalue = inner(u, Tu).real() / u.norm2();
    SpinState r = Tu;
    r.axpy(Complex{-out.eigenvalue, 0.0}, u);
    out.eigvec_residual = r.norm();
    out.is_fixed = out.eigvec_residual <= tol;
    return out;
}

namespace detail {

// Direct quadrature of the coupling-matrix kernel
//   (2 pi)^{-3} integral W(|k|) |chi|^2 cos(k.(x_lam - x_mu))
//                        (k x e_m).(k x e_n) / |k|^2 dk
// evaluated with raw cross products (no polarization frames), so it is an
// independent route against the inner-product form.
inline double coupling_kernel_quadrature(const KGrid& g, const CutoffProfile& chi, const Vec3& dx,
                                         int m, int n, double omega_shift) {
    double acc = 0.0;
    const Vec3 em = axis(m), en = axis(n);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const KGrid::Node& nd = g.node(i);
        const double c = chi(nd.omega);
        if (c == 0.0) continue;
        const double weight = nd.omega / (nd.omega + omega_shift);
        acc += nd.w * c * c * weight * std::cos(dot(nd.k, dx)) *
               dot(cross(nd.k, em), cross(nd.k, en)) / (nd.omega * nd.omega);
    }
    return acc * two_pi_pow_neg3();
}

}  // namespace detail

// C_mn^{[lam, mu]} = a_m(x_lam).(M^{-1} a_n(x_mu)) + b_m(x_lam).(M^{-1} b_n(x_mu)).
// Computed through the inner-product route and cross-checked against the
// direct quadrature of the integral form; the two must agree.
inline double coupling_matrix(const System& sys, int lam, int mu, int m, int n,
                              double check_tol = 1e-8) {
    const auto& A = sys.couplings.a;
    const auto& B = sys.couplings.b;
    const std::size_t l = static_cast<std::size_t>(lam - 1), u = static_cast<std::size_t>(mu - 1);
    const double v = inner(A[l][static_cast<std::size_t>(m - 1)],
                           apply_M_inv(A[u][static_cast<std::size_t>(n - 1)])) +
                     inner(B[l][static_cast<std::size_t>(m - 1)],
                           apply_M_inv(B[u][static_cast<std::size_t>(n - 1)]));
    const double q = detail::coupling_kernel_quadrature(
        *sys.grid, sys.chi, sys.spins.positions[l] - sys.spins.positions[u], m, n, 0.0);
    if (std::abs(v - q) > check_tol * std::max(1.0, std::abs(v)))
        throw std::runtime_error("coupling_matrix: inner-product and quadrature routes disagree");
    return v;
}

// Same with resolvent weight 1 / (|k| + shift) in place of 1 / |k|; the
// second-order coefficient of the perturbation series uses shift = 2|beta|.
inline double coupling_matrix_shifted(const System& sys, int lam, int mu, int m, int n,
                                      double shift, double check_tol = 1e-8) {
    const auto& A = sys.couplings.a;
    const auto& B = sys.couplings.b;
    const std::size_t l = static_cast<std::size_t>(lam - 1), u = static_cast<std::size_t>(mu - 1);
    const double v = inner(A[l][static_cast<std::size_t>(m - 1)],
                           apply_M_shifted_inv(A[u][static_cast<std::size_t>(n - 1)], shift)) +
                     inner(B[l][static_cast<std::size_t>(m - 1)],
                           apply_M_shifted_inv(B[u][static_cast<std::size_t>(n - 1)], shift));
    const double q = detail::coupling_kernel_quadrature(
        *sys.grid, sys.chi, sys.spins.positions[l] - sys.spins.positions[u], m, n, shift);
    if (std::abs(v - q) > check_tol * std::max(1.0, std::abs(v)))
        throw std::runtime_error("coupling_matrix_shifted: routes disagree");
    return v;
}

namespace detail {

inline double configuration_diameter(const SpinConfig& cfg) {
    double d = 0.0;
    for (std::size_t i = 0; i < cfg.positions.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.positions.size(); ++j)
            d = std::max(d, norm(cfg.positions[i] - cfg.positions[j]));
    return d;
}

inline bool coplanar_orthogonal_to_beta(const SpinConfig& cfg, double rel_tol = 1e-10) {
    if (cfg.positions.size() < 2) return true;
    const Vec3 bhat = normalized(cfg.beta);
    const double diam = std::max(configuration_diameter(cfg), 1e-30);
    for (std::size_t i = 0; i < cfg.positions.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.positions.size(); ++j)
            if (std::abs(dot(cfg.positions[i] - cfg.positions[j], bhat)) > rel_tol * diam)
                return false;
    return true;
}

// Rotation taking beta-hat to the z axis (identity when already aligned).
inline std::array<Vec3, 3> rotation_to_z(const Vec3& beta) {
    const Vec3 b = normalized(beta);
    const Vec3 z{0.0, 0.0, 1.0};
    Vec3 v = cross(b, z);
    const double s = norm(v), c = dot(b, z);
    if (s < 1e-14) {
        if (c > 0.0) return {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
        return {Vec3{1, 0, 0}, Vec3{0, -1, 0}, Vec3{0, 0, -1}};  // beta = -z
    }
    v = normalized(v);
    // Rodrigues rows of R = cos I + sin [v]_x + (1-cos) v v^T
    std::array<Vec3, 3> R;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double kij = (i == 0 ? (j == 1 ? -v.z : (j == 2 ? v.y : 0.0))
                               : i == 1 ? (j == 0 ? v.z : (j == 2 ? -v.x : 0.0))
                                        : (j == 0 ? -v.y : (j == 1 ? v.x : 0.0)));
            R[i][j] = c * (i == j ? 1.0 : 0.0) + s * kij + (1.0 - c) * v[i] * v[j];
        }
    return R;
}

inline Vec3 apply_rotation(const std::array<Vec3, 3>& R, const Vec3& x) {
    return {dot(R[0], x), dot(R[1], x), dot(R[2], x)};
}

}  // namespace detail

// Energy of the fixed point labeled by the subset E (bitmask):
//   H = h |beta| sum eps_lam - (h^2/2) sum_{lam,mu} C_33 eps_lam eps_mu,
// with the positions expressed in coordinates where beta points along z.
// Requires the particles coplanar orthogonal to beta.
inline double fixed_point_energy(const System& sys, std::uint32_t E, double h) {
    if (!detail::coplanar_orthogonal_to_beta(sys.spins))
        throw std::invalid_argument("fixed_point_energy: particles not coplanar orthogonal to beta");
    const int N = sys.spins.n;
    const double b = norm(sys.spins.beta);
    const auto R = detail::rotation_to_z(sys.spins.beta);
    std::vector<Vec3> xr(sys.spins.positions.size());
    for (std::size_t i = 0; i < xr.size(); ++i)
        xr[i] = detail::apply_rotation(R, sys.spins.positions[i]);

    double lin = 0.0, quad = 0.0;
    for (int lam = 0; lam < N; ++lam) {
        const double el = (E >> lam) & 1 ? 1.0 : -1.0;
        lin += el;
        for (int mu = 0; mu < N; ++mu) {
            const double em = (E >> mu) & 1 ? 1.0 : -1.0;
            const double c33 = detail::coupling_kernel_quadrature(
                *sys.grid, sys.chi, xr[static_cast<std::size_t>(lam)] - xr[static_cast<std::size_t>(mu)],
                3, 3, 0.0);
            quad += c33 * el * em;
        }
    }
    return h * b * lin - 0.5 * h * h * quad;
}

// Cross-check route: the Hamiltonian function evaluated directly at
// (q_h(a_E), p_h(a_E), a_E).
inline double fixed_point_energy_direct(const System& sys, std::uint32_t E, double h) {
    const SpinState a = basis_state(E, sys.spins.beta, sys.spins.n);
    const PhaseSpacePoint X = fixed_point_fields(sys, a, h);
    return hamiltonian(sys, X, a, h);
}

// F_eps(x) = (2 pi)^{-3} integral |phi(|k| eps)|^2 cos(k.x) (k1^2+k2^2)/|k|^2 dk,
// the pair kernel of the fixed-point interaction energy for the dilated
// plateau cutoff.
inline double ising_F_eps(const KGrid& g, const CutoffProfile& chi, const Vec3& dx) {
    return detail::coupling_kernel_quadrature(g, chi, dx, 3, 3, 0.0);
}

struct IsingRow {
    double eps;
    int lam, mu;
    double F_eps;
    double limit_kernel;  // -1 / (4 pi |x|^3), valid on the beta-orthogonal plane
    double abs_err;
};

struct IsingStudy {
    std::vector<IsingRow> rows;
    std::vector<double> eps;
    std::vector<double> self_term;  // F_eps(0) per eps; the E-independent energy offset sums this
};

struct IsingGridPolicy {
    int radial_order = 96;
    int min_angular = 16;
    double angular_margin = 16.0;  // extra polar order beyond (max phase)/2

    KGrid build(double eps, double max_dist) const {
        const double r_max = 1.0 / eps;
        const int n_theta =
            std::max(min_angular, static_cast<int>(std::ceil(0.5 * r_max * max_dist + angular_margin)));
        return KGrid::build(radial_order, n_theta, 0.0, r_max);
    }
};

// Convergence study of F_eps against the dipolar limit kernel over a
// decreasing eps sequence. Positions must lie in the z = 0 plane, where
// the limit takes the closed form -1/(4 pi |x|^3).
inline IsingStudy ising_limit_study(const SpinConfig& cfg, const std::vector<double>& eps_list,
                                    const IsingGridPolicy& policy = {}) {
    cfg.validate();
    for (const Vec3& x : cfg.positions)
        if (std::abs(x.z) > 1e-12)
            throw std::invalid_argument("ising_limit_study: positions must satisfy x3 = 0");
    double max_dist = 1e-30;
    for (std::size_t i = 0; i < cfg.positions.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.positions.size(); ++j)
            max_dist = std::max(max_dist, norm(cfg.positions[i] - cfg.positions[j]));

    IsingStudy study;
    for (const double eps : eps_list) {
        const KGrid g = policy.build(eps, max_dist);
        const CutoffProfile chi = CutoffProfile::plateau_family(eps);
        study.eps.push_back(eps);
        study.self_term.push_back(ising_F_eps(g, chi, Vec3{0, 0, 0}));
        for (int lam = 0; lam < cfg.n; ++lam)
            for (int mu = lam + 1; mu < cfg.n; ++mu) {
                IsingRow row;
                row.eps = eps;
                row.lam = lam + 1;
                row.mu = mu + 1;
                const Vec3 dx = cfg.positions[static_cast<std::size_t>(lam)] -
                                cfg.positions[static_cast<std::size_t>(mu)];
                row.F_eps = ising_F_eps(g, chi, dx);
                const double r = norm(dx);
                row.limit_kernel = -1.0 / (4.0 * M_PI * r * r * r);
                row.abs_err = std::abs(row.F_eps - row.limit_kernel);
                study.rows.push_back(row);
            }
    }
    return study;
}

}  // namespace spinphoton
