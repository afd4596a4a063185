// Semiclassical observables along trajectories and the derived evolution
// laws checked as numerical residuals: source-free divergences, the two
// Maxwell equations with the spin current, Bloch precession, and the
// photon-number law in both its direct and polarization-split forms.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "dynamics.hpp"
#include "mode_space.hpp"
#include "spin_algebra.hpp"

namespace spinphoton {

// N^appr = (|q|^2 + |p|^2) / (2h).
inline double photon_number(const TrajectoryState& s) {
    return (inner(s.X.q, s.X.q) + inner(s.X.p, s.X.p)) / (2.0 * s.h);
}

// B^appr(x) with components a_m(x).q + b_m(x).p.
inline Vec3 field_B(const System& sys, const PhaseSpacePoint& X, const Vec3& x) {
    Vec3 out;
    for (int m = 1; m <= 3; ++m)
        out[static_cast<std::size_t>(m - 1)] =
            inner(coupling_a(*sys.grid, sys.chi, x, m), X.q) +
            inner(coupling_b(*sys.grid, sys.chi, x, m), X.p);
    return out;
}

// E^appr(x) with components alpha_m(x).q + beta_m(x).p.
inline Vec3 field_E(const System& sys, const PhaseSpacePoint& X, const Vec3& x) {
    Vec3 out;
    for (int m = 1; m <= 3; ++m)
        out[static_cast<std::size_t>(m - 1)] =
            inner(coupling_alpha(*sys.grid, sys.chi, x, m), X.q) +
            inner(coupling_beta(*sys.grid, sys.chi, x, m), X.p);
    return out;
}

namespace fd {

// 4th-order central first derivative of a scalar-valued callable.
template <typename F>
double deriv(F&& f, double x, double step) {
    return (-f(x + 2.0 * step) + 8.0 * f(x + step) - 8.0 * f(x - step) + f(x - 2.0 * step)) /
           (12.0 * step);
}

template <typename Field>
double divergence(Field&& F, const Vec3& x, double step) {
    double acc = 0.0;
    for (std::size_t n = 0; n < 3; ++n) {
        acc += deriv(
            [&](double s) {
                Vec3 y = x;
                y[n] = s;
                return F(y)[n];
            },
            x[n], step);
    }
    return acc;
}

template <typename Field>
Vec3 curl(Field&& F, const Vec3& x, double step) {
    // partial_n F_m for all pairs
    double d[3][3];
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t m = 0; m < 3; ++m)
            d[n][m] = deriv(
                [&](double s) {
                    Vec3 y = x;
                    y[n] = s;
                    return F(y)[m];
                },
                x[n], step);
    return {d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0]};
}

}  // namespace fd

// Default probes: particle positions, pairwise midpoints, and 8 seeded
// random points in a box of side 4 (chi decay scale units) around the hull.
inline std::vector<Vec3> default_probe_points(const SpinConfig& cfg, unsigned seed = 20260810u) {
    std::vector<Vec3> pts = cfg.positions;
    for (std::size_t i = 0; i < cfg.positions.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.positions.size(); ++j)
            pts.push_back(0.5 * (cfg.positions[i] + cfg.positions[j]));
    Vec3 lo{0, 0, 0}, hi{0, 0, 0};
    if (!cfg.positions.empty()) {
        lo = hi = cfg.positions.front();
        for (const Vec3& x : cfg.positions)
            for (std::size_t c = 0; c < 3; ++c) {
                lo[c] = std::min(lo[c], x[c]);
                hi[c] = std::max(hi[c], x[c]);
            }
    }
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 8; ++i) {
        Vec3 c{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y), 0.5 * (lo.z + hi.z)};
        pts.push_back(c + Vec3{u(rng), u(rng), u(rng)});
    }
    return pts;
}

struct ResidualReport {
    double max_residual = 0.0;  // absolute, max over probes and interior times
    double scale = 1.0;         // characteristic magnitude of the balanced terms
    std::vector<double> t;      // interior record times
    std::vector<double> residual;

    double relative() const { return max_residual / std::max(scale, 1e-300); }
};

namespace detail {

// 4th-order time derivative on the recorded stride; index i must have two
// neighbors on each side.
template <typename Getter>
auto time_deriv(const std::vector<TrajectoryState>& rec, std::size_t i, double stride, Getter&& g)
    -> decltype(g(rec[0])) {
    return (-1.0 * g(rec[i + 2]) + 8.0 * g(rec[i + 1]) - 8.0 * g(rec[i - 1]) + g(rec[i - 2])) *
           (1.0 / (12.0 * stride));
}

// finite-difference analysis needs >= 5 records on a uniform stride
inline double checked_stride(const std::vector<TrajectoryState>& rec, const char* who) {
    if (rec.size() < 5) throw std::invalid_argument(std::string(who) + ": need >= 5 records");
    const double stride = rec[1].t - rec[0].t;
    for (std::size_t i = 1; i + 1 < rec.size(); ++i)
        if (std::abs(rec[i + 1].t - rec[i].t - stride) > 1e-9 * std::max(1.0, std::abs(stride)))
            throw std::invalid_argument(std::string(who) + ": records are not uniformly spaced");
    return stride;
}

}  // namespace detail

// || d/dt B^appr + rot E^appr || over probes and interior record times.
inline ResidualReport maxwell_residual_B(const System& sys, const std::vector<TrajectoryState>& rec,
                                         const std::vector<Vec3>& probes, double dx) {
    const double stride = detail::checked_stride(rec, "maxwell_residual_B");
    ResidualReport rep;
    rep.scale = 0.0;
    for (std::size_t i = 2; i + 2 < rec.size(); ++i) {
        double worst = 0.0;
        for (const Vec3& x : probes) {
            const Vec3 dBdt = detail::time_deriv(rec, i, stride,
                                                 [&](const TrajectoryState& s) { return field_B(sys, s.X, x); });
            const Vec3 rotE = fd::curl(
                [&](const Vec3& y) { return field_E(sys, rec[i].X, y); }, x, dx);
            worst = std::max(worst, norm(dBdt + rotE));
            rep.scale = std::max(rep.scale, std::max(norm(dBdt), norm(rotE)));
        }
        rep.t.push_back(rec[i].t);
        rep.residual.push_back(worst);
        rep.max_residual = std::max(rep.max_residual, worst);
    }
    if (rep.scale == 0.0) rep.scale = 1.0;
    return rep;
}

// Spin current entering the Ampere-law residual. The kernel computation
// fixes the orientation: the K_mn matrix built from the couplings equals
// the cross-product matrix of grad rho, so the current is
// h sum_lam grad rho(x - x_lam) x S^{[lam]}.
inline Vec3 spin_current(const System& sys, const std::vector<Vec3>& S, const Vec3& x, double h) {
    Vec3 out;
    for (std::size_t lam = 0; lam < S.size(); ++lam)
        out += h * cross(grad_rho(*sys.grid, sys.chi, x - sys.spins.positions[lam]), S[lam]);
    return out;
}

// || d/dt E^appr - rot B^appr - current || over probes and interior times.
inline ResidualReport maxwell_residual_E(const System& sys, const std::vector<TrajectoryState>& rec,
                                         const std::vector<Vec3>& probes, double dx) {
    const double stride = detail::checked_stride(rec, "maxwell_residual_E");
    ResidualReport rep;
    rep.scale = 0.0;
    for (std::size_t i = 2; i + 2 < rec.size(); ++i) {
        const std::vector<Vec3> S = spin_expectations(rec[i].a);
        double worst = 0.0;
        for (const Vec3& x : probes) {
            const Vec3 dEdt = detail::time_deriv(rec, i, stride,
                                                 [&](const TrajectoryState& s) { return field_E(sys, s.X, x); });
            const Vec3 rotB = fd::curl(
                [&](const Vec3& y) { return field_B(sys, rec[i].X, y); }, x, dx);
            const Vec3 cur = spin_current(sys, S, x, rec[i].h);
            worst = std::max(worst, norm(dEdt - rotB - cur));
            rep.scale = std::max({rep.scale, norm(dEdt), norm(rotB), norm(cur)});
        }
        rep.t.push_back(rec[i].t);
        rep.residual.push_back(worst);
        rep.max_residual = std::max(rep.max_residual, worst);
    }
    if (rep.scale == 0.0) rep.scale = 1.0;
    return rep;
}

// || d/dt S^{[lam]} - 2 (beta + B^appr(x_lam)) x S^{[lam]} ||, worst particle.
inline ResidualReport bloch_residual(const System& sys, const std::vector<TrajectoryState>& rec) {
    const double stride = detail::checked_stride(rec, "bloch_residual");
    ResidualReport rep;
    rep.scale = 0.0;
    for (std::size_t i = 2; i + 2 < rec.size(); ++i) {
        const std::vector<Vec3> S = spin_expectations(rec[i].a);
        double worst = 0.0;
        for (std::size_t lam = 0; lam < S.size(); ++lam) {
            const Vec3 dSdt = detail::time_deriv(rec, i, stride, [&](const TrajectoryState& s) {
                return spin_expectations(s.a)[lam];
            });
            const Vec3 Bx = field_B(sys, rec[i].X, sys.spins.positions[lam]);
            const Vec3 law = 2.0 * cross(sys.spins.beta + Bx, S[lam]);
            worst = std::max(worst, norm(dSdt - law));
            rep.scale = std::max({rep.scale, norm(dSdt), norm(law)});
        }
        rep.t.push_back(rec[i].t);
        rep.residual.push_back(worst);
        rep.max_residual = std::max(rep.max_residual, worst);
    }
    if (rep.scale == 0.0) rep.scale = 1.0;
    return rep;
}

// Direct form of the photon-number law: sum_lam,m B_m(x_lam, -p, q) S_m.
inline double photon_rate_direct(const System& sys, const PhaseSpacePoint& X, const SpinState& a) {
    const std::vector<Vec3> S = spin_expectations(a);
    double acc = 0.0;
    for (std::size_t lam = 0; lam < S.size(); ++lam)
        for (std::size_t m = 0; m < 3; ++m)
            acc += S[lam][m] * (inner(sys.couplings.b[lam][m], X.q) -
                                inner(sys.couplings.a[lam][m], X.p));
    return acc;
}

// Polarization-split form: sum_lam,j (E_j(x_lam, Pi_- X) - E_j(x_lam, Pi_+ X)) S_j.
inline double photon_rate_polarized(const System& sys, const PhaseSpacePoint& X, const SpinState& a) {
    const std::vector<Vec3> S = spin_expectations(a);
    const auto [plus, minus] = polarization_projectors(X);
    double acc = 0.0;
    for (std::size_t lam = 0; lam < S.size(); ++lam) {
        const Vec3 x = sys.spins.positions[lam];
        const Vec3 Em = field_E(sys, minus, x);
        const Vec3 Ep = field_E(sys, plus, x);
        for (std::size_t m = 0; m < 3; ++m) acc += (Em[m] - Ep[m]) * S[lam][m];
    }
    return acc;
}

struct PhotonLawReport {
    double max_fd_vs_direct = 0.0;        // dynamic residual, absolute
    double rate_scale = 1.0;              // max |direct form|
    double max_direct_vs_polarized = 0.0; // algebraic identity residual, relative
};

inline PhotonLawReport photon_number_law(const System& sys, const std::vector<TrajectoryState>& rec) {
    const double stride = detail::checked_stride(rec, "photon_number_law");
    PhotonLawReport rep;
    rep.rate_scale = 0.0;
    for (std::size_t i = 2; i + 2 < rec.size(); ++i) {
        const double fd_rate = detail::time_deriv(rec, i, stride,
                                                  [&](const TrajectoryState& s) { return photon_number(s); });
        const double direct = photon_rate_direct(sys, rec[i].X, rec[i].a);
        const double pol = photon_rate_polarized(sys, rec[i].X, rec[i].a);
        rep.max_fd_vs_direct = std::max(rep.max_fd_vs_direct, std::abs(fd_rate - direct));
        rep.rate_scale = std::max(rep.rate_scale, std::abs(direct));
        const double denom = std::max({std::abs(direct), std::abs(pol), 1e-300});
        rep.max_direct_vs_polarized = std::max(rep.max_direct_vs_polarized,
                                               std::abs(direct - pol) / denom);
    }
    if (rep.rate_scale == 0.0) rep.rate_scale = 1.0;
    return rep;
}

}  // namespace spinphoton
