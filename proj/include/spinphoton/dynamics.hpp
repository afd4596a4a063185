// Coupled field-spin dynamics: the Hamiltonian flow of (q, p) with the
// spinor lift of the coadjoint equation, an RK4 integrator formulated in
// the interaction picture (exact free rotation factored out, so the step
// size is not constrained by the largest mode frequency), a Strang
// splitting alternative, the action integral and conservation monitors.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mode_space.hpp"
#include "spin_algebra.hpp"

namespace spinphoton {

struct System {
    const KGrid* grid = nullptr;
    CutoffProfile chi;
    SpinConfig spins;
    ParticleCouplings couplings;

    static System build(const KGrid& g, const CutoffProfile& chi, const SpinConfig& cfg) {
        cfg.validate();
        System s;
        s.grid = &g;
        s.chi = chi;
        s.spins = cfg;
        s.couplings = ParticleCouplings::build(g, chi, cfg);
        return s;
    }
};

// H(q, p, omega) = H_ph(q, p) + h <T(q, p) a, a>.
inline double hamiltonian(const System& sys, const PhaseSpacePoint& X, const SpinState& a, double h) {
    const SpinState Ta = apply_T(X, sys.couplings, sys.spins, a);
    return field_energy(X) + h * inner(a, Ta).real();
}

struct TrajectoryState {
    double t = 0.0;
    PhaseSpacePoint X;
    SpinState a;
    double action = 0.0;  // accumulated phase integral
    double h = 1.0;       // semiclassical parameter
};

struct Derivative {
    PhaseSpacePoint dX;
    SpinState da;
    double dphi = 0.0;  // action integrand
};

// Interaction part of the field derivative; depends on the spin only.
inline PhaseSpacePoint interaction_field_deriv(const System& sys, const std::vector<Vec3>& S,
                                               double h) {
    PhaseSpacePoint G(*sys.grid);
    for (std::size_t lam = 0; lam < S.size(); ++lam)
        for (std::size_t m = 0; m < 3; ++m) {
            G.q.axpy(h * S[lam][m], sys.couplings.b[lam][m]);
            G.p.axpy(-h * S[lam][m], sys.couplings.a[lam][m]);
        }
    return G;
}

// Full right-hand side:
//   q' = M p + h sum b_m(x_lam) S_m^{[lam]}
//   p' = -M q - h sum a_m(x_lam) S_m^{[lam]}
//   a' = -i T a + i <T a, a> a / |a|^2
// plus the action integrand (1/2)(p.q' - q.p') - H.
inline Derivative rhs(const System& sys, const PhaseSpacePoint& X, const SpinState& a, double h) {
    Derivative d;
    const std::vector<Vec3> S = spin_expectations(a);
    d.dX = interaction_field_deriv(sys, S, h);
    d.dX.q += apply_M(X.p);
    d.dX.p -= apply_M(X.q);

    const SpinState Ta = apply_T(X, sys.couplings, sys.spins, a);
    const double mu = inner(a, Ta).real() / a.norm2();
    d.da = Ta * Complex{0.0, -1.0};
    d.da.axpy(Complex{0.0, mu}, a);

    const double hterm = field_energy(X) + h * inner(a, Ta).real();
    d.dphi = 0.5 * (inner(X.p, d.dX.q) - inner(X.q, d.dX.p)) - hterm;
    return d;
}

enum class Method { rk4_interaction_picture, strang_splitting };

struct IntegratorSpec {
    Method method = Method::rk4_interaction_picture;
    double dt = 1e-3;
    double t_final = 1.0;
    int record_every = 1;

    void validate() const {
        // negative dt runs the flow backwards (used by reversibility checks)
        if (dt == 0.0) throw std::invalid_argument("IntegratorSpec: dt must be nonzero");
        if (record_every < 1) throw std::invalid_argument("IntegratorSpec: record_every must be >= 1");
    }
};

namespace detail {

// Precomputed per-node cos/sin of angle t*|k|; applies the free rotation
// (or its inverse) without re-evaluating trig in the stage loop.
struct RotationTable {
    std::vector<double> c, s;

    static RotationTable make(const KGrid& g, double t) {
        RotationTable r;
        r.c.resize(g.size());
        r.s.resize(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            r.c[i] = std::cos(t * g.node(i).omega);
            r.s[i] = std::sin(t * g.node(i).omega);
        }
        return r;
    }

    PhaseSpacePoint apply(const PhaseSpacePoint& X, double sign) const {
        const KGrid& g = X.q.grid();
        PhaseSpacePoint out(g);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double cc = c[i], ss = sign * s[i];
            out.q.c1(i) = cc * X.q.c1(i) + ss * X.p.c1(i);
            out.q.c2(i) = cc * X.q.c2(i) + ss * X.p.c2(i);
            out.p.c1(i) = -ss * X.q.c1(i) + cc * X.p.c1(i);
            out.p.c2(i) = -ss * X.q.c2(i) + cc * X.p.c2(i);
        }
        return out;
    }
};

struct StageDeriv {
    PhaseSpacePoint kY;
    SpinState ka;
    double kphi;
};

// RK4 on the interaction-picture variable Y(tau) = chi_{-tau} X(t_n + tau),
// reset at every step. The free rotation is applied exactly; RK4 only sees
// the bounded coupling terms.
class Rk4Stepper {
  public:
    Rk4Stepper(const System& sys, double dt)
        : sys_(sys),
          dt_(dt),
          half_(RotationTable::make(*sys.grid, 0.5 * dt)),
          full_(RotationTable::make(*sys.grid, dt)) {}

    void advance(TrajectoryState& s) const {
        const double h = s.h;
        const StageDeriv k1 = eval(s.X, s.a, nullptr, h);

        PhaseSpacePoint Y2 = s.X;
        Y2.axpy(0.5 * dt_, k1.kY);
        SpinState a2 = s.a;
        a2.axpy(0.5 * dt_, k1.ka);
        const StageDeriv k2 = eval(Y2, a2, &half_, h);

        PhaseSpacePoint Y3 = s.X;
        Y3.axpy(0.5 * dt_, k2.kY);
        SpinState a3 = s.a;
        a3.axpy(0.5 * dt_, k2.ka);
        const StageDeriv k3 = eval(Y3, a3, &half_, h);

        PhaseSpacePoint Y4 = s.X;
        Y4.axpy(dt_, k3.kY);
        SpinState a4 = s.a;
        a4.axpy(dt_, k3.ka);
        const StageDeriv k4 = eval(Y4, a4, &full_, h);

        PhaseSpacePoint Y = s.X;
        Y.axpy(dt_ / 6.0, k1.kY);
        Y.axpy(dt_ / 3.0, k2.kY);
        Y.axpy(dt_ / 3.0, k3.kY);
        Y.axpy(dt_ / 6.0, k4.kY);
        s.X = full_.apply(Y, +1.0);

        s.a.axpy(dt_ / 6.0, k1.ka);
        s.a.axpy(dt_ / 3.0, k2.ka);
        s.a.axpy(dt_ / 3.0, k3.ka);
        s.a.axpy(dt_ / 6.0, k4.ka);

        s.action += dt_ / 6.0 * (k1.kphi + 2.0 * k2.kphi + 2.0 * k3.kphi + k4.kphi);
        s.t += dt_;
    }

  private:
    StageDeriv eval(const PhaseSpacePoint& Y, const SpinState& a, const RotationTable* rot,
                    double h) const {
        StageDeriv out;
        const PhaseSpacePoint X = rot ? rot->apply(Y, +1.0) : Y;
        const std::vector<Vec3> S = spin_expectations(a);
        const PhaseSpacePoint G = interaction_field_deriv(sys_, S, h);
        out.kY = rot ? rot->apply(G, -1.0) : G;

        const SpinState Ta = apply_T(X, sys_.couplings, sys_.spins, a);
        const double mu = inner(a, Ta).real() / a.norm2();
        out.ka = Ta * Complex{0.0, -1.0};
        out.ka.axpy(Complex{0.0, mu}, a);

        // action integrand at the stage point (q', p' = full field rhs)
        const double pqdot = inner(X.p, G.q) + inner(X.p, apply_M(X.p));
        const double qpdot = inner(X.q, G.p) - inner(X.q, apply_M(X.q));
        out.kphi = 0.5 * (pqdot - qpdot) - (field_energy(X) + h * inner(a, Ta).real());
        return out;
    }

    const System& sys_;
    double dt_;
    RotationTable half_, full_;
};

// Dense T(q, p) on the spin sector, for the splitting propagator.
inline Eigen::MatrixXcd dense_T(const System& sys, const PhaseSpacePoint& X) {
    const int n = sys.spins.n;
    const std::size_t dim = std::size_t{1} << n;
    std::vector<Vec3> v = field_at_particles(sys.couplings, X);
    for (Vec3& c : v) c += sys.spins.beta;
    Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim),
                                                static_cast<Eigen::Index>(dim));
    SpinState e(n);
    for (std::size_t j = 0; j < dim; ++j) {
        e[j] = 1.0;
        const SpinState col = apply_spin_field(v, e);
        for (std::size_t i = 0; i < dim; ++i) T(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
        e[j] = 0.0;
    }
    return T;
}

// Strang splitting: half free rotation, symmetric interaction substep
// (half field kick with frozen spin expectations, exact frozen-field spin
// propagation via eigen-decomposition, half kick), half free rotation.
class StrangStepper {
  public:
    StrangStepper(const System& sys, double dt)
        : sys_(sys), dt_(dt), half_(RotationTable::make(*sys.grid, 0.5 * dt)) {
        if (sys.spins.n > 10)
            throw std::invalid_argument("strang-splitting: dense spin propagator capped at N <= 10");
    }

    void advance(TrajectoryState& s) const {
        const double h = s.h;
        const double phi0 = action_integrand(s.X, s.a, h);

        s.X = half_.apply(s.X, +1.0);

        std::vector<Vec3> S = spin_expectations(s.a);
        s.X.axpy(0.5 * dt_, interaction_field_deriv(sys_, S, h));

        // frozen-field propagation: a <- e^{i dt mu} e^{-i dt T} a
        const Eigen::MatrixXcd T = dense_T(sys_, s.X);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(T);
        const std::size_t dim = s.a.dim();
        Eigen::VectorXcd av(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i) av(static_cast<Eigen::Index>(i)) = s.a[i];
        const double mu = av.dot(T * av).real() / av.squaredNorm();
        Eigen::VectorXcd w = es.eigenvectors().adjoint() * av;
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w(i) *= std::exp(Complex{0.0, -dt_ * es.eigenvalues()(i)});
        av = es.eigenvectors() * w;
        av *= std::exp(Complex{0.0, dt_ * mu});
        for (std::size_t i = 0; i < dim; ++i) s.a[i] = av(static_cast<Eigen::Index>(i));

        S = spin_expectations(s.a);
        s.X.axpy(0.5 * dt_, interaction_field_deriv(sys_, S, h));

        s.X = half_.apply(s.X, +1.0);
        s.t += dt_;
        s.action += 0.5 * dt_ * (phi0 + action_integrand(s.X, s.a, h));
    }

  private:
    double action_integrand(const PhaseSpacePoint& X, const SpinState& a, double h) const {
        const Derivative d = rhs(sys_, X, a, h);
        return d.dphi;
    }

    const System& sys_;
    double dt_;
    RotationTable half_;
};

}  // namespace detail

// One integrator step.
inline TrajectoryState step(const System& sys, TrajectoryState s, const IntegratorSpec& spec) {
    spec.validate();
    if (spec.method == Method::rk4_interaction_picture) {
        detail::Rk4Stepper st(sys, spec.dt);
        st.advance(s);
    } else {
        detail::StrangStepper st(sys, spec.dt);
        st.advance(s);
    }
    return s;
}

struct IntegrationResult {
    std::vector<TrajectoryState> states;   // recorded every record_every steps
    double max_energy_drift = 0.0;         // relative to max(|H(0)|, 1e-12)
    double max_norm_correction = 0.0;      // largest renormalization applied to a
};

// Integrates to t_final (rounded to a whole number of steps), recording
// every record_every steps. The spinor norm is re-unitized every 100 steps;
// corrections above 1e-10 are reported through max_norm_correction.
inline IntegrationResult integrate(const System& sys, TrajectoryState s0, const IntegratorSpec& spec) {
    spec.validate();
    IntegrationResult res;
    const long n_steps = std::lround(spec.t_final / spec.dt);
    const double H0 = hamiltonian(sys, s0.X, s0.a, s0.h);
    const double H_scale = std::max(std::abs(H0), 1e-12);

    res.states.push_back(s0);
    if (spec.method == Method::rk4_interaction_picture) {
        detail::Rk4Stepper st(sys, spec.dt);
        TrajectoryState s = std::move(s0);
        for (long i = 1; i <= n_steps; ++i) {
            st.advance(s);
            if (i % 100 == 0) {
                const double n = s.a.norm();
                res.max_norm_correction = std::max(res.max_norm_correction, std::abs(n - 1.0));
                s.a.normalize();
            }
            if (i % spec.record_every == 0 || i == n_steps) {
                res.max_energy_drift = std::max(
                    res.max_energy_drift, std::abs(hamiltonian(sys, s.X, s.a, s.h) - H0) / H_scale);
                res.states.push_back(s);
            }
        }
    } else {
        detail::StrangStepper st(sys, spec.dt);
        TrajectoryState s = std::move(s0);
        for (long i = 1; i <= n_steps; ++i) {
            st.advance(s);
            if (i % 100 == 0) {
                const double n = s.a.norm();
                res.max_norm_correction = std::max(res.max_norm_correction, std::abs(n - 1.0));
                s.a.normalize();
            }
            if (i % spec.record_every == 0 || i == n_steps) {
                res.max_energy_drift = std::max(
                    res.max_energy_drift, std::abs(hamiltonian(sys, s.X, s.a, s.h) - H0) / H_scale);
                res.states.push_back(s);
            }
        }
    }
    return res;
}

struct StabilityCurve {
    std::vector<double> t;
    std::vector<double> separation;  // |X1 - X2| + sum_lam |S1 - S2|
    double fitted_slope = 0.0;       // least-squares slope of log separation vs t
};

// Divergence of two nearby trajectories; confirms at-most-exponential
// growth by fitting the log-separation slope.
inline StabilityCurve stability_probe(const System& sys, const TrajectoryState& s1,
                                      const TrajectoryState& s2, const IntegratorSpec& spec) {
    const IntegrationResult r1 = integrate(sys, s1, spec);
    const IntegrationResult r2 = integrate(sys, s2, spec);
    StabilityCurve out;
    const std::size_t n = std::min(r1.states.size(), r2.states.size());
    for (std::size_t i = 0; i < n; ++i) {
        const TrajectoryState& u = r1.states[i];
        const TrajectoryState& v = r2.states[i];
        double sep = norm(u.X - v.X);
        const std::vector<Vec3> Su = spin_expectations(u.a);
        const std::vector<Vec3> Sv = spin_expectations(v.a);
        for (std::size_t lam = 0; lam < Su.size(); ++lam) sep += norm(Su[lam] - Sv[lam]);
        out.t.push_back(u.t);
        out.separation.push_back(sep);
    }
    // slope of log(sep) on the samples with sep > 0
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < out.t.size(); ++i) {
        if (out.separation[i] <= 0.0) continue;
        const double x = out.t[i], y = std::log(out.separation[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m >= 2 && sxx * m - sx * sx > 0.0)
        out.fitted_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return out;
}

}  // namespace spinphoton
