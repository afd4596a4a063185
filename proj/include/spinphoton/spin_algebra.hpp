// Finite-dimensional spin sector: tensor Pauli operators applied through
// bit arithmetic (the 2^N x 2^N matrices are never materialized), spin
// states, the field-spin coupling operator T(q, p) and the distinguished
// product eigenstates a_E of the constant-field term.
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mode_space.hpp"
#include "vec3.hpp"

namespace spinphoton {

using Complex = std::complex<double>;

class SpinState {
  public:
    SpinState() = default;
    explicit SpinState(int n_particles)
        : n_(n_particles), amps_(std::size_t{1} << n_particles, Complex{0.0, 0.0}) {
        if (n_particles < 0 || n_particles > 24)
            throw std::invalid_argument("SpinState: unsupported particle count");
    }

    int n_particles() const { return n_; }
    std::size_t dim() const { return amps_.size(); }
    Complex& operator[](std::size_t i) { return amps_[i]; }
    const Complex& operator[](std::size_t i) const { return amps_[i]; }

    SpinState& operator+=(const SpinState& o) {
        for (std::size_t i = 0; i < amps_.size(); ++i) amps_[i] += o.amps_[i];
        return *this;
    }
    SpinState& operator-=(const SpinState& o) {
        for (std::size_t i = 0; i < amps_.size(); ++i) amps_[i] -= o.amps_[i];
        return *this;
    }
    SpinState& operator*=(Complex s) {
        for (Complex& a : amps_) a *= s;
        return *this;
    }
    SpinState& axpy(Complex s, const SpinState& o) {
        for (std::size_t i = 0; i < amps_.size(); ++i) amps_[i] += s * o.amps_[i];
        return *this;
    }

    double norm2() const {
        double acc = 0.0;
        for (const Complex& a : amps_) acc += std::norm(a);
        return acc;
    }
    double norm() const { return std::sqrt(norm2()); }
    void normalize() {
        const double n = norm();
        if (n > 0.0)
            for (Complex& a : amps_) a /= n;
    }

  private:
    int n_ = 0;
    std::vector<Complex> amps_;
};

inline SpinState operator+(SpinState a, const SpinState& b) { return a += b; }
inline SpinState operator-(SpinState a, const SpinState& b) { return a -= b; }
inline SpinState operator*(SpinState a, Complex s) { return a *= s; }
inline SpinState operator*(Complex s, SpinState a) { return a *= s; }

// <u, v> = sum conj(u_i) v_i
inline Complex inner(const SpinState& u, const SpinState& v) {
    Complex acc{0.0, 0.0};
    for (std::size_t i = 0; i < u.dim(); ++i) acc += std::conj(u[i]) * v[i];
    return acc;
}

// sigma_m^{[lam]} a, with m in {1,2,3} and lam in {1..N}. Bit lam-1 of the
// amplitude index selects the local component; bit value 0 is the sigma_3
// eigenvector with eigenvalue +1.
inline SpinState apply_sigma(int m, int lam, const SpinState& a) {
    const int n = a.n_particles();
    if (m < 1 || m > 3) throw std::out_of_range("apply_sigma: m must be in {1,2,3}");
    if (lam < 1 || lam > n) throw std::out_of_range("apply_sigma: particle index out of range");
    const std::size_t mask = std::size_t{1} << (lam - 1);
    SpinState out(n);
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const bool up = !(i & mask);  // local |0>
        switch (m) {
            case 1:
                out[i] = a[i ^ mask];
                break;
            case 2:
                out[i] = up ? Complex{0.0, -1.0} * a[i ^ mask] : Complex{0.0, 1.0} * a[i ^ mask];
                break;
            case 3:
                out[i] = up ? a[i] : -a[i];
                break;
        }
    }
    return out;
}

// S_m^{[lam]} = <sigma_m^{[lam]} a, a>, one pass per particle.
inline std::vector<Vec3> spin_expectations(const SpinState& a) {
    const int n = a.n_particles();
    std::vector<Vec3> s(static_cast<std::size_t>(n));
    for (int lam = 1; lam <= n; ++lam) {
        const std::size_t mask = std::size_t{1} << (lam - 1);
        double s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (std::size_t i = 0; i < a.dim(); ++i) {
            if (i & mask) {
                s3 -= std::norm(a[i]);
                continue;
            }
            s3 += std::norm(a[i]);
            const Complex cr = std::conj(a[i]) * a[i | mask];
            s1 += 2.0 * cr.real();
            s2 += 2.0 * cr.imag();
        }
        s[static_cast<std::size_t>(lam - 1)] = {s1, s2, s3};
    }
    return s;
}

// sum_lam (v_lam . sigma)^{[lam]} a, the generic one-body spin operator.
inline SpinState apply_spin_field(const std::vector<Vec3>& v, const SpinState& a) {
    const int n = a.n_particles();
    if (v.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("apply_spin_field: coefficient count != N");
    SpinState out(n);
    for (int lam = 1; lam <= n; ++lam) {
        const std::size_t mask = std::size_t{1} << (lam - 1);
        const Vec3& c = v[static_cast<std::size_t>(lam - 1)];
        const Complex off_up{c.x, -c.y};   // <0| (v.sigma) |1>
        const Complex off_down{c.x, c.y};  // <1| (v.sigma) |0>
        for (std::size_t i = 0; i < a.dim(); ++i) {
            if (i & mask)
                out[i] += off_down * a[i ^ mask] - c.z * a[i];
            else
                out[i] += c.z * a[i] + off_up * a[i ^ mask];
        }
    }
    return out;
}

struct SpinConfig {
    int n = 0;
    std::vector<Vec3> positions;
    Vec3 beta{0.0, 0.0, 1.0};

    void validate() const {
        if (n < 0) throw std::invalid_argument("SpinConfig: N must be >= 0");
        if (positions.size() != static_cast<std::size_t>(n))
            throw std::invalid_argument("SpinConfig: positions count != N");
    }
};

// Eigenvectors b0, b1 of beta . sigma with eigenvalues -|beta|, +|beta|,
// phase fixed so the first nonvanishing component is real positive.
struct BetaEigenbasis {
    std::array<Complex, 2> b0, b1;

    static BetaEigenbasis make(const Vec3& beta) {
        const double b = norm(beta);
        if (b <= 0.0) throw std::invalid_argument("BetaEigenbasis: beta must be nonzero");
        BetaEigenbasis e;
        const Complex bp{beta.x, beta.y};   // beta_1 + i beta_2
        const Complex bm{beta.x, -beta.y};  // beta_1 - i beta_2
        // +|beta| eigenvector, picking the better-conditioned formula.
        if (beta.z >= 0.0)
            e.b1 = {Complex{b + beta.z, 0.0}, bp};
        else
            e.b1 = {bm, Complex{b - beta.z, 0.0}};
        // -|beta| eigenvector, orthogonal to b1.
        e.b0 = {-std::conj(e.b1[1]), std::conj(e.b1[0])};
        fix_phase(e.b0);
        fix_phase(e.b1);
        return e;
    }

  private:
    static void fix_phase(std::array<Complex, 2>& v) {
        const double n = std::sqrt(std::norm(v[0]) + std::norm(v[1]));
        Complex lead = std::abs(v[0]) > 1e-14 ? v[0] : v[1];
        const Complex phase = lead / std::abs(lead);
        v[0] /= n * phase;
        v[1] /= n * phase;
    }
};

// a_E = tensor product with factor b1 at particles in E and b0 elsewhere.
// E is a bitmask: bit lam-1 set <=> lam in E.
inline SpinState basis_state(std::uint32_t E, const Vec3& beta, int n_particles) {
    const BetaEigenbasis eb = BetaEigenbasis::make(beta);
    SpinState a(n_particles);
    for (std::size_t i = 0; i < a.dim(); ++i) {
        Complex amp{1.0, 0.0};
        for (int lam = 0; lam < n_particles; ++lam) {
            const std::size_t bit = (i >> lam) & 1;
            amp *= (E >> lam) & 1 ? eb.b1[bit] : eb.b0[bit];
        }
        a[i] = amp;
    }
    return a;
}

// Precomputed coupling vectors a_m(x_lam), b_m(x_lam) for all particles.
struct ParticleCouplings {
    std::vector<std::array<FieldVector, 3>> a, b;  // [lam][m-1]

    static ParticleCouplings build(const KGrid& g, const CutoffProfile& chi, const SpinConfig& cfg) {
        cfg.validate();
        ParticleCouplings pc;
        pc.a.reserve(cfg.positions.size());
        pc.b.reserve(cfg.positions.size());
        for (const Vec3& x : cfg.positions) {
            pc.a.push_back({coupling_a(g, chi, x, 1), coupling_a(g, chi, x, 2), coupling_a(g, chi, x, 3)});
            pc.b.push_back({coupling_b(g, chi, x, 1), coupling_b(g, chi, x, 2), coupling_b(g, chi, x, 3)});
        }
        return pc;
    }
};

// B_m(x_lam, q, p) for every particle and component.
inline std::vector<Vec3> field_at_particles(const ParticleCouplings& pc, const PhaseSpacePoint& X) {
    std::vector<Vec3> out(pc.a.size());
    for (std::size_t lam = 0; lam < pc.a.size(); ++lam)
        for (int m = 0; m < 3; ++m)
            out[lam][static_cast<std::size_t>(m)] =
                inner(pc.a[lam][static_cast<std::size_t>(m)], X.q) +
                inner(pc.b[lam][static_cast<std::size_t>(m)], X.p);
    return out;
}

// T(q, p) a = sum_lam sum_m (beta_m + B_m(x_lam, q, p)) sigma_m^{[lam]} a.
inline SpinState apply_T(const PhaseSpacePoint& X, const ParticleCouplings& pc,
                         const SpinConfig& cfg, const SpinState& a) {
    std::vector<Vec3> v = field_at_particles(pc, X);
    for (Vec3& c : v) c += cfg.beta;
    return apply_spin_field(v, a);
}

}  // namespace spinphoton
