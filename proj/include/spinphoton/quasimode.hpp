// Perturbation recursion on a truncated occupation-number Fock space
// tensored with the spin sector: the diagonal operator K1, the parity-
// switching Segal coupling K_{3/2}, the projected diagonal resolvent, the
// eigenvalue/quasimode series, exact residual norms (including components
// overflowing the sector cap), a dense operator oracle, and the first-order
// magnetic field of the quasimode evaluated through two independent routes.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "dynamics.hpp"
#include "mode_space.hpp"
#include "spin_algebra.hpp"
#include "stationary.hpp"

namespace spinphoton {

struct FockMode {
    std::uint32_t node = 0;  // grid node index
    int pol = 0;             // polarization component (0 or 1)
    double omega = 0.0;      // |k| at the node
    double weight = 0.0;     // coupling-strength ranking score
};

// Truncated symmetric Fock basis over a selected mode set, tensored with
// the spin eigenbasis {a_E} of the constant-field term. Occupations are
// sorted multisets of mode ids enumerated in graded order; mode amplitudes
// absorb sqrt(w) so the discrete Fock inner product is a plain sum and the
// ladder commutators stay exactly canonical.
class FockBasis {
  public:
    static constexpr int kMaxSector = 4;   // overflow keys need sector+1 slots
    static constexpr int kMaxModes = 4095; // 12-bit packing per occupation slot

    struct Occ {
        std::uint8_t n = 0;
        std::array<std::uint16_t, kMaxSector + 1> m{};  // sorted ascending, first n valid
    };

    // max_modes <= 0 keeps every grid mode; otherwise the max_modes modes
    // with the largest summed coupling weight are kept.
    static FockBasis build(const System& sys, int max_modes, int max_sector) {
        if (max_sector < 1 || max_sector > kMaxSector)
            throw std::invalid_argument("FockBasis: max_sector out of range");
        FockBasis fb;
        fb.n_particles_ = sys.spins.n;
        fb.spin_dim_ = std::size_t{1} << sys.spins.n;
        fb.beta_norm_ = norm(sys.spins.beta);
        fb.max_sector_ = max_sector;

        const KGrid& g = *sys.grid;
        const std::size_t all = 2 * g.size();
        std::vector<FockMode> modes(all);
        std::vector<std::vector<Complex>> amp(3 * static_cast<std::size_t>(sys.spins.n),
                                              std::vector<Complex>(all));
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int pol = 0; pol < 2; ++pol) {
                FockMode& md = modes[2 * i + static_cast<std::size_t>(pol)];
                md.node = static_cast<std::uint32_t>(i);
                md.pol = pol;
                md.omega = g.node(i).omega;
            }
        for (int lam = 0; lam < sys.spins.n; ++lam)
            for (int m = 0; m < 3; ++m) {
                const FieldVector& fa = sys.couplings.a[static_cast<std::size_t>(lam)][static_cast<std::size_t>(m)];
                const FieldVector& fbv = sys.couplings.b[static_cast<std::size_t>(lam)][static_cast<std::size_t>(m)];
                std::vector<Complex>& dst = amp[static_cast<std::size_t>(3 * lam + m)];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double sw = std::sqrt(g.node(i).w);
                    dst[2 * i] = sw * Complex{fa.c1(i), fbv.c1(i)};
                    dst[2 * i + 1] = sw * Complex{fa.c2(i), fbv.c2(i)};
                }
            }
        for (std::size_t j = 0; j < all; ++j) {
            double w = 0.0;
            for (const auto& a : amp) w += std::norm(a[j]);
            modes[j].weight = w;
        }

        std::vector<std::size_t> order(all);
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (max_modes > 0 && static_cast<std::size_t>(max_modes) < all)
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return modes[a].weight > modes[b].weight;
            });
        const std::size_t keep = max_modes > 0
                                     ? std::min<std::size_t>(static_cast<std::size_t>(max_modes), all)
                                     : all;
        if (keep > kMaxModes)
            throw std::invalid_argument("FockBasis: mode count exceeds packing limit (4095)");

        fb.modes_.reserve(keep);
        fb.g_.assign(amp.size(), {});
        for (auto& v : fb.g_) v.resize(keep);
        for (std::size_t r = 0; r < keep; ++r) {
            const std::size_t j = order[r];
            fb.modes_.push_back(modes[j]);
            for (std::size_t c = 0; c < amp.size(); ++c) fb.g_[c][r] = amp[c][j];
        }

        fb.enumerate_occupations();
        if (sys.spins.n > 0) {
            const BetaEigenbasis eb = BetaEigenbasis::make(sys.spins.beta);
            // R_m(row, col) = <b_row, sigma_m b_col> on the (b0, b1) basis
            const std::array<std::array<std::array<Complex, 2>, 2>, 3> pauli{{
                {{{Complex{0, 0}, Complex{1, 0}}, {Complex{1, 0}, Complex{0, 0}}}},
                {{{Complex{0, 0}, Complex{0, -1}}, {Complex{0, 1}, Complex{0, 0}}}},
                {{{Complex{1, 0}, Complex{0, 0}}, {Complex{0, 0}, Complex{-1, 0}}}},
            }};
            const std::array<std::array<Complex, 2>, 2> b{eb.b0, eb.b1};
            for (int m = 0; m < 3; ++m)
                for (int row = 0; row < 2; ++row)
                    for (int col = 0; col < 2; ++col) {
                        Complex acc{0.0, 0.0};
                        for (int i = 0; i < 2; ++i)
                            for (int j = 0; j < 2; ++j)
                                acc += std::conj(b[static_cast<std::size_t>(row)][static_cast<std::size_t>(i)]) *
                                       pauli[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                                       b[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)];
                        fb.sigma_[static_cast<std::size_t>(m)][static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] = acc;
                    }
        }
        return fb;
    }

    int n_modes() const { return static_cast<int>(modes_.size()); }
    const FockMode& mode(int j) const { return modes_[static_cast<std::size_t>(j)]; }
    double mode_omega(int j) const { return modes_[static_cast<std::size_t>(j)].omega; }
    int max_sector() const { return max_sector_; }
    int n_particles() const { return n_particles_; }
    std::size_t spin_dim() const { return spin_dim_; }
    double beta_norm() const { return beta_norm_; }

    std::size_t occ_count() const { return occs_.size(); }
    const Occ& occ(std::size_t i) const { return occs_[i]; }
    int sector(std::size_t occ_idx) const { return occs_[occ_idx].n; }
    std::size_t dim() const { return occs_.size() * spin_dim_; }

    // coupling amplitude of mode j in a_m(x_lam) + i b_m(x_lam); lam, m 0-based
    Complex coupling(int lam, int m, int j) const {
        return g_[static_cast<std::size_t>(3 * lam + m)][static_cast<std::size_t>(j)];
    }
    const std::vector<Complex>& coupling_vector(int lam, int m) const {
        return g_[static_cast<std::size_t>(3 * lam + m)];
    }

    Complex sigma_elem(int m, int row, int col) const {
        return sigma_[static_cast<std::size_t>(m)][static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
    }

    static std::uint64_t pack(const Occ& o) {
        std::uint64_t key = 0;
        for (int i = 0; i < o.n; ++i)
            key |= (static_cast<std::uint64_t>(o.m[static_cast<std::size_t>(i)]) + 1) << (12 * i);
        return key;
    }

    // index of an occupation, or -1 when it lies beyond max_sector
    std::int64_t occ_index(const Occ& o) const {
        const auto it = index_.find(pack(o));
        return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
    }

    // dGamma(M) + T0 eigenvalue on basis element (occ, s)
    double k1_eigenvalue(std::size_t occ_idx, std::size_t s) const {
        double e = (2.0 * static_cast<double>(std::popcount(s)) - n_particles_) * beta_norm_;
        const Occ& o = occs_[occ_idx];
        for (int i = 0; i < o.n; ++i) e += modes_[o.m[static_cast<std::size_t>(i)]].omega;
        return e;
    }

    // resolvent denominator sum |k_i| + 2 |beta| |E|; zero only on the vacuum
    double resolvent_denominator(std::size_t occ_idx, std::size_t s) const {
        double e = 2.0 * static_cast<double>(std::popcount(s)) * beta_norm_;
        const Occ& o = occs_[occ_idx];
        for (int i = 0; i < o.n; ++i) e += modes_[o.m[static_cast<std::size_t>(i)]].omega;
        return e;
    }

  private:
    void enumerate_occupations() {
        occs_.clear();
        Occ cur;
        // graded order: sector 0, 1, ..., max_sector; lexicographic within
        for (int s = 0; s <= max_sector_; ++s) emit_sector(cur, 0, s);
        index_.reserve(occs_.size() * 2);
        for (std::size_t i = 0; i < occs_.size(); ++i) index_[pack(occs_[i])] = i;
    }

    void emit_sector(Occ& cur, int start, int remaining) {
        if (remaining == 0) {
            occs_.push_back(cur);
            return;
        }
        for (int j = start; j < n_modes(); ++j) {
            cur.m[cur.n++] = static_cast<std::uint16_t>(j);
            emit_sector(cur, j, remaining - 1);
            --cur.n;
        }
    }

    std::vector<FockMode> modes_;
    std::vector<std::vector<Complex>> g_;  // [3*lam + m][mode]
    std::array<std::array<std::array<Complex, 2>, 2>, 3> sigma_{};
    std::vector<Occ> occs_;
    std::unordered_map<std::uint64_t, std::size_t> index_;
    std::size_t spin_dim_ = 1;
    int n_particles_ = 0;
    int max_sector_ = 0;
    double beta_norm_ = 0.0;
};

struct FockVector {
    std::vector<Complex> amps;

    FockVector() = default;
    explicit FockVector(const FockBasis& b) : amps(b.dim(), Complex{0.0, 0.0}) {}

    FockVector& axpy(Complex s, const FockVector& o) {
        for (std::size_t i = 0; i < amps.size(); ++i) amps[i] += s * o.amps[i];
        return *this;
    }
    FockVector& operator*=(Complex s) {
        for (Complex& a : amps) a *= s;
        return *this;
    }
    double norm2() const {
        double acc = 0.0;
        for (const Complex& a : amps) acc += std::norm(a);
        return acc;
    }
    double norm() const { return std::sqrt(norm2()); }
};

inline Complex inner(const FockVector& u, const FockVector& v) {
    Complex acc{0.0, 0.0};
    for (std::size_t i = 0; i < u.amps.size(); ++i) acc += std::conj(u.amps[i]) * v.amps[i];
    return acc;
}

// Amplitudes pushed past the sector cap by a creation operator, keyed by
// (packed occupation, spin index). Orthogonal to every in-basis state, so
// norms simply add.
struct OverflowVector {
    struct KeyHash {
        std::size_t operator()(const std::pair<std::uint64_t, std::uint32_t>& k) const {
            return std::hash<std::uint64_t>()(k.first * 0x9e3779b97f4a7c15ull ^ k.second);
        }
    };
    std::unordered_map<std::pair<std::uint64_t, std::uint32_t>, Complex, KeyHash> amps;

    double norm2() const {
        double acc = 0.0;
        for (const auto& kv : amps) acc += std::norm(kv.second);
        return acc;
    }
};

// K1 = dGamma(M) (x) I + I (x) T0: diagonal in this basis.
inline FockVector apply_K1(const FockBasis& b, const FockVector& v) {
    FockVector out(b);
    const std::size_t sd = b.spin_dim();
    for (std::size_t o = 0; o < b.occ_count(); ++o)
        for (std::size_t s = 0; s < sd; ++s)
            out.amps[o * sd + s] = b.k1_eigenvalue(o, s) * v.amps[o * sd + s];
    return out;
}

// sigma_m^{[lam]} acting on the spin index expressed in the a_E basis
// (m, lam 0-based here).
inline FockVector apply_spin_sigma(const FockBasis& b, int m, int lam, const FockVector& v) {
    FockVector out(b);
    const std::size_t sd = b.spin_dim();
    const std::size_t mask = std::size_t{1} << lam;
    for (std::size_t o = 0; o < b.occ_count(); ++o) {
        const std::size_t base = o * sd;
        for (std::size_t s = 0; s < sd; ++s) {
            const Complex a = v.amps[base + s];
            if (a == Complex{0.0, 0.0}) continue;
            const int col = static_cast<int>((s >> lam) & 1);
            for (int row = 0; row < 2; ++row) {
                const Complex f = b.sigma_elem(m, row, col);
                if (f == Complex{0.0, 0.0}) continue;
                const std::size_t s_out = (static_cast<std::size_t>(row) == ((s >> lam) & 1))
                                              ? s
                                              : (s ^ mask);
                out.amps[base + s_out] += f * a;
            }
        }
    }
    return out;
}

struct K32Result {
    FockVector in_basis;
    OverflowVector overflow;
};

namespace detail {

// out += Phi_S(g) (x) I applied to v, with Phi_S(g) = (a*(g) + a(g)) / sqrt(2).
inline void segal_accumulate(const FockBasis& b, const std::vector<Complex>& g,
                             const FockVector& v, FockVector& out, OverflowVector* ovf) {
    const std::size_t sd = b.spin_dim();
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const int D = b.n_modes();
    for (std::size_t o = 0; o < b.occ_count(); ++o) {
        const std::size_t base = o * sd;
        bool active = false;
        for (std::size_t s = 0; s < sd; ++s)
            if (v.amps[base + s] != Complex{0.0, 0.0}) {
                active = true;
                break;
            }
        if (!active) continue;
        const FockBasis::Occ& occ = b.occ(o);

        // annihilation: distinct occupied modes with multiplicity
        for (int i = 0; i < occ.n;) {
            const std::uint16_t j = occ.m[static_cast<std::size_t>(i)];
            int mult = 0;
            while (i < occ.n && occ.m[static_cast<std::size_t>(i)] == j) {
                ++mult;
                ++i;
            }
            FockBasis::Occ lower;
            lower.n = static_cast<std::uint8_t>(occ.n - 1);
            int w = 0;
            bool removed = false;
            for (int r = 0; r < occ.n; ++r) {
                if (!removed && occ.m[static_cast<std::size_t>(r)] == j) {
                    removed = true;
                    continue;
                }
                lower.m[static_cast<std::size_t>(w++)] = occ.m[static_cast<std::size_t>(r)];
            }
            const std::int64_t tgt = b.occ_index(lower);
            const Complex f = std::conj(g[j]) * std::sqrt(static_cast<double>(mult)) * inv_sqrt2;
            if (f == Complex{0.0, 0.0}) continue;
            for (std::size_t s = 0; s < sd; ++s)
                out.amps[static_cast<std::size_t>(tgt) * sd + s] += f * v.amps[base + s];
        }

        // creation: every mode with a nonzero amplitude in g
        const bool fits = occ.n < b.max_sector();
        if (!fits && ovf == nullptr) continue;
        for (int j = 0; j < D; ++j) {
            const Complex gj = g[static_cast<std::size_t>(j)];
            if (gj == Complex{0.0, 0.0}) continue;
            int mult = 0;
            for (int r = 0; r < occ.n; ++r)
                if (occ.m[static_cast<std::size_t>(r)] == j) ++mult;
            FockBasis::Occ upper;
            upper.n = static_cast<std::uint8_t>(occ.n + 1);
            int w = 0, r = 0;
            while (r < occ.n && occ.m[static_cast<std::size_t>(r)] < j)
                upper.m[static_cast<std::size_t>(w++)] = occ.m[static_cast<std::size_t>(r++)];
            upper.m[static_cast<std::size_t>(w++)] = static_cast<std::uint16_t>(j);
            while (r < occ.n) upper.m[static_cast<std::size_t>(w++)] = occ.m[static_cast<std::size_t>(r++)];
            const Complex f = gj * std::sqrt(static_cast<double>(mult + 1)) * inv_sqrt2;
            if (fits) {
                const std::int64_t tgt = b.occ_index(upper);
                for (std::size_t s = 0; s < sd; ++s)
                    out.amps[static_cast<std::size_t>(tgt) * sd + s] += f * v.amps[base + s];
            } else {
                const std::uint64_t key = FockBasis::pack(upper);
                for (std::size_t s = 0; s < sd; ++s) {
                    const Complex add = f * v.amps[base + s];
                    if (add != Complex{0.0, 0.0})
                        ovf->amps[{key, static_cast<std::uint32_t>(s)}] += add;
                }
            }
        }
    }
}

}  // namespace detail

// K_{3/2} = sum_lam sum_m Phi_S(a_m(x_lam) + i b_m(x_lam)) (x) sigma_m^{[lam]}.
// Creation amplitudes beyond max_sector are returned in the overflow
// component (skipped entirely when with_overflow is false).
inline K32Result apply_K32(const FockBasis& b, const FockVector& v, bool with_overflow = true) {
    K32Result res;
    res.in_basis = FockVector(b);
    for (int lam = 0; lam < b.n_particles(); ++lam)
        for (int m = 0; m < 3; ++m) {
            const FockVector w = apply_spin_sigma(b, m, lam, v);
            detail::segal_accumulate(b, b.coupling_vector(lam, m), w, res.in_basis,
                                     with_overflow ? &res.overflow : nullptr);
        }
    return res;
}

// (K1 - lambda_1)^{-1} (f - Pi f): componentwise division by
// sum |k_i| + 2 |beta| |E|, with the vacuum (x) a_empty component projected out.
inline FockVector resolvent_solve(const FockBasis& b, const FockVector& f) {
    FockVector out(b);
    const std::size_t sd = b.spin_dim();
    for (std::size_t o = 0; o < b.occ_count(); ++o)
        for (std::size_t s = 0; s < sd; ++s) {
            const std::size_t idx = o * sd + s;
            if (idx == 0) continue;  // Pi f component
            out.amps[idx] = f.amps[idx] / b.resolvent_denominator(o, s);
        }
    return out;
}

struct QuasimodeSeries {
    std::vector<FockVector> u;   // u[j], j = 0 .. 2 p_max + 1
    std::vector<double> lambda;  // lambda[j-1] = lambda_j, j = 1 .. p_max + 1
};

// Recursion for the eigenvalue/quasimode series. Needs max_sector >=
// 2 p_max + 1 (u_j occupies sectors of parity j up to j); residual norms
// past the cap are recovered exactly through the overflow component.
inline QuasimodeSeries quasimode_series(const FockBasis& b, int p_max) {
    if (p_max < 0) throw std::invalid_argument("quasimode_series: p_max must be >= 0");
    if (b.max_sector() < 2 * p_max + 1)
        throw std::invalid_argument("quasimode_series: insufficient max_sector");

    QuasimodeSeries s;
    s.u.emplace_back(b);
    s.u[0].amps[0] = 1.0;  // vacuum (x) a_empty
    s.lambda.push_back(-static_cast<double>(b.n_particles()) * b.beta_norm());

    // u_1 solves (K1 - lambda_1) u_1 + K_{3/2} u_0 = 0
    FockVector r = apply_K32(b, s.u[0], false).in_basis;
    FockVector u1 = resolvent_solve(b, r);
    u1 *= Complex{-1.0, 0.0};
    s.u.push_back(std::move(u1));

    for (int p = 0; p < p_max; ++p) {
        // f_{2p+2} = -K_{3/2} u_{2p+1} + lambda_2 u_{2p} + ... + lambda_{p+1} u_2
        FockVector f = apply_K32(b, s.u[static_cast<std::size_t>(2 * p + 1)], false).in_basis;
        f *= Complex{-1.0, 0.0};
        for (int i = 2; i <= p + 1; ++i)
            f.axpy(Complex{s.lambda[static_cast<std::size_t>(i - 1)], 0.0},
                   s.u[static_cast<std::size_t>(2 * (p - i + 2))]);

        const Complex lam_next = -f.amps[0];  // -<f, u_0>
        s.lambda.push_back(lam_next.real());

        FockVector rhs2 = f;
        rhs2.amps[0] += lam_next.real();  // f + lambda_{p+2} u_0
        s.u.push_back(resolvent_solve(b, rhs2));

        // f_{2p+3} = -K_{3/2} u_{2p+2} + lambda_2 u_{2p+1} + ... + lambda_{p+2} u_1
        FockVector f3 = apply_K32(b, s.u[static_cast<std::size_t>(2 * p + 2)], false).in_basis;
        f3 *= Complex{-1.0, 0.0};
        for (int i = 2; i <= p + 2; ++i)
            f3.axpy(Complex{s.lambda[static_cast<std::size_t>(i - 1)], 0.0},
                    s.u[static_cast<std::size_t>(2 * p + 3 - 2 * (i - 1))]);
        s.u.push_back(resolvent_solve(b, f3));
    }
    return s;
}

// Second-order eigenvalue coefficient straight from u_1; needs only
// max_sector >= 1, so it stays cheap on a full-grid mode set where it can
// be compared against the closed-form quadrature at matching resolution.
inline double lambda2_via_recursion(const FockBasis& b) {
    FockVector u0(b);
    u0.amps[0] = 1.0;
    FockVector u1 = resolvent_solve(b, apply_K32(b, u0, false).in_basis);
    u1 *= Complex{-1.0, 0.0};
    // lambda_2 = -<f_2, u_0> with f_2 = -K_{3/2} u_1
    return apply_K32(b, u1, false).in_basis.amps[0].real();
}

enum class ResidualForm {
    even_sum,  // trial vector sum_{j <= 2p} u_j h^{j/2}; bound O(h^{p + 3/2})
    odd_sum,   // trial vector sum_{j <= 2p+1};          bound O(h^{p + 2})
};

// Exact norm of (K(h) - (lambda_1 h + ... + lambda_{p+1} h^{p+1})) v(h),
// K(h) = h K1 + h^{3/2} K_{3/2}, with sector-overflow components included.
inline double residual_norm(const FockBasis& b, const QuasimodeSeries& s, int p, double h,
                            ResidualForm form = ResidualForm::odd_sum) {
    const int j_max = form == ResidualForm::odd_sum ? 2 * p + 1 : 2 * p;
    if (static_cast<std::size_t>(j_max) >= s.u.size() ||
        static_cast<std::size_t>(p + 1) > s.lambda.size())
        throw std::invalid_argument("residual_norm: series too short for requested order");

    FockVector v(b);
    for (int j = 0; j <= j_max; ++j)
        v.axpy(Complex{std::pow(h, 0.5 * j), 0.0}, s.u[static_cast<std::size_t>(j)]);

    double lam_h = 0.0;
    for (int j = 1; j <= p + 1; ++j)
        lam_h += s.lambda[static_cast<std::size_t>(j - 1)] * std::pow(h, j);

    const FockVector k1v = apply_K1(b, v);
    K32Result k32v = apply_K32(b, v, true);

    FockVector r(b);
    r.axpy(Complex{h, 0.0}, k1v);
    r.axpy(Complex{std::pow(h, 1.5), 0.0}, k32v.in_basis);
    r.axpy(Complex{-lam_h, 0.0}, v);
    return std::sqrt(r.norm2() + std::pow(h, 3.0) * k32v.overflow.norm2());
}

// Norm of the trial vector used by residual_norm (variational bound denominator).
inline double trial_norm(const FockBasis& b, const QuasimodeSeries& s, int p, double h,
                         ResidualForm form = ResidualForm::odd_sum) {
    const int j_max = form == ResidualForm::odd_sum ? 2 * p + 1 : 2 * p;
    if (static_cast<std::size_t>(j_max) >= s.u.size())
        throw std::invalid_argument("trial_norm: series too short for requested order");
    FockVector v(b);
    for (int j = 0; j <= j_max; ++j)
        v.axpy(Complex{std::pow(h, 0.5 * j), 0.0}, s.u[static_cast<std::size_t>(j)]);
    return v.norm();
}

// Dense compression of K(h) onto the truncated basis; hermitian by
// construction. Memory-guarded: meant for small oracle scenarios.
inline Eigen::MatrixXcd exact_operator_oracle(const FockBasis& b, double h,
                                              std::size_t dim_guard = 4096) {
    const std::size_t n = b.dim();
    if (n > dim_guard) throw std::invalid_argument("exact_operator_oracle: dimension guard exceeded");
    Eigen::MatrixXcd K(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const double h32 = std::pow(h, 1.5);
    FockVector e(b);
    for (std::size_t j = 0; j < n; ++j) {
        e.amps[j] = 1.0;
        const FockVector k1 = apply_K1(b, e);
        const FockVector k32 = apply_K32(b, e, false).in_basis;
        for (std::size_t i = 0; i < n; ++i)
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                h * k1.amps[i] + h32 * k32.amps[i];
        e.amps[j] = 0.0;
    }
    return K;
}

struct FirstOrderField {
    Vec3 B_fock;        // quadratic form of the field operator on u_0 + sqrt(h) u_1
    Vec3 B_quadrature;  // independent direct quadrature of the closed-form integral
    double E_form_max;  // electric-field quadratic form (vanishes by parity)
};

// First-order magnetic field of the quasimode at point x, computed through
// the Fock representation and through the closed-form k-space integral.
// Requires beta aligned with the z axis (the closed form is written in
// that frame).
inline FirstOrderField first_order_field(const System& sys, const FockBasis& b,
                                         const QuasimodeSeries& s, const Vec3& x, double h) {
    const Vec3 bhat = normalized(sys.spins.beta);
    if (std::abs(bhat.x) > 1e-12 || std::abs(bhat.y) > 1e-12 || bhat.z < 0.0)
        throw std::invalid_argument("first_order_field: beta must point along +z");
    if (s.u.size() < 2) throw std::invalid_argument("first_order_field: series must include u_1");

    FockVector z(b);
    z.axpy(Complex{1.0, 0.0}, s.u[0]);
    z.axpy(Complex{std::sqrt(h), 0.0}, s.u[1]);

    const KGrid& g = *sys.grid;
    FirstOrderField out{};
    out.E_form_max = 0.0;
    for (int m = 1; m <= 3; ++m) {
        // mode amplitudes of a_m(x) + i b_m(x) and alpha_m(x) + i beta_m(x)
        const FieldVector fa = coupling_a(g, sys.chi, x, m);
        const FieldVector fb = coupling_b(g, sys.chi, x, m);
        const FieldVector fal = coupling_alpha(g, sys.chi, x, m);
        const FieldVector fbe = coupling_beta(g, sys.chi, x, m);
        std::vector<Complex> gB(static_cast<std::size_t>(b.n_modes()));
        std::vector<Complex> gE(static_cast<std::size_t>(b.n_modes()));
        for (int j = 0; j < b.n_modes(); ++j) {
            const FockMode& md = b.mode(j);
            const double sw = std::sqrt(g.node(md.node).w);
            if (md.pol == 0) {
                gB[static_cast<std::size_t>(j)] = sw * Complex{fa.c1(md.node), fb.c1(md.node)};
                gE[static_cast<std::size_t>(j)] = sw * Complex{fal.c1(md.node), fbe.c1(md.node)};
            } else {
                gB[static_cast<std::size_t>(j)] = sw * Complex{fa.c2(md.node), fb.c2(md.node)};
                gE[static_cast<std::size_t>(j)] = sw * Complex{fal.c2(md.node), fbe.c2(md.node)};
            }
        }
        FockVector Bz(b), Ez(b);
        detail::segal_accumulate(b, gB, z, Bz, nullptr);
        detail::segal_accumulate(b, gE, z, Ez, nullptr);
        const double sqrt_h = std::sqrt(h);
        out.B_fock[static_cast<std::size_t>(m - 1)] = sqrt_h * inner(z, Bz).real();
        out.E_form_max = std::max(out.E_form_max, std::abs(sqrt_h * inner(z, Ez).real()));

        // closed form: h (2 pi)^{-3} sum_lam integral |chi|^2 cos(k.(x - x_lam))
        //              (k x e_m).(k x e_3) / |k|^2 dk
        double quad = 0.0;
        for (const Vec3& xl : sys.spins.positions)
            quad += detail::coupling_kernel_quadrature(g, sys.chi, x - xl, m, 3, 0.0);
        out.B_quadrature[static_cast<std::size_t>(m - 1)] = h * quad;
    }
    return out;
}

}  // namespace spinphoton
