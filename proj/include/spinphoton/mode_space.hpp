// Discretization of the transverse-field Hilbert space: k-space quadrature
// grid with per-node polarization frames, field vectors stored in those
// frames, the frequency multiplier M, helicity, circular-polarization
// projectors, spin-coupling vectors and the scalar kernels rho / grad rho.
//
// Transversality is structural: a field vector keeps only the two
// polarization amplitudes (c1, c2) per node, so k . f(k) = 0 always holds
// for the reconstructed 3-vector field.
#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cutoff.hpp"
#include "quadrature.hpp"
#include "vec3.hpp"

namespace spinphoton {

// Product quadrature grid: Gauss-Legendre in radius (with r^2 Jacobian
// folded into the weights) times Gauss(cos theta) x uniform(phi) on the
// sphere. The angular node set is antipodally symmetric, so odd-in-k
// integrands cancel exactly.
class KGrid {
  public:
    struct Node {
        Vec3 k;      // wave vector
        double omega;  // |k|
        double w;    // quadrature weight, includes r^2 Jacobian
        Vec3 e1, e2;  // polarization frame; (k/|k|, e1, e2) right-handed
    };

    static KGrid build(int radial_order, int angular_order, double r_min, double r_max) {
        if (radial_order < 2) throw std::invalid_argument("KGrid: radial_order must be >= 2");
        if (angular_order < 3) throw std::invalid_argument("KGrid: angular_order must be >= 3");
        if (r_min < 0.0 || r_min >= r_max)
            throw std::invalid_argument("KGrid: need 0 <= r_min < r_max");

        const Quadrature1D radial = gauss_legendre(radial_order, r_min, r_max);
        const Quadrature1D polar = gauss_legendre(angular_order);  // cos(theta)
        const int n_phi = 2 * angular_order;                       // even: antipodal closure
        const double w_phi = 2.0 * M_PI / n_phi;

        KGrid g;
        g.nodes_.reserve(radial.nodes.size() * polar.nodes.size() * static_cast<std::size_t>(n_phi));
        for (std::size_t ir = 0; ir < radial.nodes.size(); ++ir) {
            const double r = radial.nodes[ir];
            const double wr = radial.weights[ir] * r * r;
            for (std::size_t ic = 0; ic < polar.nodes.size(); ++ic) {
                const double c = polar.nodes[ic];
                const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
                for (int ip = 0; ip < n_phi; ++ip) {
                    const double phi = w_phi * (ip + 0.5);
                    Node n;
                    n.k = {r * s * std::cos(phi), r * s * std::sin(phi), r * c};
                    n.omega = r;
                    n.w = wr * polar.weights[ic] * w_phi;
                    make_frame(n);
                    g.nodes_.push_back(n);
                }
            }
        }
        g.r_min_ = r_min > 0.0 ? radial.nodes.front() : g.nodes_.front().omega;
        for (const Node& n : g.nodes_) g.r_min_ = std::min(g.r_min_, n.omega);
        return g;
    }

    std::size_t size() const { return nodes_.size(); }
    const Node& node(std::size_t i) const { return nodes_[i]; }
    double r_min() const { return r_min_; }

  private:
    // e1 = normalize(z x khat) with x-axis fallback near the poles,
    // e2 = khat x e1; deterministic and right-handed.
    static void make_frame(Node& n) {
        const Vec3 khat = normalized(n.k);
        Vec3 e1 = cross(Vec3{0.0, 0.0, 1.0}, khat);
        if (norm(e1) < 1e-8)
            e1 = {1.0, 0.0, 0.0};
        else
            e1 = normalized(e1);
        n.e1 = e1;
        n.e2 = cross(khat, e1);
    }

    std::vector<Node> nodes_;
    double r_min_ = 0.0;
};

// Element of the discretized transverse space: two real amplitudes per
// node, f(k_i) = c1 * e1_i + c2 * e2_i.
class FieldVector {
  public:
    FieldVector() = default;
    explicit FieldVector(const KGrid& g) : grid_(&g), c_(2 * g.size(), 0.0) {}

    const KGrid& grid() const { return *grid_; }
    bool empty() const { return grid_ == nullptr; }

    double c1(std::size_t i) const { return c_[2 * i]; }
    double c2(std::size_t i) const { return c_[2 * i + 1]; }
    double& c1(std::size_t i) { return c_[2 * i]; }
    double& c2(std::size_t i) { return c_[2 * i + 1]; }

    // Reconstructed 3-vector at node i.
    Vec3 at(std::size_t i) const {
        const KGrid::Node& n = grid_->node(i);
        return c1(i) * n.e1 + c2(i) * n.e2;
    }

    FieldVector& operator+=(const FieldVector& o) {
        check_same_grid(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    FieldVector& operator-=(const FieldVector& o) {
        check_same_grid(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    FieldVector& operator*=(double s) {
        for (double& v : c_) v *= s;
        return *this;
    }
    // this += s * o
    FieldVector& axpy(double s, const FieldVector& o) {
        check_same_grid(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += s * o.c_[i];
        return *this;
    }

    void check_same_grid(const FieldVector& o) const {
        if (grid_ != o.grid_) throw std::invalid_argument("FieldVector: grid mismatch");
    }

  private:
    const KGrid* grid_ = nullptr;
    std::vector<double> c_;
};

inline FieldVector operator+(FieldVector a, const FieldVector& b) { return a += b; }
inline FieldVector operator-(FieldVector a, const FieldVector& b) { return a -= b; }
inline FieldVector operator*(FieldVector a, double s) { return a *= s; }
inline FieldVector operator*(double s, FieldVector a) { return a *= s; }

// Discretized inner product of H: sum_i w_i f(k_i) . g(k_i).
inline double inner(const FieldVector& f, const FieldVector& g) {
    f.check_same_grid(g);
    const KGrid& gr = f.grid();
    double acc = 0.0;
    for (std::size_t i = 0; i < gr.size(); ++i)
        acc += gr.node(i).w * (f.c1(i) * g.c1(i) + f.c2(i) * g.c2(i));
    return acc;
}

inline double norm(const FieldVector& f) { return std::sqrt(inner(f, f)); }

// Multiplication by omega(k) = |k| and its inverse (bounded: r_min > 0).
inline FieldVector apply_M(const FieldVector& f) {
    FieldVector out = f;
    const KGrid& g = f.grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
        out.c1(i) *= g.node(i).omega;
        out.c2(i) *= g.node(i).omega;
    }
    return out;
}

inline FieldVector apply_M_inv(const FieldVector& f) {
    FieldVector out = f;
    const KGrid& g = f.grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
        out.c1(i) /= g.node(i).omega;
        out.c2(i) /= g.node(i).omega;
    }
    return out;
}

// Resolvent-type scaling f(k) / (|k| + shift), used by the perturbation
// series' second-order coefficient.
inline FieldVector apply_M_shifted_inv(const FieldVector& f, double shift) {
    FieldVector out = f;
    const KGrid& g = f.grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
        out.c1(i) /= g.node(i).omega + shift;
        out.c2(i) /= g.node(i).omega + shift;
    }
    return out;
}

// Helicity on one field: v(k) -> khat x v(k). On the transverse plane this
// is the +90 degree rotation (c1, c2) -> (-c2, c1) in a right-handed frame.
inline FieldVector helicity(const FieldVector& f) {
    FieldVector out(f.grid());
    for (std::size_t i = 0; i < f.grid().size(); ++i) {
        out.c1(i) = -f.c2(i);
        out.c2(i) = f.c1(i);
    }
    return out;
}

struct PhaseSpacePoint {
    FieldVector q, p;

    PhaseSpacePoint() = default;
    explicit PhaseSpacePoint(const KGrid& g) : q(g), p(g) {}
    PhaseSpacePoint(FieldVector q_, FieldVector p_) : q(std::move(q_)), p(std::move(p_)) {
        q.check_same_grid(p);
    }

    PhaseSpacePoint& operator+=(const PhaseSpacePoint& o) {
        q += o.q;
        p += o.p;
        return *this;
    }
    PhaseSpacePoint& operator-=(const PhaseSpacePoint& o) {
        q -= o.q;
        p -= o.p;
        return *this;
    }
    PhaseSpacePoint& operator*=(double s) {
        q *= s;
        p *= s;
        return *this;
    }
    PhaseSpacePoint& axpy(double s, const PhaseSpacePoint& o) {
        q.axpy(s, o.q);
        p.axpy(s, o.p);
        return *this;
    }
};

inline PhaseSpacePoint operator+(PhaseSpacePoint a, const PhaseSpacePoint& b) { return a += b; }
inline PhaseSpacePoint operator-(PhaseSpacePoint a, const PhaseSpacePoint& b) { return a -= b; }
inline PhaseSpacePoint operator*(PhaseSpacePoint a, double s) { return a *= s; }
inline PhaseSpacePoint operator*(double s, PhaseSpacePoint a) { return a *= s; }

inline double norm(const PhaseSpacePoint& X) {
    return std::sqrt(inner(X.q, X.q) + inner(X.p, X.p));
}

// J(q, p)(k) = (khat x q(k), khat x p(k)).
inline PhaseSpacePoint helicity_J(const PhaseSpacePoint& X) {
    return {helicity(X.q), helicity(X.p)};
}

// Circular-polarization projectors: with F(q,p) = (-p, q), the operator
// J^{-1} F is an involution and Pi_pm = (I +- J^{-1} F) / 2. Since
// J^{-1} = -J, this reads Pi_pm (q, p) = ((q +- J p) / 2, (p -+ J q) / 2),
// and F Pi_pm X = +- J Pi_pm X.
inline std::pair<PhaseSpacePoint, PhaseSpacePoint> polarization_projectors(const PhaseSpacePoint& X) {
    const FieldVector Jq = helicity(X.q);
    const FieldVector Jp = helicity(X.p);
    PhaseSpacePoint plus{(X.q + Jp) * 0.5, (X.p - Jq) * 0.5};
    PhaseSpacePoint minus{(X.q - Jp) * 0.5, (X.p + Jq) * 0.5};
    return {std::move(plus), std::move(minus)};
}

namespace detail {
inline constexpr double two_pi_pow_neg32() { return 0.06349363593424097;  /* (2 pi)^(-3/2) */ }
inline constexpr double two_pi_pow_neg3() { return 0.004031441804149937;  /* (2 pi)^(-3) */ }

// Frame components of khat x e_m:  (khat x e_m) = -(e2 . e_m) e1 + (e1 . e_m) e2.
inline void transverse_rot_components(const KGrid::Node& n, int m, double& a1, double& a2) {
    a1 = -n.e2[static_cast<std::size_t>(m - 1)];
    a2 = n.e1[static_cast<std::size_t>(m - 1)];
}

// Frame components of khat x (khat x e_m) = -(e_m - (khat.e_m) khat).
inline void transverse_proj_components(const KGrid::Node& n, int m, double& a1, double& a2) {
    a1 = -n.e1[static_cast<std::size_t>(m - 1)];
    a2 = -n.e2[static_cast<std::size_t>(m - 1)];
}
}  // namespace detail

// Coupling vectors of the magnetic-field symbol B_m(x, q, p) = a_m(x).q + b_m(x).p:
//   a_m(x)(k) = chi(|k|) |k|^{1/2} (2 pi)^{-3/2} sin(k.x) (k x e_m)/|k|,
//   b_m(x)(k) likewise with cos(k.x).
inline FieldVector coupling_a(const KGrid& g, const CutoffProfile& chi, const Vec3& x, int m) {
    if (m < 1 || m > 3) throw std::invalid_argument("coupling_a: m must be in {1,2,3}");
    FieldVector f(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const KGrid::Node& n = g.node(i);
        const double pref = chi(n.omega) * std::sqrt(n.omega) * detail::two_pi_pow_neg32() *
                            std::sin(dot(n.k, x));
        double a1, a2;
        detail::transverse_rot_components(n, m, a1, a2);
        f.c1(i) = pref * a1;
        f.c2(i) = pref * a2;
    }
    return f;
}

inline FieldVector coupling_b(const KGrid& g, const CutoffProfile& chi, const Vec3& x, int m) {
    if (m < 1 || m > 3) throw std::invalid_argument("coupling_b: m must be in {1,2,3}");
    FieldVector f(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const KGrid::Node& n = g.node(i);
        const double pref = chi(n.omega) * std::sqrt(n.omega) * detail::two_pi_pow_neg32() *
                            std::cos(dot(n.k, x));
        double a1, a2;
        detail::transverse_rot_components(n, m, a1, a2);
        f.c1(i) = pref * a1;
        f.c2(i) = pref * a2;
    }
    return f;
}

// Coupling vectors of the electric-field symbol E_m(x, q, p) =
// alpha_m(x).q + beta_m(x).p, with kernel k x (k x e_m) / |k|^2. These are
// the helicity images of a_m / b_m, so E_m(x, q, p) = -B_m(x, J(q, p)).
inline FieldVector coupling_alpha(const KGrid& g, const CutoffProfile& chi, const Vec3& x, int m) {
    if (m < 1 || m > 3) throw std::invalid_argument("coupling_alpha: m must be in {1,2,3}");
    FieldVector f(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const KGrid::Node& n = g.node(i);
        const double pref = chi(n.omega) * std::sqrt(n.omega) * detail::two_pi_pow_neg32() *
                            std::sin(dot(n.k, x));
        double a1, a2;
        detail::transverse_proj_components(n, m, a1, a2);
        f.c1(i) = pref * a1;
        f.c2(i) = pref * a2;
    }
    return f;
}

inline FieldVector coupling_beta(const KGrid& g, const CutoffProfile& chi, const Vec3& x, int m) {
    if (m < 1 || m > 3) throw std::invalid_argument("coupling_beta: m must be in {1,2,3}");
    FieldVector f(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const KGrid::Node& n = g.node(i);
        const double pref = chi(n.omega) * std::sqrt(n.omega) * detail::two_pi_pow_neg32() *
                            std::cos(dot(n.k, x));
        double a1, a2;
        detail::transverse_proj_components(n, m, a1, a2);
        f.c1(i) = pref * a1;
        f.c2(i) = pref * a2;
    }
    return f;
}

// rho(x) = (2 pi)^{-3} integral |chi(|k|)|^2 cos(k.x) dk
inline double rho(const KGrid& g, const CutoffProfile& chi, const Vec3& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const KGrid::Node& n = g.node(i);
        const double c = chi(n.omega);
        acc += n.w * c * c * std::cos(dot(n.k, x));
    }
    return acc * detail::two_pi_pow_neg3();
}

// grad rho(x) = -(2 pi)^{-3} integral |chi|^2 k sin(k.x) dk
inline Vec3 grad_rho(const KGrid& g, const CutoffProfile& chi, const Vec3& x) {
    Vec3 acc;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const KGrid::Node& n = g.node(i);
        const double c = chi(n.omega);
        acc += (-n.w * c * c * std::sin(dot(n.k, x))) * n.k;
    }
    return acc * detail::two_pi_pow_neg3();
}

// Free-field flow: per-node rotation by angle t |k| in the (q, p) plane.
inline PhaseSpacePoint free_rotation(const PhaseSpacePoint& X, double t) {
    const KGrid& g = X.q.grid();
    PhaseSpacePoint out(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double a = t * g.node(i).omega;
        const double c = std::cos(a), s = std::sin(a);
        out.q.c1(i) = c * X.q.c1(i) + s * X.p.c1(i);
        out.q.c2(i) = c * X.q.c2(i) + s * X.p.c2(i);
        out.p.c1(i) = -s * X.q.c1(i) + c * X.p.c1(i);
        out.p.c2(i) = -s * X.q.c2(i) + c * X.p.c2(i);
    }
    return out;
}

// Free photon energy H_ph(q, p) = (1/2) sum w |k| (|q(k)|^2 + |p(k)|^2).
inline double field_energy(const PhaseSpacePoint& X) {
    const KGrid& g = X.q.grid();
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const KGrid::Node& n = g.node(i);
        acc += n.w * n.omega *
               (X.q.c1(i) * X.q.c1(i) + X.q.c2(i) * X.q.c2(i) + X.p.c1(i) * X.p.c1(i) +
                X.p.c2(i) * X.p.c2(i));
    }
    return 0.5 * acc;
}

}  // namespace spinphoton
