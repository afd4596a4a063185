// Radial cutoff profiles chi(|k|) entering the field-coupling kernels.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace spinphoton {

enum class CutoffKind {
    zero,           // chi == 0: decoupled field (free photons + bare spin precession)
    ring_gaussian,  // vanishes for r <= rho_cut, Gaussian decay at large r
    plateau,        // chi(r) = bump(r * eps); == 1 near 0, supported in r < 1/eps
};

// Smooth plateau bump: 1 on [0, 0.05], 0 on [1, inf), C-infinity in
// between. The rolloff is a Gaussian-core profile spread over the whole
// transition (endpoint factors keep every derivative zero at both ends).
// A short plateau with a wide rolloff keeps the Fourier tail of d(phi^2)
// small at the phases |x|/eps probed by the dipolar-limit study; a
// half-width plateau leaves oscillatory O(1) artifacts there.
inline double plateau_bump(double u) {
    constexpr double delta = 0.05;       // plateau end
    constexpr double sigma = 1.0 / 6.0;  // Gaussian core width of the rolloff
    constexpr double nu = 0.01;          // endpoint flatteners
    if (u <= delta) return 1.0;
    if (u >= 1.0) return 0.0;

    static const std::vector<double> cumulative = [] {
        constexpr int n = 16384;
        std::vector<double> c(n + 1, 0.0);
        for (int i = 1; i <= n; ++i) {
            const double t = (i - 0.5) / n;
            c[static_cast<std::size_t>(i)] =
                c[static_cast<std::size_t>(i - 1)] +
                std::exp(-(t - 0.5) * (t - 0.5) / (2.0 * sigma * sigma) - nu / t - nu / (1.0 - t));
        }
        for (double& v : c) v /= c.back();
        return c;
    }();

    const double t = (u - delta) / (1.0 - delta);
    const double x = t * (static_cast<double>(cumulative.size()) - 1.0);
    const std::size_t i = static_cast<std::size_t>(x);
    const double frac = x - static_cast<double>(i);
    const double c = cumulative[i] + frac * (cumulative[i + 1] - cumulative[i]);
    return 1.0 - c;
}

struct CutoffProfile {
    CutoffKind kind = CutoffKind::ring_gaussian;
    double rho_cut = 0.1;  // ring_gaussian: inner exclusion radius
    double decay = 1.0;    // ring_gaussian: decay scale s
    double eps = 0.1;      // plateau: dilation parameter

    double operator()(double r) const {
        switch (kind) {
            case CutoffKind::zero:
                return 0.0;
            case CutoffKind::ring_gaussian: {
                if (r <= rho_cut) return 0.0;
                const double d = r - rho_cut;
                return std::exp(-decay * decay / (d * d)) *
                       std::exp(-r * r / (2.0 * decay * decay));
            }
            case CutoffKind::plateau:
                return plateau_bump(r * eps);
        }
        return 0.0;
    }

    // Radius past which the profile is below tol (grid truncation point).
    double support_radius(double tol = 1e-12) const {
        switch (kind) {
            case CutoffKind::zero:
                return 1.0;
            case CutoffKind::ring_gaussian:
                return decay * std::sqrt(-2.0 * std::log(tol));
            case CutoffKind::plateau:
                return 1.0 / eps;
        }
        return 1.0;
    }

    static CutoffProfile ring(double rho_cut = 0.1, double s = 1.0) {
        if (rho_cut <= 0.0 || s <= 0.0)
            throw std::invalid_argument("CutoffProfile::ring: rho_cut and s must be > 0");
        CutoffProfile c;
        c.kind = CutoffKind::ring_gaussian;
        c.rho_cut = rho_cut;
        c.decay = s;
        return c;
    }

    static CutoffProfile plateau_family(double eps) {
        if (eps <= 0.0) throw std::invalid_argument("CutoffProfile::plateau_family: eps must be > 0");
        CutoffProfile c;
        c.kind = CutoffKind::plateau;
        c.eps = eps;
        return c;
    }

    static CutoffProfile zero() {
        CutoffProfile c;
        c.kind = CutoffKind::zero;
        return c;
    }
};

}  // namespace spinphoton
