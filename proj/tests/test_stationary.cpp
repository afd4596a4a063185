#include <catch2/catch_amalgamated.hpp>
#include <bit>
#include <cmath>
#include <random>

#include "spinphoton/dynamics.hpp"
#include "spinphoton/stationary.hpp"
#include "test_helpers.hpp"

using namespace spinphoton;

namespace {

// coplanar configuration orthogonal to beta = z
testutil::SmallSystem coplanar_pair(int radial = 24, int angular = 8) {
    testutil::SmallSystem s;
    s.grid = std::make_unique<KGrid>(KGrid::build(radial, angular, 0.0, 7.5));
    SpinConfig cfg;
    cfg.n = 2;
    cfg.beta = {0, 0, 1};
    cfg.positions = {Vec3{-0.6, 0.2, 0.0}, Vec3{0.7, -0.4, 0.0}};
    s.sys = System::build(*s.grid, CutoffProfile::ring(), cfg);
    return s;
}

testutil::SmallSystem tilted_pair() {
    testutil::SmallSystem s;
    s.grid = std::make_unique<KGrid>(KGrid::build(24, 8, 0.0, 7.5));
    SpinConfig cfg;
    cfg.n = 2;
    cfg.beta = {0, 0, 1};
    cfg.positions = {Vec3{0, 0, 0}, Vec3{0.8, 0.0, 0.5}};
    s.sys = System::build(*s.grid, CutoffProfile::ring(), cfg);
    return s;
}

}  // namespace

TEST_CASE("fixed-point fields: homogeneity and h = 0", "[stationary]") {
    auto ss = coplanar_pair(8, 4);
    const SpinState aE = basis_state(2u, ss.sys.spins.beta, 2);
    CHECK(norm(fixed_point_fields(ss.sys, aE, 0.0)) == 0.0);

    const PhaseSpacePoint X1 = fixed_point_fields(ss.sys, aE, 0.35);
    const PhaseSpacePoint X2 = fixed_point_fields(ss.sys, aE, 0.70);
    CHECK(norm(X2 - X1 * 2.0) < 1e-14 * (1.0 + norm(X2)));
}

TEST_CASE("basis states are fixed points exactly when coplanar", "[stationary]") {
    SECTION("coplanar: every subset passes for several h") {
        auto ss = coplanar_pair();
        for (std::uint32_t E = 0; E < 4; ++E) {
            const SpinState aE = basis_state(E, ss.sys.spins.beta, 2);
            for (const double h : {0.1, 1.0, 5.0}) {
                const FixedPointCheck c = is_fixed_point(ss.sys, aE, h);
                CHECK(c.is_fixed);
                CHECK(c.eigvec_residual < 1e-12);
            }
            // the field part of the flow vanishes there as well
            const double h = 0.5;
            const PhaseSpacePoint X = fixed_point_fields(ss.sys, aE, h);
            const Derivative d = rhs(ss.sys, X, aE, h);
            CHECK(norm(d.dX) < 1e-12);
            CHECK(d.da.norm() < 1e-12);
        }
    }

    SECTION("generic spinors are rejected at small h") {
        auto ss = coplanar_pair(8, 4);
        std::mt19937 rng(3);
        const SpinState u = testutil::random_spin(2, rng);
        const FixedPointCheck c = is_fixed_point(ss.sys, u, 1e-3);
        CHECK_FALSE(c.is_fixed);
        CHECK(c.eigvec_residual > 0.05);  // residual of T(0,0) dominates
    }

    SECTION("tilted configurations break the eigenvector property") {
        auto ss = tilted_pair();
        const SpinState aE = basis_state(1u, ss.sys.spins.beta, 2);
        const FixedPointCheck c = is_fixed_point(ss.sys, aE, 1.0);
        CHECK_FALSE(c.is_fixed);
        CHECK(c.eigvec_residual > 1e-6);
    }
}

TEST_CASE("coupling matrix: symmetry, selection rule, both routes", "[stationary]") {
    auto ss = coplanar_pair();

    for (int lam = 1; lam <= 2; ++lam)
        for (int mu = 1; mu <= 2; ++mu)
            for (int m = 1; m <= 3; ++m)
                for (int n = 1; n <= 3; ++n) {
                    double v = 0.0;
                    CHECK_NOTHROW(v = coupling_matrix(ss.sys, lam, mu, m, n, 1e-10));
                    const double w = coupling_matrix(ss.sys, mu, lam, n, m, 1e-10);
                    CHECK(v == Catch::Approx(w).margin(1e-13));
                    // coplanar orthogonal to z: C_m3 = 0 unless m = 3
                    if (n == 3 && m != 3) CHECK(std::abs(v) < 1e-15);
                }
}

TEST_CASE("diagonal C_33 against the radial oracle", "[stationary]") {
    testutil::SmallSystem s;
    s.grid = std::make_unique<KGrid>(KGrid::build(64, 6, 0.0, 7.5));
    SpinConfig cfg;
    cfg.n = 1;
    cfg.beta = {0, 0, 1};
    cfg.positions = {Vec3{0.3, -0.2, 0.0}};
    s.sys = System::build(*s.grid, CutoffProfile::ring(), cfg);

    const CutoffProfile chi = CutoffProfile::ring();
    // angular average of (k x e3)^2 / |k|^2 is 2/3
    const double oracle = std::pow(2.0 * M_PI, -3.0) * (2.0 / 3.0) * 4.0 * M_PI *
                          testutil::radial_integral(
                              [&](double r) {
                                  const double c = chi(r);
                                  return c * c * r * r;
                              },
                              7.5);
    CHECK(coupling_matrix(s.sys, 1, 1, 3, 3) == Catch::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("fixed-point energies", "[stationary]") {
    auto ss = coplanar_pair();
    const double h = 0.3, b = norm(ss.sys.spins.beta);

    SECTION("formula equals direct Hamiltonian evaluation") {
        for (std::uint32_t E = 0; E < 4; ++E) {
            const double ef = fixed_point_energy(ss.sys, E, h);
            const double ed = fixed_point_energy_direct(ss.sys, E, h);
            CHECK(ef == Catch::Approx(ed).epsilon(1e-10));
        }
    }

    SECTION("linear term and spin-flip symmetry") {
        // odd part in h isolates the linear term h |beta| sum eps
        const double lin0 = 0.5 * (fixed_point_energy(ss.sys, 0u, h) - fixed_point_energy(ss.sys, 0u, -h));
        CHECK(lin0 == Catch::Approx(-2.0 * b * h).epsilon(1e-12));

        for (std::uint32_t E = 0; E < 4; ++E) {
            const std::uint32_t F = 3u ^ E;  // complement
            const double linE = 0.5 * (fixed_point_energy(ss.sys, E, h) - fixed_point_energy(ss.sys, E, -h));
            const double linF = 0.5 * (fixed_point_energy(ss.sys, F, h) - fixed_point_energy(ss.sys, F, -h));
            CHECK(linE == Catch::Approx(-linF).margin(1e-13));
            const double quadE = 0.5 * (fixed_point_energy(ss.sys, E, h) + fixed_point_energy(ss.sys, E, -h));
            const double quadF = 0.5 * (fixed_point_energy(ss.sys, F, h) + fixed_point_energy(ss.sys, F, -h));
            CHECK(quadE == Catch::Approx(quadF).epsilon(1e-12));
        }
    }

    SECTION("non-coplanar configurations are rejected") {
        auto ts = tilted_pair();
        CHECK_THROWS_AS(fixed_point_energy(ts.sys, 1u, h), std::invalid_argument);
    }
}

TEST_CASE("integrating from a fixed point stays stationary", "[stationary]") {
    auto ss = coplanar_pair(12, 6);
    const double h = 0.4;
    const SpinState aE = basis_state(1u, ss.sys.spins.beta, 2);
    TrajectoryState s0;
    s0.X = fixed_point_fields(ss.sys, aE, h);
    s0.a = aE;
    s0.h = h;

    IntegratorSpec spec;
    spec.dt = 2e-3;
    spec.t_final = 5.0;
    spec.record_every = 250;
    const IntegrationResult res = integrate(ss.sys, s0, spec);
    const std::vector<Vec3> S0 = spin_expectations(aE);
    const double x_scale = std::max(norm(s0.X), 1e-30);
    for (const TrajectoryState& st : res.states) {
        double dS = 0.0;
        const std::vector<Vec3> S = spin_expectations(st.a);
        for (std::size_t lam = 0; lam < S.size(); ++lam) dS = std::max(dS, norm(S[lam] - S0[lam]));
        CHECK(dS + norm(st.X - s0.X) / x_scale < 1e-5);
    }
}

TEST_CASE("dipolar limit of the pair kernel", "[stationary]") {
    SpinConfig cfg;
    cfg.n = 2;
    cfg.beta = {0, 0, 1};
    cfg.positions = {Vec3{1.0, 0.0, 0.0}, Vec3{-1.0, 0.0, 0.0}};  // |dx| = 2, x3 = 0

    const std::vector<double> eps{0.2, 0.1, 0.05};
    const IsingStudy study = ising_limit_study(cfg, eps);

    REQUIRE(study.rows.size() == 3);
    const double limit = -1.0 / (32.0 * M_PI);
    std::vector<double> errs;
    for (const IsingRow& r : study.rows) {
        CHECK(r.limit_kernel == Catch::Approx(limit).epsilon(1e-12));
        errs.push_back(r.abs_err);
    }
    CHECK(errs[1] < errs[0]);
    CHECK(errs[2] < errs[1]);
    CHECK(errs[2] < 0.05 * std::abs(limit));

    // self-term is manifestly subset-independent: eps_lam^2 = 1
    for (std::size_t e = 0; e < eps.size(); ++e)
        for (std::uint32_t E = 0; E < 4; ++E) {
            double diag = 0.0;
            for (int lam = 0; lam < 2; ++lam) {
                const double el = (E >> lam) & 1 ? 1.0 : -1.0;
                diag += study.self_term[e] * el * el;
            }
            CHECK(diag == Catch::Approx(2.0 * study.self_term[e]));
        }

    // opposite spins attract: cross term of the energy (ordered pairs (1,2)
    // and (2,1) both counted) is negative for E = {1}
    const IsingRow& last = study.rows.back();
    const double hh = 0.2;
    const double eps12 = -1.0;  // eps_1 eps_2 for E = {1}
    const double cross_energy = -hh * hh * last.F_eps * eps12;
    CHECK(cross_energy < 0.0);
    CHECK(cross_energy == Catch::Approx(-hh * hh / (4.0 * M_PI * 8.0)).epsilon(0.05));

    SECTION("off-plane configurations are rejected") {
        SpinConfig bad = cfg;
        bad.positions[1].z = 0.3;
        CHECK_THROWS_AS(ising_limit_study(bad, eps), std::invalid_argument);
    }
}
