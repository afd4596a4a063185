#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <bit>
#include <random>

#include "spinphoton/spin_algebra.hpp"
#include "test_helpers.hpp"

using namespace spinphoton;
using testutil::random_spin;

TEST_CASE("single-site Pauli action", "[spin_algebra]") {
    SpinState a(1);
    a[0] = 1.0;  // (1, 0)
    const SpinState x = apply_sigma(1, 1, a);
    CHECK(x[0] == Complex{0.0, 0.0});
    CHECK(x[1] == Complex{1.0, 0.0});
    const SpinState z = apply_sigma(3, 1, a);
    CHECK(z[0] == Complex{1.0, 0.0});

    CHECK_THROWS_AS(apply_sigma(4, 1, a), std::out_of_range);
    CHECK_THROWS_AS(apply_sigma(1, 2, a), std::out_of_range);
}

TEST_CASE("Pauli algebra under composition", "[spin_algebra]") {
    std::mt19937 rng(5);
    const int N = 3;
    const SpinState a = random_spin(N, rng);
    const Complex I{0.0, 1.0};
    for (int lam = 1; lam <= N; ++lam) {
        for (int m = 1; m <= 3; ++m) {
            // involution
            const SpinState twice = apply_sigma(m, lam, apply_sigma(m, lam, a));
            SpinState d = twice - a;
            CHECK(d.norm() < 1e-14);
            for (int n = 1; n <= 3; ++n) {
                if (m == n) continue;
                // sigma_m sigma_n = i eps_{mnl} sigma_l for m != n
                const int l = 6 - m - n;
                const double eps = ((m == 1 && n == 2) || (m == 2 && n == 3) || (m == 3 && n == 1))
                                       ? 1.0
                                       : -1.0;
                SpinState lhs = apply_sigma(m, lam, apply_sigma(n, lam, a));
                SpinState rhs = apply_sigma(l, lam, a) * (I * eps);
                CHECK((lhs - rhs).norm() < 1e-14);
            }
        }
        // cross-site commutation
        for (int mu = lam + 1; mu <= N; ++mu) {
            SpinState ab = apply_sigma(1, lam, apply_sigma(2, mu, a));
            SpinState ba = apply_sigma(2, mu, apply_sigma(1, lam, a));
            CHECK((ab - ba).norm() < 1e-14);
        }
    }
    // [sigma_3, sigma_1] = 2 i sigma_2
    SpinState comm = apply_sigma(3, 1, apply_sigma(1, 1, a)) - apply_sigma(1, 1, apply_sigma(3, 1, a));
    SpinState target = apply_sigma(2, 1, a) * (2.0 * I);
    CHECK((comm - target).norm() < 1e-14);
}

TEST_CASE("spin expectations", "[spin_algebra]") {
    std::mt19937 rng(13);

    // hermiticity: <sigma a, a> real
    const SpinState a = random_spin(2, rng);
    for (int m = 1; m <= 3; ++m)
        CHECK(std::abs(inner(apply_sigma(m, 1, a), a).imag()) < 1e-14);

    // every product state has unit Bloch vectors
    for (int rep = 0; rep < 20; ++rep) {
        const int N = 3;
        SpinState p(N);
        std::vector<std::array<Complex, 2>> locals;
        std::normal_distribution<double> d(0.0, 1.0);
        for (int i = 0; i < N; ++i) {
            std::array<Complex, 2> v{Complex{d(rng), d(rng)}, Complex{d(rng), d(rng)}};
            const double nv = std::sqrt(std::norm(v[0]) + std::norm(v[1]));
            v[0] /= nv;
            v[1] /= nv;
            locals.push_back(v);
        }
        for (std::size_t idx = 0; idx < p.dim(); ++idx) {
            Complex amp{1.0, 0.0};
            for (int i = 0; i < N; ++i) amp *= locals[static_cast<std::size_t>(i)][(idx >> i) & 1];
            p[idx] = amp;
        }
        for (const Vec3& s : spin_expectations(p)) CHECK(norm(s) == Catch::Approx(1.0).epsilon(1e-12));
    }

    // a_empty has every Bloch vector at (0, 0, -1) for beta = z
    const SpinState ae = basis_state(0u, Vec3{0, 0, 1}, 3);
    for (const Vec3& s : spin_expectations(ae)) {
        CHECK(s.x == Catch::Approx(0.0).margin(1e-14));
        CHECK(s.y == Catch::Approx(0.0).margin(1e-14));
        CHECK(s.z == Catch::Approx(-1.0).epsilon(1e-14));
    }

    // global phase invariance
    SpinState b = random_spin(2, rng);
    SpinState c = b * std::exp(Complex{0.0, 1.234});
    const auto sb = spin_expectations(b), sc = spin_expectations(c);
    for (std::size_t i = 0; i < sb.size(); ++i) CHECK(norm(sb[i] - sc[i]) < 1e-13);
}

TEST_CASE("basis states diagonalize the constant-field term", "[spin_algebra]") {
    SECTION("beta along z") {
        const SpinState b0 = basis_state(0u, Vec3{0, 0, 1}, 1);
        CHECK(std::abs(b0[0]) < 1e-15);
        CHECK(b0[1].real() == Catch::Approx(1.0));
        const SpinState b1 = basis_state(1u, Vec3{0, 0, 1}, 1);
        CHECK(b1[0].real() == Catch::Approx(1.0));
        CHECK(std::abs(b1[1]) < 1e-15);
    }
    SECTION("general beta") {
        const Vec3 beta{0.3, -0.4, 1.2};
        const double bmag = norm(beta);
        for (std::uint32_t E = 0; E < 4; ++E) {
            const SpinState aE = basis_state(E, beta, 2);
            CHECK(aE.norm() == Catch::Approx(1.0).epsilon(1e-13));
            // T(0,0) a_E = (2|E| - N)|beta| a_E
            SpinState t = apply_spin_field({beta, beta}, aE);
            const double eig = (2.0 * std::popcount(E) - 2.0) * bmag;
            SpinState r = t - aE * Complex{eig, 0.0};
            CHECK(r.norm() < 1e-13);
        }
        CHECK_THROWS_AS(basis_state(0u, Vec3{0, 0, 0}, 1), std::invalid_argument);
    }
}

TEST_CASE("coupled spin operator T(q, p)", "[spin_algebra]") {
    auto ss = testutil::make_system(2);
    const System& sys = ss.sys;
    std::mt19937 rng(31);

    SECTION("T(0, 0) eigenvalues on basis states") {
        const PhaseSpacePoint zero(*sys.grid);
        for (std::uint32_t E = 0; E < 4; ++E) {
            const SpinState aE = basis_state(E, sys.spins.beta, 2);
            const SpinState t = apply_T(zero, sys.couplings, sys.spins, aE);
            const double eig = (2.0 * std::popcount(E) - 2.0) * norm(sys.spins.beta);
            CHECK((t - aE * Complex{eig, 0.0}).norm() < 1e-13);
        }
    }

    SECTION("hermiticity") {
        const PhaseSpacePoint X = testutil::random_state(*sys.grid, rng);
        const SpinState a = random_spin(2, rng), b = random_spin(2, rng);
        const Complex lhs = inner(apply_T(X, sys.couplings, sys.spins, a), b);
        const Complex rhs = inner(a, apply_T(X, sys.couplings, sys.spins, b));
        CHECK(std::abs(lhs - rhs) < 1e-13);
    }

    SECTION("matches dense Kronecker construction") {
        const PhaseSpacePoint X = testutil::random_state(*sys.grid, rng);
        std::vector<Vec3> v = field_at_particles(sys.couplings, X);
        for (Vec3& c : v) c += sys.spins.beta;
        Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(4, 4);
        for (int lam = 1; lam <= 2; ++lam)
            for (int m = 1; m <= 3; ++m)
                T += v[static_cast<std::size_t>(lam - 1)][static_cast<std::size_t>(m - 1)] *
                     testutil::dense_sigma(m, lam, 2);
        const SpinState a = random_spin(2, rng);
        const SpinState Ta = apply_T(X, sys.couplings, sys.spins, a);
        const Eigen::VectorXcd dense = T * testutil::to_eigen(a);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(std::abs(dense(static_cast<Eigen::Index>(i)) - Ta[i]) < 1e-13);
    }
}
