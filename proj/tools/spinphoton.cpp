// Command-line driver: batch studies over the coupled field-spin system.
//   simulate    time evolution + conservation monitors + evolution-law residuals
//   fixed-point stationary spin configurations, eigenvector residuals, energies
//   ising       small-cutoff convergence of the pairwise interaction kernel
//   quasimode   perturbation series, residual scaling table, optional oracle
//   field-map   first-order quasimode field (two routes) or a state's fields
// Exit codes: 0 success, 1 configuration/validation error, 2 numerical guard.

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include "spinphoton/config.hpp"
#include "spinphoton/csv.hpp"
#include "spinphoton/dynamics.hpp"
#include "spinphoton/observables.hpp"
#include "spinphoton/quasimode.hpp"
#include "spinphoton/stationary.hpp"

namespace fs = std::filesystem;
using namespace spinphoton;

namespace {

struct GuardFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int thread_count() {
    const char* s = std::getenv("SPINPHOTON_THREADS");
    if (!s) return 1;
    const int n = std::atoi(s);
    return n >= 1 ? n : 1;
}

template <typename F>
void parallel_indexed(std::size_t n, F&& f) {
    const int threads = std::min<int>(thread_count(), static_cast<int>(n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
        });
    for (std::thread& th : pool) th.join();
}

struct Workspace {
    ScenarioConfig cfg;
    std::unique_ptr<KGrid> grid;
    System sys;
    fs::path out;
};

Workspace make_workspace(const std::string& config_path, const std::string& out_override) {
    Workspace w;
    w.cfg = load_config(config_path);
    if (!out_override.empty()) w.cfg.output_dir = out_override;
    w.grid = std::make_unique<KGrid>(KGrid::build(w.cfg.grid.radial_order, w.cfg.grid.angular_order,
                                                  w.cfg.grid.r_min, w.cfg.resolved_r_max()));
    w.sys = System::build(*w.grid, w.cfg.cutoff, w.cfg.particles);
    w.out = w.cfg.output_dir;
    fs::create_directories(w.out);
    std::ofstream echo(w.out / "config_echo.json");
    echo << w.cfg.echo().dump(2) << '\n';
    return w;
}

std::vector<Vec3> report_probes(const Workspace& w) {
    return w.cfg.probes.empty() ? default_probe_points(w.cfg.particles, w.cfg.seed) : w.cfg.probes;
}

void cmd_simulate(const std::string& config_path, const std::string& out_override) {
    Workspace w = make_workspace(config_path, out_override);
    const std::vector<Vec3> probes = report_probes(w);
    std::vector<Vec3> csv_probes = w.cfg.particles.positions;
    csv_probes.insert(csv_probes.end(), w.cfg.probes.begin(), w.cfg.probes.end());

    bool guard_tripped = false;
    for (std::size_t ih = 0; ih < w.cfg.h_values.size(); ++ih) {
        const double h = w.cfg.h_values[ih];
        const std::string suffix = w.cfg.h_values.size() > 1 ? "_h" + std::to_string(ih) : "";

        TrajectoryState s0;
        s0.X = make_initial_field(*w.grid, w.cfg.field_init);
        s0.a = make_initial_spin(w.cfg.spin_init, w.cfg.particles);
        s0.h = h;
        const IntegrationResult res = integrate(w.sys, s0, w.cfg.integrator);

        CsvWriter csv((w.out / ("trajectory" + suffix + ".csv")).string());
        std::vector<std::string> cols{"t", "photon_number", "energy", "action", "spin_norm"};
        for (int lam = 1; lam <= w.cfg.particles.n; ++lam)
            for (const char* c : {"x", "y", "z"})
                cols.push_back("S" + std::to_string(lam) + "_" + c);
        for (std::size_t p = 0; p < csv_probes.size(); ++p)
            for (const char* f : {"B", "E"})
                for (const char* c : {"x", "y", "z"})
                    cols.push_back(std::string(f) + std::to_string(p) + "_" + c);
        csv.header(cols);
        for (const TrajectoryState& st : res.states) {
            std::vector<double> row{st.t, photon_number(st), hamiltonian(w.sys, st.X, st.a, st.h),
                                    st.action, st.a.norm()};
            for (const Vec3& S : spin_expectations(st.a)) {
                row.push_back(S.x);
                row.push_back(S.y);
                row.push_back(S.z);
            }
            for (const Vec3& x : csv_probes) {
                const Vec3 B = field_B(w.sys, st.X, x);
                const Vec3 E = field_E(w.sys, st.X, x);
                for (std::size_t c = 0; c < 3; ++c) row.push_back(B[c]);
                for (std::size_t c = 0; c < 3; ++c) row.push_back(E[c]);
            }
            csv.row(row);
        }

        Json rep;
        rep["h"] = h;
        rep["max_energy_drift"] = res.max_energy_drift;
        rep["max_norm_correction"] = res.max_norm_correction;
        // residual analysis needs a uniform recording stride
        const long n_steps = std::lround(w.cfg.integrator.t_final / w.cfg.integrator.dt);
        const bool uniform = n_steps % w.cfg.integrator.record_every == 0;
        if (!uniform)
            rep["residuals_skipped"] = "record_every does not divide the step count";
        if (uniform && res.states.size() >= 5) {
            const double dx = 1e-3;
            const ResidualReport rb = maxwell_residual_B(w.sys, res.states, probes, dx);
            const ResidualReport re = maxwell_residual_E(w.sys, res.states, probes, dx);
            rep["maxwell_B"] = {{"max_residual", rb.max_residual},
                                {"scale", rb.scale},
                                {"relative", rb.relative()}};
            rep["maxwell_E"] = {{"max_residual", re.max_residual},
                                {"scale", re.scale},
                                {"relative", re.relative()}};
            if (w.cfg.particles.n > 0) {
                const ResidualReport bl = bloch_residual(w.sys, res.states);
                rep["bloch"] = {{"max_residual", bl.max_residual},
                                {"scale", bl.scale},
                                {"relative", bl.relative()}};
            }
            const PhotonLawReport pl = photon_number_law(w.sys, res.states);
            rep["photon_number_law"] = {{"max_fd_vs_direct", pl.max_fd_vs_direct},
                                        {"rate_scale", pl.rate_scale},
                                        {"max_direct_vs_polarized", pl.max_direct_vs_polarized}};
        }
        std::ofstream rj(w.out / ("residuals" + suffix + ".json"));
        rj << rep.dump(2) << '\n';

        if (res.max_energy_drift > w.cfg.max_energy_drift) {
            std::cerr << "numerical guard: energy drift " << res.max_energy_drift
                      << " exceeds threshold " << w.cfg.max_energy_drift << " (h = " << h << ")\n";
            guard_tripped = true;
        }
    }
    if (guard_tripped) throw GuardFailure("energy drift guard tripped");
}

void cmd_fixed_point(const std::string& config_path, const std::string& out_override) {
    Workspace w = make_workspace(config_path, out_override);
    const int n = w.cfg.particles.n;
    if (n < 1) throw ConfigError("fixed-point: at least one particle required");
    const double h = w.cfg.h_values.front();

    CsvWriter csv((w.out / "fixed_points.csv").string());
    csv.header({"subset", "eigvec_residual", "is_fixed", "eigenvalue", "energy_formula",
                "energy_direct", "energy_rel_diff"});
    Json rep;
    rep["h"] = h;
    bool all_fixed = true;
    for (std::uint32_t E = 0; E < (1u << n); ++E) {
        const SpinState aE = basis_state(E, w.cfg.particles.beta, n);
        const FixedPointCheck c = is_fixed_point(w.sys, aE, h);
        double ef = std::numeric_limits<double>::quiet_NaN(), rel = ef;
        const double ed = fixed_point_energy_direct(w.sys, E, h);
        try {
            ef = fixed_point_energy(w.sys, E, h);
            rel = std::abs(ef - ed) / std::max(std::abs(ed), 1e-300);
        } catch (const std::invalid_argument&) {
            rep["coplanar"] = false;
        }
        all_fixed = all_fixed && c.is_fixed;
        csv.row({static_cast<double>(E), c.eigvec_residual, c.is_fixed ? 1.0 : 0.0, c.eigenvalue,
                 ef, ed, rel});
    }
    rep["all_subsets_fixed"] = all_fixed;
    if (!rep.contains("coplanar")) rep["coplanar"] = true;
    std::ofstream rj(w.out / "fixed_point_summary.json");
    rj << rep.dump(2) << '\n';
}

void cmd_ising(const std::string& config_path, const std::string& out_override) {
    ScenarioConfig cfg = load_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    fs::path out = cfg.output_dir;
    fs::create_directories(out);
    std::ofstream echo(out / "config_echo.json");
    echo << cfg.echo().dump(2) << '\n';

    IsingGridPolicy policy;
    policy.radial_order = cfg.ising.radial_order;
    policy.min_angular = cfg.ising.min_angular;

    // one study per eps, independent and safe to run concurrently
    std::vector<IsingStudy> parts(cfg.ising.eps_list.size());
    parallel_indexed(cfg.ising.eps_list.size(), [&](std::size_t i) {
        parts[i] = ising_limit_study(cfg.particles, {cfg.ising.eps_list[i]}, policy);
    });

    CsvWriter csv((out / "ising.csv").string());
    csv.header({"eps", "pair_lam", "pair_mu", "F_eps", "limit_kernel", "abs_err"});
    Json summary;
    summary["eps_list"] = cfg.ising.eps_list;
    Json selfs = Json::array();
    for (std::size_t i = 0; i < parts.size(); ++i) {
        selfs.push_back(parts[i].self_term.front());
        for (const IsingRow& r : parts[i].rows)
            csv.row({r.eps, static_cast<double>(r.lam), static_cast<double>(r.mu), r.F_eps,
                     r.limit_kernel, r.abs_err});
    }
    summary["self_term"] = selfs;
    // per-pair monotonicity and final relative error across the sweep
    bool monotone = true;
    double final_rel = 0.0;
    if (parts.size() >= 2 && !parts.front().rows.empty()) {
        for (std::size_t r = 0; r < parts.front().rows.size(); ++r) {
            for (std::size_t i = 1; i < parts.size(); ++i)
                monotone = monotone && parts[i].rows[r].abs_err < parts[i - 1].rows[r].abs_err;
            const IsingRow& last = parts.back().rows[r];
            final_rel = std::max(final_rel, last.abs_err / std::abs(last.limit_kernel));
        }
        summary["monotone_error"] = monotone;
        summary["final_rel_err"] = final_rel;
    }
    std::ofstream sj(out / "ising_summary.json");
    sj << summary.dump(2) << '\n';
}

double fit_loglog_slope(const std::vector<double>& h, const std::vector<double>& r) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double x = std::log(h[i]), y = std::log(r[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void cmd_quasimode(const std::string& config_path, const std::string& out_override) {
    Workspace w = make_workspace(config_path, out_override);
    const QuasimodeParams& qp = w.cfg.quasimode;
    if (qp.max_sector < 2 * qp.p_max + 1)
        throw ConfigError("quasimode: max_sector must be >= 2 p_max + 1");

    const FockBasis basis = FockBasis::build(w.sys, qp.max_modes, qp.max_sector);
    const QuasimodeSeries series = quasimode_series(basis, qp.p_max);

    Json rep;
    rep["n_modes"] = basis.n_modes();
    rep["max_sector"] = basis.max_sector();
    rep["dim"] = basis.dim();
    rep["lambda"] = series.lambda;
    Json unorms = Json::array();
    for (const FockVector& u : series.u) unorms.push_back(u.norm());
    rep["u_norms"] = unorms;

    // closed-form cross-check of the second-order coefficient (beta along z)
    const Vec3 bhat = normalized(w.cfg.particles.beta);
    if (w.cfg.particles.n >= 1 && std::abs(bhat.x) < 1e-12 && std::abs(bhat.y) < 1e-12 &&
        bhat.z > 0.0) {
        const double shift = 2.0 * norm(w.cfg.particles.beta);
        double c33_sum = 0.0;
        for (int lam = 1; lam <= w.cfg.particles.n; ++lam)
            for (int mu = 1; mu <= w.cfg.particles.n; ++mu)
                c33_sum += coupling_matrix(w.sys, lam, mu, 3, 3);
        const double C = coupling_matrix_shifted(w.sys, 1, 1, 1, 1, shift);
        rep["lambda2_closed_form"] = 0.5 * (-2.0 * w.cfg.particles.n * C - c33_sum);
        rep["lambda2_recursion"] =
            series.lambda.size() >= 2 ? series.lambda[1] : lambda2_via_recursion(basis);
    }

    CsvWriter csv((w.out / "quasimode_residuals.csv").string());
    csv.header({"h", "residual_p0", "residual_p1", "trial_norm_p1"});
    std::vector<double> r0, r1;
    for (const double h : qp.h_list) {
        const double a = residual_norm(basis, series, 0, h, ResidualForm::odd_sum);
        double b = std::numeric_limits<double>::quiet_NaN(), tn = b;
        if (qp.p_max >= 1) {
            b = residual_norm(basis, series, 1, h, ResidualForm::even_sum);
            tn = trial_norm(basis, series, 1, h, ResidualForm::odd_sum);
            r1.push_back(b);
        }
        r0.push_back(a);
        csv.row({h, a, b, tn});
    }
    if (qp.h_list.size() >= 2) {
        rep["slope_p0"] = fit_loglog_slope(qp.h_list, r0);
        if (!r1.empty()) rep["slope_p1"] = fit_loglog_slope(qp.h_list, r1);
    }

    if (qp.oracle) {
        const double h = qp.h_list.front();
        const Eigen::MatrixXcd K = exact_operator_oracle(basis, h);  // dimension-guarded
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(K);
        const double mu = es.eigenvalues().minCoeff();
        double lam_h = 0.0;
        for (std::size_t j = 0; j < series.lambda.size(); ++j)
            lam_h += series.lambda[j] * std::pow(h, static_cast<double>(j + 1));
        rep["oracle"] = {{"h", h},
                         {"min_eigenvalue", mu},
                         {"series_value", lam_h},
                         {"difference", std::abs(mu - lam_h)}};
        if (qp.p_max >= 1) {
            const double bound = residual_norm(basis, series, 1, h, ResidualForm::odd_sum) /
                                 trial_norm(basis, series, 1, h, ResidualForm::odd_sum);
            rep["oracle"]["variational_bound"] = bound;
            rep["oracle"]["bound_satisfied"] = std::abs(mu - lam_h) <= bound;
        }
    }

    std::ofstream rj(w.out / "quasimode_series.json");
    rj << rep.dump(2) << '\n';
}

void cmd_field_map(const std::string& config_path, const std::string& out_override) {
    Workspace w = make_workspace(config_path, out_override);
    const FieldMapParams& fm = w.cfg.field_map;
    const double h = w.cfg.h_values.front();

    auto grid_points = [&](auto&& emit) {
        for (int ix = 0; ix < fm.nx; ++ix)
            for (int iy = 0; iy < fm.ny; ++iy)
                for (int iz = 0; iz < fm.nz; ++iz) {
                    const auto frac = [](int i, int n) { return n == 1 ? 0.5 : i / double(n - 1); };
                    const Vec3 x{fm.box_min.x + (fm.box_max.x - fm.box_min.x) * frac(ix, fm.nx),
                                 fm.box_min.y + (fm.box_max.y - fm.box_min.y) * frac(iy, fm.ny),
                                 fm.box_min.z + (fm.box_max.z - fm.box_min.z) * frac(iz, fm.nz)};
                    emit(x);
                }
    };

    if (fm.source == "quasimode") {
        const FockBasis basis = FockBasis::build(w.sys, 0, 1);  // all modes, one photon sector
        const QuasimodeSeries series = quasimode_series(basis, 0);
        CsvWriter csv((w.out / "field_map.csv").string());
        csv.header({"x", "y", "z", "Bfock_x", "Bfock_y", "Bfock_z", "Bquad_x", "Bquad_y", "Bquad_z",
                    "E_form_max"});
        grid_points([&](const Vec3& x) {
            const FirstOrderField f = first_order_field(w.sys, basis, series, x, h);
            csv.row({x.x, x.y, x.z, f.B_fock.x, f.B_fock.y, f.B_fock.z, f.B_quadrature.x,
                     f.B_quadrature.y, f.B_quadrature.z, f.E_form_max});
        });
    } else {
        TrajectoryState s0;
        s0.X = make_initial_field(*w.grid, w.cfg.field_init);
        s0.a = make_initial_spin(w.cfg.spin_init, w.cfg.particles);
        s0.h = h;
        CsvWriter csv((w.out / "field_map.csv").string());
        csv.header({"x", "y", "z", "B_x", "B_y", "B_z", "E_x", "E_y", "E_z"});
        grid_points([&](const Vec3& x) {
            const Vec3 B = field_B(w.sys, s0.X, x);
            const Vec3 E = field_E(w.sys, s0.X, x);
            csv.row({x.x, x.y, x.z, B.x, B.y, B.z, E.x, E.y, E.z});
        });
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "spinphoton: semiclassical simulator for spins coupled to the quantized "
        "electromagnetic field"};
    app.require_subcommand(1);

    std::string config_path, out_override;

    auto add = [&](const char* name, const char* desc) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("-c,--config", config_path, "JSON configuration file")->required();
        sub->add_option("-o,--output-dir", out_override, "override the configured output directory");
        return sub;
    };
    CLI::App* sim = add("simulate",
                        "integrate the coupled field-spin dynamics; emits trajectory time series "
                        "and Maxwell/Bloch/photon-rate residual reports");
    CLI::App* fp = add("fixed-point",
                       "check the product spin states against the stationarity conditions and "
                       "tabulate their energies (formula vs direct evaluation)");
    CLI::App* is = add("ising",
                       "small-cutoff sweep of the pair interaction kernel against the dipolar "
                       "1/|x|^3 limit; emits per-pair convergence rows");
    CLI::App* qm = add("quasimode",
                       "build the perturbative eigenvalue/eigenvector series on a truncated "
                       "photon-number space; emits the coefficient list and residual-vs-h table");
    CLI::App* fmp = add("field-map",
                        "sample the quasimode's first-order magnetic field (two independent "
                        "routes) or a configured state's fields on a box grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) cmd_simulate(config_path, out_override);
        if (fp->parsed()) cmd_fixed_point(config_path, out_override);
        if (is->parsed()) cmd_ising(config_path, out_override);
        if (qm->parsed()) cmd_quasimode(config_path, out_override);
        if (fmp->parsed()) cmd_field_map(config_path, out_override);
    } catch (const GuardFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
