/// fracctl: command-line front end for the nonlocal fractional evolution solver.
///
/// Exit codes: 0 ok, 2 usage or domain error, 3 inadmissible nonlocal data, 4 non-convergence,
/// 5 unsupported regime, 6 verification failure.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "fracctl/config.hpp"
#include "fracctl/control.hpp"
#include "fracctl/errors.hpp"
#include "fracctl/io.hpp"
#include "fracctl/nonlocal.hpp"
#include "fracctl/specfun.hpp"

namespace {

using namespace fracctl;
using io::format_double;

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_inadmissible = 3;
constexpr int exit_nonconvergence = 4;
constexpr int exit_unsupported = 5;
constexpr int exit_verification = 6;

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage:
        case ErrorKind::domain: return exit_usage;
        case ErrorKind::inadmissible: return exit_inadmissible;
        case ErrorKind::non_convergence: return exit_nonconvergence;
        case ErrorKind::unsupported_regime: return exit_unsupported;
        case ErrorKind::verification_failure: return exit_verification;
    }
    return 1;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write '" + path + "'");
    return out;
}

RunConfig load(const std::string& path) {
    auto cfg = load_config(path);
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
    return cfg;
}

int cmd_ml(double alpha, double beta, double z) {
    std::printf("%.13g\n", mittag_leffler(alpha, beta, z));
    return exit_ok;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path) {
    const auto cfg = load(config_path);
    const auto problem = make_problem(cfg);
    const auto grid = make_grid(cfg);
    const auto v = make_control(cfg, grid);
    const auto h1 = check_H1(problem.model, problem.alpha, problem.nonlocal);

    io::ReportEntries report{
        {"alpha", format_double(cfg.alpha)},
        {"horizon", format_double(cfg.horizon)},
        {"n_modes", std::to_string(problem.model.n_modes())},
        {"n_steps", std::to_string(cfg.n_steps)},
        {"nonlinearity", problem.f.name},
        {"h1_margin", format_double(h1.margin)},
    };
    const std::string report_path = out_path + ".report";
    try {
        const auto sol = solve_mild(problem, grid, v, make_solve_options(cfg));
        const auto& r = sol.report;
        report.insert(report.begin(), {"status", "ok"});
        report.insert(report.end(), {
                                        {"iterations", std::to_string(r.iterations)},
                                        {"final_residual", format_double(r.final_residual)},
                                        {"nonlocal_residual", format_double(r.nonlocal_residual)},
                                        {"contraction_estimate", format_double(r.contraction_estimate)},
                                        {"control_bound_psi", format_double(r.control_bound_psi)},
                                        {"endpoint_norm", format_double(norm(sol.trajectory.states.back()))},
                                    });
        auto traj_out = open_out(out_path);
        io::write_trajectory(traj_out, sol.trajectory, cfg.alpha);
        auto rep_out = open_out(report_path);
        io::write_report(rep_out, report);
        std::cout << "nonlocal_residual = " << format_double(r.nonlocal_residual) << '\n';
        return exit_ok;
    } catch (const NonConvergenceError& e) {
        report.insert(report.begin(), {"status", "non_convergence"});
        report.insert(report.end(), {
                                        {"iterations", std::to_string(e.iterations())},
                                        {"last_difference", format_double(e.last_difference())},
                                        {"contraction_estimate", format_double(e.contraction_estimate())},
                                    });
        auto rep_out = open_out(report_path);
        io::write_report(rep_out, report);
        throw;
    }
}

int cmd_steer(const std::string& config_path, const std::string& out_path) {
    const auto cfg = load(config_path);
    if (cfg.targets.empty()) throw UsageError("steer: the config defines no target_<id> entries");
    if (cfg.rhos.empty()) throw UsageError("steer: the config defines no rhos");
    const auto problem = make_problem(cfg);
    const auto rows =
        reachability_experiment(problem, make_grid(cfg), make_targets(cfg), cfg.rhos, make_steer_options(cfg));
    for (const auto& r : rows) {
        if (r.stagnant) std::cerr << "warning: target " << r.target_id << " is unreachable: zero Gramian\n";
    }
    auto out = open_out(out_path);
    io::write_reachability(out, rows);
    return exit_ok;
}

int cmd_verify(const std::string& config_path, const std::string& traj_path) {
    const auto cfg = load(config_path);
    std::ifstream in(traj_path, std::ios::binary);
    if (!in) throw UsageError("cannot open trajectory '" + traj_path + "'");
    const auto file = io::read_trajectory(in);
    const auto problem = make_problem(cfg);
    if (file.trajectory.states.front().size() != problem.model.n_modes()) {
        throw UsageError("verify: trajectory mode count differs from the config");
    }
    if (file.alpha != cfg.alpha) throw UsageError("verify: trajectory order alpha differs from the config");
    const auto v = make_control(cfg, file.trajectory.grid);
    const auto r = verify_mild(problem, file.trajectory, v);
    const bool pass = r.mild_residual <= cfg.verify_tol && r.nonlocal_residual <= cfg.verify_tol;
    io::write_report(std::cout, {
                                    {"status", pass ? "pass" : "fail"},
                                    {"mild_residual", format_double(r.mild_residual)},
                                    {"nonlocal_residual", format_double(r.nonlocal_residual)},
                                    {"consistency_residual", format_double(r.consistency_residual)},
                                    {"verify_tol", format_double(cfg.verify_tol)},
                                });
    return pass ? exit_ok : exit_verification;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fracctl: nonlocal fractional evolution equations, simulation and steering"};
    app.require_subcommand(1);
    unsigned long seed = 0;
    app.add_option("--seed", seed, "reserved; all computation is deterministic");

    double ml_alpha = 0, ml_beta = 0, ml_z = 0;
    auto* ml = app.add_subcommand("ml", "print E_{alpha,beta}(z)");
    ml->add_option("alpha", ml_alpha)->required();
    ml->add_option("beta", ml_beta)->required();
    ml->add_option("z", ml_z)->required();

    std::string config, out, traj;
    auto* sim = app.add_subcommand("simulate", "solve the mild equation; writes OUT and OUT.report");
    sim->add_option("--config", config)->required();
    sim->add_option("--out", out)->required();

    auto* st = app.add_subcommand("steer", "reachability sweep over the configured targets and rhos");
    st->add_option("--config", config)->required();
    st->add_option("--out", out)->required();

    auto* ver = app.add_subcommand("verify", "check a trajectory file against the mild equation");
    ver->add_option("--config", config)->required();
    ver->add_option("trajectory", traj)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*ml) return cmd_ml(ml_alpha, ml_beta, ml_z);
        if (*sim) return cmd_simulate(config, out);
        if (*st) return cmd_steer(config, out);
        if (*ver) return cmd_verify(config, traj);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return exit_usage;
}
