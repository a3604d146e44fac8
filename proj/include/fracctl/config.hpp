#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fracctl/control.hpp"
#include "fracctl/nonlocal.hpp"

namespace fracctl {

/// Experiment target: an explicit coefficient list or one of the shorthands
/// `zero`, `mode:k` (unit vector in mode k, 1-based) and `parabola` (sine coefficients of
/// 4 x (pi - x) / pi^2).
struct TargetSpec {
    enum class Kind { list, zero, mode, parabola };

    std::string id;
    Kind kind = Kind::zero;
    std::size_t mode = 0;
    std::vector<double> values;

    ModeVector resolve(std::size_t n_modes) const;
    bool operator==(const TargetSpec&) const = default;
};

/// Parsed run configuration. Grammar: `[section]` headers and `key = value` lines; `;` and
/// `#` start comment lines; lists are comma separated. Sections and keys:
///
///   [model]      eigenvalues = dirichlet_squares | list, n_modes, lambdas
///   [problem]    alpha, horizon, nonlocal_c, nonlocal_t, kappa,
///                nonlinearity = none | demo_sin | custom, nonlinearity_coeffs,
///                control = zero | constant, control_coeffs
///   [grid]       n_steps
///   [solver]     tol, max_iter, damping, verify_tol, steer_tol, steer_max_iter
///   [experiment] rhos, target_<id> = list | zero | mode:k | parabola
///
/// Every key is optional; missing keys keep the defaults below.
struct RunConfig {
    std::string eigenvalues = "dirichlet_squares";
    std::size_t n_modes = 8;
    std::vector<double> lambdas;

    double alpha = 0.75;
    double horizon = 1.0;
    std::vector<double> nonlocal_c;
    std::vector<double> nonlocal_t;
    double kappa = 1.0;
    std::string nonlinearity = "none";
    std::vector<double> nonlinearity_coeffs;
    std::string control = "zero";
    std::vector<double> control_coeffs;

    int n_steps = 512;

    double tol = tol::picard_tol;
    int max_iter = tol::picard_max_iter;
    double damping = 1.0;
    double verify_tol = tol::verify_residual;
    double steer_tol = tol::steer_tol;
    int steer_max_iter = tol::steer_max_iter;

    std::vector<double> rhos;
    std::vector<TargetSpec> targets;

    /// Non-fatal findings from loading (e.g. kappa = 0).
    std::vector<std::string> warnings;

    bool operator==(const RunConfig& o) const;
};

/// Parses and validates a configuration. Throws UsageError on unknown sections or keys,
/// malformed values and inconsistent lengths; DomainError for an order outside (0, 1].
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Normal form: every key in a fixed order, floats at 17 significant digits.
std::string serialize_config(const RunConfig& cfg);

SpectralModel make_model(const RunConfig& cfg);
ProblemSpec make_problem(const RunConfig& cfg);
TimeGrid make_grid(const RunConfig& cfg);
ControlSignal make_control(const RunConfig& cfg, const TimeGrid& grid);
SolveOptions make_solve_options(const RunConfig& cfg);
SteerOptions make_steer_options(const RunConfig& cfg);
std::vector<Target> make_targets(const RunConfig& cfg);

}  // namespace fracctl
