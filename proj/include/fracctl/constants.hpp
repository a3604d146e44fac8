#pragma once

/// Tolerances shared by the library, the CLI and the test suites.
namespace fracctl::tol {

/// Relative accuracy target of mittag_leffler() for |z| <= 50.
inline constexpr double ml_relative = 1e-10;
/// Absolute floor for the accuracy target where E_{a,b}(z) crosses zero.
inline constexpr double ml_absolute_floor = 1e-14;
/// Relative accuracy target of gamma().
inline constexpr double gamma_relative = 1e-13;

/// Neumann series for the nonlocal inverse stops once a term drops below this.
inline constexpr double neumann_term = 1e-14;

/// Picard iteration defaults for the mild-solution solver.
inline constexpr double picard_tol = 1e-8;
inline constexpr int picard_max_iter = 200;

/// Steering outer loop defaults.
inline constexpr double steer_tol = 1e-9;
inline constexpr int steer_max_iter = 50;

/// A converged trajectory must satisfy the nonlocal condition to this multiple of tol.
inline constexpr double nonlocal_residual_factor = 10.0;

/// Default acceptance threshold for `verify`: mild-equation residual (sup norm).
inline constexpr double verify_residual = 1e-3;

}  // namespace fracctl::tol
