#pragma once

#include <span>
#include <string>
#include <vector>

#include "fracctl/errors.hpp"
#include "fracctl/nonlocal.hpp"

namespace fracctl {

/// Trapezoid weights of the discrete L^2(J) inner product on the grid.
std::vector<double> trapezoid_weights(const TimeGrid& grid);

/// ||x||_{L^2(J, E)} of node-sampled mode vectors, trapezoid rule in time.
double l2_norm(const TimeGrid& grid, const std::vector<ModeVector>& x);

/// (K mu)(t) = int_0^a G(t, s) mu(s) ds for a state-space forcing mu (f and B not applied).
Trajectory apply_K(const ProblemSpec& problem, const ControlSignal& mu,
                   GreenForm form = GreenForm::full_horizon);

/// Operator norm of the discrete K on L^2(J, E) (power iteration per mode); the constant k.
double estimate_K_norm(const ProblemSpec& problem, const TimeGrid& grid, int iterations = 200);

/// [N z](t_j) = f(t_j, z(t_j)).
Trajectory nemytskii(const ProblemSpec& problem, const Trajectory& z);

/// Fixed point of u = K mu + K N u.
MildSolution solution_map_W(const ProblemSpec& problem, const ControlSignal& mu,
                            const SolveOptions& options = {});

/// Affine envelope ||W mu|| <= a_const + b_slope ||mu|| in L^2(J, E), fitted over scaled copies
/// of one control.
struct GrowthFit {
    double a_const = 0.0;
    double b_slope = 0.0;
    std::vector<double> mu_norms;
    std::vector<double> w_norms;
};
GrowthFit fit_growth(const ProblemSpec& problem, const ControlSignal& direction,
                     std::span<const double> scales, const SolveOptions& options = {});

struct RegularizedSolution {
    Trajectory trajectory;
    SolveReport report;
    /// ||N u_n||_{L^2(J, E)} at the computed fixed point.
    double q = 0.0;
};

/// Fixed point of u = K mu + K N u + (1/n) N u, i.e. u = K mu + K_n N u with K_n = K + I/n.
RegularizedSolution regularized_W(const ProblemSpec& problem, const ControlSignal& mu, int n,
                                  const SolveOptions& options = {});

/// Gamma_n = kappa_n^2 int_0^a Ghat_n(s)^2 ds with Ghat_n the mode-n kernel of G(a, s),
/// by tanh-sinh quadrature between the singular abscissas. Requires alpha > 1/2.
std::vector<double> gramian(const ProblemSpec& problem);

/// Gramian of the discrete endpoint map: kappa_n^2 sum_j w_{n,j}^2 / q_j, where
/// u_n(a) = sum_j w_{n,j} g_j[n] and q_j are the trapezoid weights.
std::vector<double> discrete_gramian(const MildSolver& solver);

struct SteerOptions {
    double tol = tol::steer_tol;
    int max_iter = tol::steer_max_iter;
    /// Inner solves run at min(inner.tol, tol / 100).
    SolveOptions inner;
};

struct SteeringResult {
    ControlSignal control;
    ModeVector endpoint;
    ModeVector target;
    double endpoint_error = 0.0;
    /// sum_j q_j ||v_j||^2
    double control_energy = 0.0;
    double rho = 0.0;
    int outer_iterations = 0;
    /// No control authority (zero Gramian) while the target is nonzero.
    bool stagnant = false;
    /// Discrete Gramian used by the normal equation.
    std::vector<double> gramian;
    /// Endpoint change per outer iteration.
    std::vector<double> trace;
};

/// The outer steering loop did not settle; carries the endpoint-change trace.
class SteeringDivergenceError : public NonConvergenceError {
public:
    SteeringDivergenceError(const std::string& what, std::vector<double> trace)
        : NonConvergenceError(what, static_cast<int>(trace.size()), 0.0,
                              trace.empty() ? 0.0 : trace.back()),
          trace_(std::move(trace)) {}

    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

/// Regularized-Gramian steering toward `target` at time a.
SteeringResult steer(const MildSolver& solver, const ModeVector& target, double rho,
                     const SteerOptions& options = {});
SteeringResult steer(const ProblemSpec& problem, const TimeGrid& grid, const ModeVector& target,
                     double rho, const SteerOptions& options = {});

struct Target {
    std::string id;
    ModeVector coefficients;
};

struct ReachabilityRow {
    std::string target_id;
    double rho = 0.0;
    double endpoint_error = 0.0;
    double control_energy = 0.0;
    int outer_iterations = 0;
    bool stagnant = false;
};

/// steer() for every (target, rho) pair; rhos must be positive and strictly decreasing.
std::vector<ReachabilityRow> reachability_experiment(const ProblemSpec& problem,
                                                     const TimeGrid& grid,
                                                     const std::vector<Target>& targets,
                                                     std::span<const double> rhos,
                                                     const SteerOptions& options = {});

}  // namespace fracctl
