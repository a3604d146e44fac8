#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fracctl/constants.hpp"
#include "fracctl/fraccalc.hpp"
#include "fracctl/spectral.hpp"

namespace fracctl {

/// Nonlocal initial condition u(0) = sum_k c_k u(t_k) on the horizon [0, a].
struct NonlocalSpec {
    std::vector<double> c;
    std::vector<double> t;
    double horizon = 1.0;

    std::size_t size() const { return c.size(); }
    /// Throws UsageError unless 0 < t_1 < ... < t_m <= a and the weights are finite.
    void validate() const;
};

/// Source term f(t, u) acting on mode vectors, with the growth constants of
/// ||f(t, u)|| <= L ||u|| + phi(t), phi <= b.
struct Nonlinearity {
    using Eval = std::function<void(double t, std::span<const double> u, std::span<double> out)>;

    std::string name = "none";
    /// Empty for f = 0.
    Eval eval;
    double lipschitz = 0.0;
    double bound_b = 0.0;

    bool is_zero() const { return !eval; }
    ModeVector operator()(double t, std::span<const double> u) const;

    static Nonlinearity none();
    /// f(t, u)(x) = sin(u(x)) / (t^2 + 1) on (0, pi), projected back onto the first
    /// n_modes sine modes. L = 1, b = sqrt(pi).
    static Nonlinearity demo_sine(std::size_t n_modes);
    /// f(u)(x) = sum_i coeffs[i] u(x)^i pointwise on (0, pi). Declared L is |coeffs[1]| for
    /// degree <= 1 and infinite otherwise; b = |coeffs[0]| sqrt(pi).
    static Nonlinearity polynomial(std::vector<double> coeffs, std::size_t n_modes);
};

struct ProblemSpec {
    SpectralModel model;
    double alpha = 0.75;
    NonlocalSpec nonlocal;
    Nonlinearity f;
    /// Control operator B = diag(gains).
    ModeVector gains;

    double horizon() const { return nonlocal.horizon; }
    void validate() const;

    static ModeVector uniform_gains(std::size_t n_modes, double kappa) {
        return ModeVector(n_modes, kappa);
    }
};

/// Mild solution on a grid: one mode vector per node.
struct Trajectory {
    TimeGrid grid;
    std::vector<ModeVector> states;

    static Trajectory zeros(const TimeGrid& grid, std::size_t n_modes);
};

/// Control (or state-space forcing) sampled on the grid.
struct ControlSignal {
    TimeGrid grid;
    std::vector<ModeVector> values;

    static ControlSignal zeros(const TimeGrid& grid, std::size_t n_modes);
    static ControlSignal constant(const TimeGrid& grid, const ModeVector& w);
};

struct H1Check {
    bool admissible = true;
    double margin = 1.0;
    double m_t = 1.0;
    double sum_abs_c = 0.0;
};

/// sum_k |c_k| M_T < 1, with M_T estimated on [0, a].
H1Check check_H1(const SpectralModel& model, double alpha, const NonlocalSpec& nonlocal);

/// Diagonal (I - sum_k c_k T_alpha(t_k))^{-1}.
struct NonlocalInverse {
    std::vector<double> o;
    /// q_n = sum_k c_k E_alpha(-lambda_n t_k^alpha), the diagonal of sum_k c_k T_alpha(t_k).
    std::vector<double> q;
    /// Neumann terms used per mode.
    std::vector<int> terms;
    /// 1 / (1 - M_T sum |c_k|).
    double bound = 1.0;
};

/// Neumann summation per mode. Throws InadmissibleError when H1 fails.
NonlocalInverse build_O(const SpectralModel& model, double alpha, const NonlocalSpec& nonlocal);

/// 1 / (1 - q_n) per mode, for cross-checking the Neumann sums.
std::vector<double> build_O_closed_form(const SpectralModel& model, double alpha,
                                        const NonlocalSpec& nonlocal);

/// G(t, s) w. Throws DomainError at s = t or s = t_k, where the kernel is singular.
ModeVector green_apply(const ProblemSpec& problem, double t, double s, std::span<const double> w);

struct GreenBound {
    /// max over sampled (t, s), s < t, of d^{1-alpha} max_n |[G(t, s) 1]_n|, with d the
    /// distance from s to the nearest active singular abscissa.
    double n_const = 0.0;
    double t_at = 0.0;
    double s_at = 0.0;
};
GreenBound green_bound(const ProblemSpec& problem, int samples = 200);

/// Which form of the Green's-function integral the solver evaluates.
enum class GreenForm {
    /// int_0^a G(t, s) g(s) ds, the form equivalent to the nonlocal problem.
    full_horizon,
    /// int_0^t G(t, s) g(s) ds; compatibility only, does not reproduce u(0) = sum c_k u(t_k).
    truncated_to_t,
};

struct SolveOptions {
    double tol = tol::picard_tol;
    int max_iter = tol::picard_max_iter;
    double damping = 1.0;
    GreenForm form = GreenForm::full_horizon;
};

struct SolveReport {
    int iterations = 0;
    double final_residual = 0.0;
    double nonlocal_residual = 0.0;
    /// Geometric mean of successive-difference ratios over the run.
    double contraction_estimate = 0.0;
    /// sup_t ||B v(t)|| of the supplied control (per-run bound psi).
    double control_bound_psi = 0.0;
    std::vector<double> residual_history;
};

struct MildSolution {
    Trajectory trajectory;
    SolveReport report;
};

/// Precomputed kernels of the Green's-function integral on one grid.
///
/// For every mode the lattice weights of int_0^{t_n} S_alpha(t_n - s) g(s) ds, the node
/// rules for int_0^{t_k} S_alpha(t_k - s) g(s) ds (t_k may be off-grid), and the values
/// T_alpha(t_n) are tabulated once; a Picard sweep is then a set of dot products.
class MildSolver {
public:
    MildSolver(const ProblemSpec& problem, const TimeGrid& grid,
               GreenForm form = GreenForm::full_horizon);
    ~MildSolver();
    MildSolver(MildSolver&&) noexcept;
    MildSolver& operator=(MildSolver&&) noexcept;

    const ProblemSpec& problem() const;
    const TimeGrid& grid() const;
    const NonlocalInverse& inverse() const;

    /// u(t_n) = int G(t_n, s) g(s) ds for state-space forcing g given per node, summing the
    /// additive Green terms one by one.
    std::vector<ModeVector> green_map(const std::vector<ModeVector>& g) const;

    /// Same quantity via u(0) = O sum_k c_k int_0^{t_k} S(t_k - s) g ds followed by
    /// u(t) = T(t) u(0) + int_0^t S(t - s) g ds.
    std::vector<ModeVector> two_step_map(const std::vector<ModeVector>& g) const;

    /// Weights w_{n,j} with u(a)_n = sum_j w_{n,j} g_j[n] for the discrete endpoint map.
    std::vector<double> endpoint_weights(std::size_t mode) const;

    /// Full discrete operator of one mode: u_i = sum_j M[i][j] g_j (row-major, size^2).
    std::vector<double> mode_matrix(std::size_t mode) const;

    /// ||u(0) - sum_k c_k u(t_k)|| with u(t_k) = T(t_k) u(0) + int_0^{t_k} S(t_k - s) g ds.
    double nonlocal_residual(const std::vector<ModeVector>& states,
                             const std::vector<ModeVector>& g) const;

    /// Picard iteration for u = int G [forcing + f(s, u)] ds from u = 0.
    MildSolution solve(const std::vector<ModeVector>& forcing, const SolveOptions& options) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Solves the mild equation with forcing B v.
MildSolution solve_mild(const ProblemSpec& problem, const TimeGrid& grid, const ControlSignal& v,
                        const SolveOptions& options = {});

struct VerifyReport {
    /// sup over nodes and modes of |u(t) - T(t) u(0) - int_0^t S(t - s) g(s) ds| where the
    /// integral weights are exact for S_alpha against piecewise-linear g.
    double mild_residual = 0.0;
    /// ||u(0) - sum_k c_k u(t_k)|| with u(t_k) reconstructed by the same exact-kernel rule.
    double nonlocal_residual = 0.0;
    /// The mild residual under the solver's own product rule (discretization-free check).
    double consistency_residual = 0.0;
    /// T(a) u(0) + int_0^a S(a - s) g(s) ds under the solver's product rule.
    ModeVector endpoint;
    std::vector<double> node_residuals;
};

/// Independent check of a trajectory against the variation-of-constants form using its own
/// u(0); g = B v + f(s, u(s)).
VerifyReport verify_mild(const ProblemSpec& problem, const Trajectory& trajectory,
                         const ControlSignal& v);

}  // namespace fracctl
