#include "fracctl/control.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <sstream>

#include "fracctl/specfun.hpp"

namespace fracctl {

namespace {

void require_steering_regime(double alpha) {
    if (!(alpha > 0.5)) {
        std::ostringstream os;
        os << "Gramian steering needs alpha > 1/2: the factor (a - s)^{2 alpha - 2} of the "
              "squared kernel is not integrable for alpha = "
           << alpha;
        throw UnsupportedRegimeError(os.str());
    }
}

std::vector<ModeVector> add_scaled(const std::vector<ModeVector>& x, double s,
                                   const std::vector<ModeVector>& y) {
    std::vector<ModeVector> out = x;
    for (std::size_t j = 0; j < out.size(); ++j) {
        for (std::size_t m = 0; m < out[j].size(); ++m) out[j][m] += s * y[j][m];
    }
    return out;
}

std::vector<ModeVector> node_source(const ProblemSpec& problem, const TimeGrid& grid,
                                    const std::vector<ModeVector>& u) {
    std::vector<ModeVector> out(u.size(), ModeVector(problem.model.n_modes(), 0.0));
    if (problem.f.is_zero()) return out;
    for (std::size_t j = 0; j < u.size(); ++j) problem.f.eval(grid.node(j), u[j], out[j]);
    return out;
}

double max_diff(const std::vector<ModeVector>& a, const std::vector<ModeVector>& b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        for (std::size_t m = 0; m < a[j].size(); ++m) d = std::max(d, std::abs(a[j][m] - b[j][m]));
    }
    return d;
}

}  // namespace

std::vector<double> trapezoid_weights(const TimeGrid& grid) {
    std::vector<double> q(grid.size(), grid.step());
    q.front() *= 0.5;
    q.back() *= 0.5;
    return q;
}

double l2_norm(const TimeGrid& grid, const std::vector<ModeVector>& x) {
    if (x.size() != grid.size()) throw UsageError("l2_norm: one mode vector per node expected");
    const auto q = trapezoid_weights(grid);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        for (double v : x[j]) s += q[j] * v * v;
    }
    return std::sqrt(s);
}

Trajectory apply_K(const ProblemSpec& problem, const ControlSignal& mu, GreenForm form) {
    const MildSolver solver(problem, mu.grid, form);
    return {mu.grid, solver.green_map(mu.values)};
}

double estimate_K_norm(const ProblemSpec& problem, const TimeGrid& grid, int iterations) {
    const MildSolver solver(problem, grid);
    const auto q = trapezoid_weights(grid);
    const std::size_t size = grid.size();
    std::vector<double> sq(size), isq(size);
    for (std::size_t j = 0; j < size; ++j) {
        sq[j] = std::sqrt(q[j]);
        isq[j] = 1.0 / sq[j];
    }
    double best = 0.0;
    for (std::size_t m = 0; m < problem.model.n_modes(); ++m) {
        // A = Q^{1/2} M Q^{-1/2}; largest singular value by power iteration on A^T A
        auto a = solver.mode_matrix(m);
        for (std::size_t i = 0; i < size; ++i) {
            for (std::size_t j = 0; j < size; ++j) a[i * size + j] *= sq[i] * isq[j];
        }
        std::vector<double> x(size, 1.0), y(size), z(size);
        double sigma = 0.0;
        for (int it = 0; it < iterations; ++it) {
            for (std::size_t i = 0; i < size; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < size; ++j) s += a[i * size + j] * x[j];
                y[i] = s;
            }
            std::fill(z.begin(), z.end(), 0.0);
            for (std::size_t i = 0; i < size; ++i) {
                for (std::size_t j = 0; j < size; ++j) z[j] += a[i * size + j] * y[i];
            }
            const double nz = norm(z);
            if (nz == 0.0) break;
            sigma = std::sqrt(nz / norm(x));
            for (std::size_t j = 0; j < size; ++j) x[j] = z[j] / nz;
        }
        best = std::max(best, sigma);
    }
    return best;
}

Trajectory nemytskii(const ProblemSpec& problem, const Trajectory& z) {
    problem.validate();
    for (const auto& x : z.states) {
        if (x.size() != problem.model.n_modes()) throw UsageError("nemytskii: mode vector length");
    }
    return {z.grid, node_source(problem, z.grid, z.states)};
}

MildSolution solution_map_W(const ProblemSpec& problem, const ControlSignal& mu,
                            const SolveOptions& options) {
    const MildSolver solver(problem, mu.grid, options.form);
    return solver.solve(mu.values, options);
}

GrowthFit fit_growth(const ProblemSpec& problem, const ControlSignal& direction,
                     std::span<const double> scales, const SolveOptions& options) {
    if (scales.size() < 2) throw UsageError("fit_growth: need at least two scales");
    const MildSolver solver(problem, direction.grid, options.form);
    GrowthFit fit;
    for (double s : scales) {
        std::vector<ModeVector> mu = direction.values;
        for (auto& x : mu) {
            for (double& v : x) v *= s;
        }
        const auto sol = solver.solve(mu, options);
        fit.mu_norms.push_back(l2_norm(direction.grid, mu));
        fit.w_norms.push_back(l2_norm(direction.grid, sol.trajectory.states));
    }
    // least-squares slope, then the smallest intercept that puts every sample under the line
    const double n = static_cast<double>(scales.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < scales.size(); ++i) {
        sx += fit.mu_norms[i];
        sy += fit.w_norms[i];
        sxx += fit.mu_norms[i] * fit.mu_norms[i];
        sxy += fit.mu_norms[i] * fit.w_norms[i];
    }
    const double den = n * sxx - sx * sx;
    fit.b_slope = den > 0 ? std::max(0.0, (n * sxy - sx * sy) / den) : 0.0;
    fit.a_const = 0.0;
    for (std::size_t i = 0; i < scales.size(); ++i) {
        fit.a_const = std::max(fit.a_const, fit.w_norms[i] - fit.b_slope * fit.mu_norms[i]);
    }
    return fit;
}

RegularizedSolution regularized_W(const ProblemSpec& problem, const ControlSignal& mu, int n,
                                  const SolveOptions& options) {
    if (n < 1) throw UsageError("regularized_W: n must be a positive integer");
    if (!(options.tol > 0.0) || options.max_iter < 1 ||
        !(options.damping > 0.0 && options.damping <= 1.0)) {
        throw UsageError("regularized_W: invalid solver options");
    }
    const TimeGrid& grid = mu.grid;
    const MildSolver solver(problem, grid, options.form);
    const std::size_t nm = problem.model.n_modes();
    const auto k_mu = solver.green_map(mu.values);
    const double inv_n = 1.0 / n;

    RegularizedSolution out{Trajectory::zeros(grid, nm), {}, 0.0};
    auto& u = out.trajectory.states;
    auto& rep = out.report;
    for (const auto& x : mu.values) rep.control_bound_psi = std::max(rep.control_bound_psi, norm(x));

    bool converged = false;
    for (int it = 1; it <= options.max_iter; ++it) {
        const auto nu = node_source(problem, grid, u);
        auto next = add_scaled(add_scaled(k_mu, 1.0, solver.green_map(nu)), inv_n, nu);
        if (options.damping != 1.0) next = add_scaled(add_scaled(u, -options.damping, u), options.damping, next);
        const double diff = max_diff(next, u);
        u = std::move(next);
        rep.iterations = it;
        rep.final_residual = diff;
        rep.residual_history.push_back(diff);
        if (!std::isfinite(diff)) break;
        if (diff <= options.tol) {
            converged = true;
            break;
        }
    }
    const auto& h = rep.residual_history;
    if (h.size() >= 2 && h.front() > 0.0 && h.back() > 0.0) {
        rep.contraction_estimate = std::pow(h.back() / h.front(), 1.0 / static_cast<double>(h.size() - 1));
    }
    if (!converged) {
        std::ostringstream os;
        os << "regularized fixed point did not converge for n = " << n << " after " << rep.iterations
           << " iterations (last difference " << rep.final_residual << ")";
        throw NonConvergenceError(os.str(), rep.iterations, rep.contraction_estimate, rep.final_residual);
    }
    const auto nu = node_source(problem, grid, u);
    out.q = l2_norm(grid, nu);
    // u - N u / n = K (mu + N u) carries the nonlocal condition
    rep.nonlocal_residual = solver.nonlocal_residual(add_scaled(u, -inv_n, nu), add_scaled(mu.values, 1.0, nu));
    return out;
}

std::vector<double> gramian(const ProblemSpec& problem) {
    problem.validate();
    require_steering_regime(problem.alpha);
    const auto inv = build_O(problem.model, problem.alpha, problem.nonlocal);
    const double alpha = problem.alpha, a = problem.horizon();
    const auto& nl = problem.nonlocal;

    std::vector<double> breaks{0.0};
    for (double tk : nl.t) {
        if (tk > breaks.back()) breaks.push_back(tk);
    }
    if (a > breaks.back()) breaks.push_back(a);

    boost::math::quadrature::tanh_sinh<double> integrator;
    std::vector<double> out(problem.model.n_modes(), 0.0);
    for (std::size_t m = 0; m < out.size(); ++m) {
        const double kappa = problem.gains[m];
        if (kappa == 0.0) continue;
        const double lambda = problem.model.lambda(m);
        const double ta = mittag_leffler(alpha, 1.0, -lambda * std::pow(a, alpha)) * inv.o[m];
        double total = 0.0;
        for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
            const double lo = breaks[p], hi = breaks[p + 1];
            auto kernel = [&](double s, double sc) {
                // distance to the right end, accurate near the singular abscissa
                const double right = sc > 0.0 ? sc : hi - s;
                auto dist = [&](double point) { return point == hi ? right : point - s; };
                double g = ml_derivative_kernel(alpha, lambda, dist(a));
                for (std::size_t k = 0; k < nl.size(); ++k) {
                    if (nl.t[k] >= hi) g += nl.c[k] * ta * ml_derivative_kernel(alpha, lambda, dist(nl.t[k]));
                }
                return g * g;
            };
            total += integrator.integrate(kernel, lo, hi, 1e-12);
        }
        out[m] = kappa * kappa * total;
    }
    return out;
}

std::vector<double> discrete_gramian(const MildSolver& solver) {
    const auto& problem = solver.problem();
    const auto q = trapezoid_weights(solver.grid());
    std::vector<double> out(problem.model.n_modes(), 0.0);
    for (std::size_t m = 0; m < out.size(); ++m) {
        const double kappa = problem.gains[m];
        if (kappa == 0.0) continue;
        const auto w = solver.endpoint_weights(m);
        double s = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * w[j] / q[j];
        out[m] = kappa * kappa * s;
    }
    return out;
}

SteeringResult steer(const MildSolver& solver, const ModeVector& target, double rho,
                     const SteerOptions& options) {
    const auto& problem = solver.problem();
    const auto& grid = solver.grid();
    require_steering_regime(problem.alpha);
    if (!(rho > 0.0) || !std::isfinite(rho)) throw UsageError("steer: rho must be positive");
    const std::size_t nm = problem.model.n_modes();
    if (target.size() != nm) throw UsageError("steer: target must have one entry per mode");
    if (!(options.tol > 0.0) || options.max_iter < 1) throw UsageError("steer: invalid options");

    SolveOptions inner = options.inner;
    inner.tol = std::min(inner.tol, options.tol / 100.0);

    const auto q = trapezoid_weights(grid);
    std::vector<std::vector<double>> w(nm);
    for (std::size_t m = 0; m < nm; ++m) w[m] = solver.endpoint_weights(m);

    SteeringResult res{ControlSignal::zeros(grid, nm), {}, {}, 0.0, 0.0, 0.0, 0, false, {}, {}};
    res.target = target;
    res.rho = rho;
    res.gramian = discrete_gramian(solver);
    res.endpoint.assign(nm, 0.0);
    res.stagnant = norm(target) > 0.0 &&
                   std::all_of(res.gramian.begin(), res.gramian.end(), [](double g) { return g == 0.0; });

    std::vector<ModeVector> u(grid.size(), ModeVector(nm, 0.0));
    bool settled = false;
    for (int it = 1; it <= options.max_iter; ++it) {
        // phi = endpoint of int G(a, s) f(s, u_j(s)) ds under the discrete map
        const auto fu = node_source(problem, grid, u);
        std::vector<ModeVector> forcing(grid.size(), ModeVector(nm, 0.0));
        for (std::size_t m = 0; m < nm; ++m) {
            double phi = 0.0;
            for (std::size_t j = 0; j < grid.size(); ++j) phi += w[m][j] * fu[j][m];
            const double kappa = problem.gains[m];
            const double coef = res.gramian[m] > 0.0 ? (target[m] - phi) / (rho + res.gramian[m]) : 0.0;
            for (std::size_t j = 0; j < grid.size(); ++j) {
                const double v = kappa * w[m][j] / q[j] * coef;
                res.control.values[j][m] = v;
                forcing[j][m] = kappa * v;
            }
        }
        auto sol = solver.solve(forcing, inner);
        u = std::move(sol.trajectory.states);
        ModeVector change(nm);
        for (std::size_t m = 0; m < nm; ++m) change[m] = u.back()[m] - res.endpoint[m];
        res.endpoint = u.back();
        res.trace.push_back(norm(change));
        res.outer_iterations = it;
        if (!std::isfinite(res.trace.back())) break;
        if (res.trace.back() <= options.tol) {
            settled = true;
            break;
        }
    }
    if (!settled) {
        std::ostringstream os;
        os << "steering loop did not settle after " << res.outer_iterations
           << " outer iterations; endpoint changes:";
        for (double d : res.trace) os << ' ' << d;
        throw SteeringDivergenceError(os.str(), res.trace);
    }
    ModeVector err(nm);
    for (std::size_t m = 0; m < nm; ++m) err[m] = res.endpoint[m] - target[m];
    res.endpoint_error = norm(err);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        for (double v : res.control.values[j]) res.control_energy += q[j] * v * v;
    }
    return res;
}

SteeringResult steer(const ProblemSpec& problem, const TimeGrid& grid, const ModeVector& target,
                     double rho, const SteerOptions& options) {
    problem.validate();
    require_steering_regime(problem.alpha);
    const MildSolver solver(problem, grid, options.inner.form);
    return steer(solver, target, rho, options);
}

std::vector<ReachabilityRow> reachability_experiment(const ProblemSpec& problem,
                                                     const TimeGrid& grid,
                                                     const std::vector<Target>& targets,
                                                     std::span<const double> rhos,
                                                     const SteerOptions& options) {
    problem.validate();
    require_steering_regime(problem.alpha);
    if (rhos.empty()) throw UsageError("reachability_experiment: rho list is empty");
    for (std::size_t i = 0; i < rhos.size(); ++i) {
        if (!(rhos[i] > 0.0) || (i > 0 && !(rhos[i] < rhos[i - 1]))) {
            throw UsageError("reachability_experiment: rhos must be positive and strictly decreasing");
        }
    }
    const MildSolver solver(problem, grid, options.inner.form);
    std::vector<ReachabilityRow> rows;
    for (const auto& target : targets) {
        for (double rho : rhos) {
            const auto r = steer(solver, target.coefficients, rho, options);
            rows.push_back({target.id, rho, r.endpoint_error, r.control_energy, r.outer_iterations, r.stagnant});
        }
    }
    return rows;
}

}  // namespace fracctl
