#include "fracctl/nonlocal.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "fracctl/errors.hpp"
#include "fracctl/simd/kernels.hpp"
#include "fracctl/specfun.hpp"

namespace fracctl {

namespace {

/// Dirichlet sine basis sqrt(2/pi) sin(n x) sampled at x_j = j pi / (P + 1), j = 1..P.
/// With these points the discrete projection is exact for sine polynomials of degree <= P.
class SineBasis {
public:
    SineBasis(std::size_t n_modes, std::size_t n_points)
        : n_modes_(n_modes), n_points_(n_points), phi_(n_modes * n_points) {
        const double c = std::sqrt(2.0 / std::numbers::pi);
        for (std::size_t j = 0; j < n_points; ++j) {
            const double x = std::numbers::pi * static_cast<double>(j + 1) / (n_points + 1);
            for (std::size_t n = 0; n < n_modes; ++n) {
                phi_[j * n_modes + n] = c * std::sin(static_cast<double>(n + 1) * x);
            }
        }
    }

    std::size_t n_points() const { return n_points_; }

    void synthesize(std::span<const double> modes, std::span<double> values) const {
        for (std::size_t j = 0; j < n_points_; ++j) {
            values[j] = simd::dot(modes, std::span(phi_).subspan(j * n_modes_, n_modes_));
        }
    }

    /// out += (pi / (P + 1)) sum_j values[j] phi_n(x_j)
    void analyze_add(std::span<const double> values, std::span<double> out) const {
        const double w = std::numbers::pi / static_cast<double>(n_points_ + 1);
        for (std::size_t j = 0; j < n_points_; ++j) {
            simd::axpy(w * values[j], std::span(phi_).subspan(j * n_modes_, n_modes_), out);
        }
    }

private:
    std::size_t n_modes_;
    std::size_t n_points_;
    std::vector<double> phi_;
};

std::size_t quadrature_points(std::size_t n_modes) { return std::max<std::size_t>(4 * n_modes, 64); }

void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* who) {
    if (!(a == b)) {
        std::ostringstream os;
        os << who << ": grid mismatch (" << a.n_steps() << " steps on [0, " << a.horizon()
           << "] vs " << b.n_steps() << " steps on [0, " << b.horizon() << "])";
        throw UsageError(os.str());
    }
}

void require_node_vectors(const std::vector<ModeVector>& v, std::size_t nodes, std::size_t modes,
                          const char* who) {
    if (v.size() != nodes) {
        std::ostringstream os;
        os << who << ": expected " << nodes << " node values, got " << v.size();
        throw UsageError(os.str());
    }
    for (const auto& x : v) {
        if (x.size() != modes) {
            std::ostringstream os;
            os << who << ": mode vector of length " << x.size() << ", model has " << modes;
            throw UsageError(os.str());
        }
    }
}

/// E_{alpha,alpha}(-lambda tau^alpha), the smooth factor of S_alpha(tau) = tau^{alpha-1} H(tau).
double s_smooth(double alpha, double lambda, double tau) {
    if (tau == 0.0) return 1.0 / gamma(alpha);
    return mittag_leffler(alpha, alpha, -lambda * std::pow(tau, alpha));
}

double t_value(double alpha, double lambda, double t) {
    if (t == 0.0) return 1.0;
    return mittag_leffler(alpha, 1.0, -lambda * std::pow(t, alpha));
}

double sample(const RuleEntry& e, std::span<const double> g) {
    return e.theta * g[e.lo] + (1.0 - e.theta) * g[e.hi];
}

/// Exact weights of int_d^{d+len} S_alpha(tau) phi(tau) dtau for phi linear on the cell,
/// attached to the far end (tau = d + len) and the near end (tau = d).
struct ExactCell {
    double far;
    double near;
};

ExactCell exact_cell(double alpha, double lambda, double d, double len) {
    if (d >= 4.0 * len) {
        // S_alpha is analytic on a neighbourhood of the cell; 8-point Gauss-Legendre is
        // exact to round-off there.
        using rule = boost::math::quadrature::gauss<double, 8>;
        const auto& x = rule::abscissa();
        const auto& w = rule::weights();
        double far = 0.0, near = 0.0;
        const double mid = d + 0.5 * len, half = 0.5 * len;
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (double sign : {-1.0, 1.0}) {
                const double tau = mid + sign * half * x[i];
                const double s = std::pow(tau, alpha - 1.0) * s_smooth(alpha, lambda, tau);
                const double lam = (tau - d) / len;
                far += w[i] * half * s * lam;
                near += w[i] * half * s * (1.0 - lam);
            }
        }
        return {far, near};
    }
    // P0(x) = int_0^x S = x^alpha E_{alpha,alpha+1}(-lambda x^alpha),
    // P1(x) = int_0^x tau S = x^{alpha+1} [E_{alpha,alpha+1} - E_{alpha,alpha+2}](-lambda x^alpha).
    auto moments = [&](double x, double& p0, double& p1) {
        if (x == 0.0) {
            p0 = p1 = 0.0;
            return;
        }
        const double xa = std::pow(x, alpha);
        const double e1 = mittag_leffler(alpha, alpha + 1.0, -lambda * xa);
        const double e2 = mittag_leffler(alpha, alpha + 2.0, -lambda * xa);
        p0 = xa * e1;
        p1 = xa * x * (e1 - e2);
    };
    double a0, a1, b0, b1;
    moments(d, a0, a1);
    moments(d + len, b0, b1);
    const double dp0 = b0 - a0, dp1 = b1 - a1;
    const double far = (dp1 - d * dp0) / len;
    return {far, dp0 - far};
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Problem description

void NonlocalSpec::validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw UsageError("NonlocalSpec: horizon must be positive and finite");
    }
    if (c.size() != t.size()) {
        throw UsageError("NonlocalSpec: weights and times must have the same length");
    }
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!std::isfinite(c[k])) throw UsageError("NonlocalSpec: weights must be finite");
        if (!(t[k] > 0.0) || t[k] > horizon) {
            throw UsageError("NonlocalSpec: times must lie in (0, a]");
        }
        if (k > 0 && !(t[k] > t[k - 1])) {
            throw UsageError("NonlocalSpec: times must be strictly increasing");
        }
    }
}

ModeVector Nonlinearity::operator()(double t, std::span<const double> u) const {
    ModeVector out(u.size(), 0.0);
    if (eval) eval(t, u, out);
    return out;
}

Nonlinearity Nonlinearity::none() { return Nonlinearity{}; }

Nonlinearity Nonlinearity::demo_sine(std::size_t n_modes) {
    auto basis = std::make_shared<const SineBasis>(n_modes, quadrature_points(n_modes));
    Nonlinearity f;
    f.name = "demo_sin";
    f.lipschitz = 1.0;
    f.bound_b = std::sqrt(std::numbers::pi);
    f.eval = [basis](double t, std::span<const double> u, std::span<double> out) {
        std::vector<double> values(basis->n_points());
        basis->synthesize(u, values);
        const double scale = 1.0 / (t * t + 1.0);
        for (double& v : values) v = std::sin(v) * scale;
        std::fill(out.begin(), out.end(), 0.0);
        basis->analyze_add(values, out);
    };
    return f;
}

Nonlinearity Nonlinearity::polynomial(std::vector<double> coeffs, std::size_t n_modes) {
    while (!coeffs.empty() && coeffs.back() == 0.0) coeffs.pop_back();
    for (double a : coeffs) {
        if (!std::isfinite(a)) throw UsageError("polynomial nonlinearity: coefficients must be finite");
    }
    Nonlinearity f;
    std::ostringstream name;
    name << "polynomial(";
    for (std::size_t i = 0; i < coeffs.size(); ++i) name << (i ? " " : "") << coeffs[i];
    name << ")";
    f.name = name.str();
    if (coeffs.empty()) return f;

    f.lipschitz = coeffs.size() <= 2 ? std::abs(coeffs.size() == 2 ? coeffs[1] : 0.0)
                                     : std::numeric_limits<double>::infinity();
    f.bound_b = std::abs(coeffs[0]) * std::sqrt(std::numbers::pi);

    // constant term: exact projection of 1 onto sqrt(2/pi) sin(n x)
    std::vector<double> one(n_modes);
    for (std::size_t n = 1; n <= n_modes; ++n) {
        one[n - 1] = n % 2 == 1 ? std::sqrt(2.0 / std::numbers::pi) * 2.0 / static_cast<double>(n) : 0.0;
    }
    std::shared_ptr<const SineBasis> basis;
    if (coeffs.size() > 2) basis = std::make_shared<const SineBasis>(n_modes, quadrature_points(n_modes));

    f.eval = [coeffs, one, basis](double, std::span<const double> u, std::span<double> out) {
        const double a1 = coeffs.size() > 1 ? coeffs[1] : 0.0;
        for (std::size_t n = 0; n < out.size(); ++n) out[n] = coeffs[0] * one[n] + a1 * u[n];
        if (!basis) return;
        std::vector<double> values(basis->n_points());
        basis->synthesize(u, values);
        for (double& v : values) {
            // sum_{i >= 2} a_i v^i by Horner
            double p = 0.0;
            for (std::size_t i = coeffs.size() - 1; i >= 2; --i) p = p * v + coeffs[i];
            v = p * v * v;
        }
        basis->analyze_add(values, out);
    };
    return f;
}

void ProblemSpec::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        std::ostringstream os;
        os << "problem: order alpha must lie in (0, 1], got " << alpha;
        throw DomainError(os.str());
    }
    nonlocal.validate();
    if (gains.size() != model.n_modes()) {
        throw UsageError("problem: control gains must have one entry per mode");
    }
    for (double g : gains) {
        if (!std::isfinite(g)) throw UsageError("problem: control gains must be finite");
    }
    if (!(f.lipschitz >= 0.0) || !(f.bound_b >= 0.0)) {
        throw UsageError("problem: growth constants L and b must be non-negative");
    }
}

Trajectory Trajectory::zeros(const TimeGrid& grid, std::size_t n_modes) {
    return {grid, std::vector<ModeVector>(grid.size(), ModeVector(n_modes, 0.0))};
}

ControlSignal ControlSignal::zeros(const TimeGrid& grid, std::size_t n_modes) {
    return {grid, std::vector<ModeVector>(grid.size(), ModeVector(n_modes, 0.0))};
}

ControlSignal ControlSignal::constant(const TimeGrid& grid, const ModeVector& w) {
    return {grid, std::vector<ModeVector>(grid.size(), w)};
}

// ---------------------------------------------------------------------------------------------
// Nonlocal inverse and Green's function

H1Check check_H1(const SpectralModel& model, double alpha, const NonlocalSpec& nonlocal) {
    H1Check out;
    for (double c : nonlocal.c) out.sum_abs_c += std::abs(c);
    out.m_t = estimate_MT(model, alpha, nonlocal.horizon);
    out.margin = 1.0 - out.sum_abs_c * out.m_t;
    out.admissible = out.margin > 0.0;
    return out;
}

NonlocalInverse build_O(const SpectralModel& model, double alpha, const NonlocalSpec& nonlocal) {
    nonlocal.validate();
    const H1Check h1 = check_H1(model, alpha, nonlocal);
    if (!h1.admissible) {
        std::ostringstream os;
        os << "nonlocal weights violate sum |c_k| M_T < 1: sum |c_k| = " << h1.sum_abs_c
           << ", M_T = " << h1.m_t << ", margin = " << h1.margin;
        throw InadmissibleError(os.str(), h1.margin);
    }
    NonlocalInverse inv;
    inv.bound = 1.0 / h1.margin;
    const std::size_t nm = model.n_modes();
    inv.o.assign(nm, 1.0);
    inv.q.assign(nm, 0.0);
    inv.terms.assign(nm, 1);
    for (std::size_t n = 0; n < nm; ++n) {
        double q = 0.0;
        for (std::size_t k = 0; k < nonlocal.size(); ++k) {
            q += nonlocal.c[k] * t_value(alpha, model.lambda(n), nonlocal.t[k]);
        }
        inv.q[n] = q;
        // o = sum_j q^j, stopped once |q^j| < neumann_term
        double term = 1.0, sum = 1.0;
        int terms = 1;
        while (std::abs(term) >= tol::neumann_term && terms < 100000) {
            term *= q;
            sum += term;
            ++terms;
        }
        inv.o[n] = sum;
        inv.terms[n] = terms;
    }
    return inv;
}

std::vector<double> build_O_closed_form(const SpectralModel& model, double alpha,
                                        const NonlocalSpec& nonlocal) {
    nonlocal.validate();
    std::vector<double> o(model.n_modes());
    for (std::size_t n = 0; n < o.size(); ++n) {
        double q = 0.0;
        for (std::size_t k = 0; k < nonlocal.size(); ++k) {
            q += nonlocal.c[k] * t_value(alpha, model.lambda(n), nonlocal.t[k]);
        }
        o[n] = 1.0 / (1.0 - q);
    }
    return o;
}

ModeVector green_apply(const ProblemSpec& problem, double t, double s, std::span<const double> w) {
    problem.validate();
    const double a = problem.horizon();
    if (!(t >= 0.0 && t <= a && s >= 0.0 && s <= a)) {
        throw DomainError("green_apply: t and s must lie in [0, a]");
    }
    if (s == t) throw DomainError("green_apply: kernel is singular at s = t");
    for (double tk : problem.nonlocal.t) {
        if (s == tk) throw DomainError("green_apply: kernel is singular at s = t_k");
    }
    if (w.size() != problem.model.n_modes()) throw UsageError("green_apply: mode vector length");

    const auto inv = build_O(problem.model, problem.alpha, problem.nonlocal);
    ModeVector out(w.size(), 0.0);
    for (std::size_t n = 0; n < w.size(); ++n) {
        const double lambda = problem.model.lambda(n);
        double g = 0.0;
        if (s < t) g += ml_derivative_kernel(problem.alpha, lambda, t - s);
        const double to = t_value(problem.alpha, lambda, t) * inv.o[n];
        for (std::size_t k = 0; k < problem.nonlocal.size(); ++k) {
            const double tk = problem.nonlocal.t[k];
            if (s < tk) g += problem.nonlocal.c[k] * to * ml_derivative_kernel(problem.alpha, lambda, tk - s);
        }
        out[n] = g * w[n];
    }
    return out;
}

GreenBound green_bound(const ProblemSpec& problem, int samples) {
    problem.validate();
    if (samples < 2) throw UsageError("green_bound: need at least 2 samples");
    const auto inv = build_O(problem.model, problem.alpha, problem.nonlocal);
    const double a = problem.horizon(), alpha = problem.alpha;
    const std::size_t M = static_cast<std::size_t>(samples);
    const auto& nl = problem.nonlocal;
    // t_i = (i + 1/2) a / M, s_j = (j + 1/4) a / M; t_i - s_j = (i - j + 1/4) a / M
    auto t_of = [&](std::size_t i) { return (static_cast<double>(i) + 0.5) * a / M; };
    auto s_of = [&](std::size_t j) { return (static_cast<double>(j) + 0.25) * a / M; };

    GreenBound out;
    for (std::size_t n = 0; n < problem.model.n_modes(); ++n) {
        const double lambda = problem.model.lambda(n);
        std::vector<double> s_lag(M), t_vals(M);
        for (std::size_t d = 0; d < M; ++d) {
            s_lag[d] = ml_derivative_kernel(alpha, lambda, (static_cast<double>(d) + 0.25) * a / M);
            t_vals[d] = t_value(alpha, lambda, t_of(d));
        }
        std::vector<std::vector<double>> s_k(nl.size(), std::vector<double>(M, 0.0));
        for (std::size_t k = 0; k < nl.size(); ++k) {
            for (std::size_t j = 0; j < M; ++j) {
                if (s_of(j) < nl.t[k]) s_k[k][j] = ml_derivative_kernel(alpha, lambda, nl.t[k] - s_of(j));
            }
        }
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                const double t = t_of(i), s = s_of(j);
                double dist = t - s;
                double g = s_lag[i - j];
                for (std::size_t k = 0; k < nl.size(); ++k) {
                    if (s < nl.t[k]) {
                        g += nl.c[k] * t_vals[i] * inv.o[n] * s_k[k][j];
                        dist = std::min(dist, nl.t[k] - s);
                    }
                }
                const double v = std::pow(dist, 1.0 - alpha) * std::abs(g);
                if (v > out.n_const) out = {v, t, s};
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Solver

struct MildSolver::Impl {
    struct ModeTables {
        std::vector<double> t_vals;    // T_alpha(t_n)
        std::vector<double> conv_rev;  // conv_rev[N-1-k] = lag(k) H(k h)
        std::vector<double> first;     // first(n) H(t_n)
        std::vector<std::vector<double>> rule_coef;  // [k][entry]
        std::vector<double> tk_vals;   // T_alpha(t_k)
        // truncated form: [k][n] coefficients of the rule on [0, min(t_n, t_k)]
        std::vector<std::vector<std::vector<double>>> trunc_coef;
    };

    ProblemSpec problem;
    TimeGrid grid;
    GreenForm form;
    NonlocalInverse inv;
    std::vector<SingularRule> rules;
    std::vector<std::vector<SingularRule>> trunc_rules;
    std::vector<ModeTables> modes;

    Impl(const ProblemSpec& p, const TimeGrid& g, GreenForm f) : problem(p), grid(g), form(f) {
        problem.validate();
        if (std::abs(grid.horizon() - problem.horizon()) > 1e-12 * problem.horizon()) {
            throw UsageError("MildSolver: grid horizon differs from the problem horizon");
        }
        inv = build_O(problem.model, problem.alpha, problem.nonlocal);
        const auto& nl = problem.nonlocal;
        const double alpha = problem.alpha;
        for (std::size_t k = 0; k < nl.size(); ++k) {
            rules.push_back(build_singular_rule(grid, alpha, nl.t[k], nl.t[k]));
        }
        if (form == GreenForm::truncated_to_t) {
            trunc_rules.resize(nl.size());
            for (std::size_t k = 0; k < nl.size(); ++k) {
                for (std::size_t n = 0; n < grid.size(); ++n) {
                    trunc_rules[k].push_back(
                        build_singular_rule(grid, alpha, nl.t[k], std::min(grid.node(n), nl.t[k])));
                }
            }
        }

        const ProductWeights w(alpha, grid);
        const std::size_t size = grid.size(), N = size - 1;
        modes.resize(problem.model.n_modes());
        for (std::size_t m = 0; m < modes.size(); ++m) {
            const double lambda = problem.model.lambda(m);
            auto& mt = modes[m];
            mt.t_vals.resize(size);
            mt.first.assign(size, 0.0);
            mt.conv_rev.resize(N);
            std::vector<double> h_lattice(size);
            for (std::size_t i = 0; i < size; ++i) {
                mt.t_vals[i] = t_value(alpha, lambda, grid.node(i));
                h_lattice[i] = s_smooth(alpha, lambda, static_cast<double>(i) * grid.step());
            }
            for (std::size_t k = 0; k < N; ++k) mt.conv_rev[N - 1 - k] = w.lag(k) * h_lattice[k];
            for (std::size_t n = 1; n < size; ++n) mt.first[n] = w.first(n) * h_lattice[n];

            auto coefficients = [&](const SingularRule& rule) {
                std::vector<double> c(rule.entries.size());
                for (std::size_t e = 0; e < c.size(); ++e) {
                    c[e] = rule.entries[e].weight * s_smooth(alpha, lambda, rule.entries[e].tau);
                }
                return c;
            };
            for (std::size_t k = 0; k < nl.size(); ++k) {
                mt.rule_coef.push_back(coefficients(rules[k]));
                mt.tk_vals.push_back(t_value(alpha, lambda, nl.t[k]));
            }
            if (form == GreenForm::truncated_to_t) {
                mt.trunc_coef.resize(nl.size());
                for (std::size_t k = 0; k < nl.size(); ++k) {
                    for (const auto& rule : trunc_rules[k]) mt.trunc_coef[k].push_back(coefficients(rule));
                }
            }
        }
    }

    static double apply_rule(const SingularRule& rule, const std::vector<double>& coef,
                             std::span<const double> g) {
        double s = 0.0;
        for (std::size_t e = 0; e < coef.size(); ++e) s += coef[e] * sample(rule.entries[e], g);
        return s;
    }

    /// int_0^{t_n} S(t_n - s) g(s) ds for every node of one mode.
    std::vector<double> history(std::size_t m, std::span<const double> g) const {
        const auto& mt = modes[m];
        const std::size_t size = grid.size(), N = size - 1;
        std::vector<double> d(size, 0.0);
        for (std::size_t n = 1; n < size; ++n) {
            d[n] = mt.first[n] * g[0] +
                   simd::dot(std::span(mt.conv_rev).subspan(N - n, n), g.subspan(1, n));
        }
        return d;
    }

    /// int_0^{t_k} S(t_k - s) g(s) ds for every nonlocal point of one mode.
    std::vector<double> nonlocal_integrals(std::size_t m, std::span<const double> g) const {
        std::vector<double> out(rules.size());
        for (std::size_t k = 0; k < rules.size(); ++k) out[k] = apply_rule(rules[k], modes[m].rule_coef[k], g);
        return out;
    }

    static std::vector<double> gather(const std::vector<ModeVector>& v, std::size_t m) {
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i][m];
        return out;
    }

    /// Green form: each additive term of G integrated separately.
    void green_map_mode(std::size_t m, std::span<const double> g, std::vector<ModeVector>& out) const {
        const auto& mt = modes[m];
        const auto& nl = problem.nonlocal;
        const auto d = history(m, g);
        if (form == GreenForm::full_horizon) {
            const auto ik = nonlocal_integrals(m, g);
            for (std::size_t n = 0; n < grid.size(); ++n) {
                double u = d[n];
                for (std::size_t k = 0; k < nl.size(); ++k) u += nl.c[k] * mt.t_vals[n] * inv.o[m] * ik[k];
                out[n][m] = u;
            }
            return;
        }
        for (std::size_t n = 0; n < grid.size(); ++n) {
            double u = d[n];
            for (std::size_t k = 0; k < nl.size(); ++k) {
                const double ik = apply_rule(trunc_rules[k][n], mt.trunc_coef[k][n], g);
                u += nl.c[k] * mt.t_vals[n] * inv.o[m] * ik;
            }
            out[n][m] = u;
        }
    }
};

MildSolver::MildSolver(const ProblemSpec& problem, const TimeGrid& grid, GreenForm form)
    : impl_(std::make_unique<Impl>(problem, grid, form)) {}
MildSolver::~MildSolver() = default;
MildSolver::MildSolver(MildSolver&&) noexcept = default;
MildSolver& MildSolver::operator=(MildSolver&&) noexcept = default;

const ProblemSpec& MildSolver::problem() const { return impl_->problem; }
const TimeGrid& MildSolver::grid() const { return impl_->grid; }
const NonlocalInverse& MildSolver::inverse() const { return impl_->inv; }

std::vector<ModeVector> MildSolver::green_map(const std::vector<ModeVector>& g) const {
    const std::size_t nm = impl_->problem.model.n_modes();
    require_node_vectors(g, impl_->grid.size(), nm, "green_map");
    std::vector<ModeVector> out(g.size(), ModeVector(nm, 0.0));
    for (std::size_t m = 0; m < nm; ++m) impl_->green_map_mode(m, Impl::gather(g, m), out);
    return out;
}

std::vector<ModeVector> MildSolver::two_step_map(const std::vector<ModeVector>& g) const {
    const auto& im = *impl_;
    const std::size_t nm = im.problem.model.n_modes();
    require_node_vectors(g, im.grid.size(), nm, "two_step_map");
    std::vector<ModeVector> out(g.size(), ModeVector(nm, 0.0));
    for (std::size_t m = 0; m < nm; ++m) {
        const auto gm = Impl::gather(g, m);
        const auto ik = im.nonlocal_integrals(m, gm);
        double rhs = 0.0;
        for (std::size_t k = 0; k < ik.size(); ++k) rhs += im.problem.nonlocal.c[k] * ik[k];
        const double u0 = im.inv.o[m] * rhs;
        const auto d = im.history(m, gm);
        for (std::size_t n = 0; n < g.size(); ++n) out[n][m] = im.modes[m].t_vals[n] * u0 + d[n];
    }
    return out;
}

std::vector<double> MildSolver::mode_matrix(std::size_t m) const {
    const auto& im = *impl_;
    if (m >= im.modes.size()) throw UsageError("mode_matrix: mode index out of range");
    const auto& mt = im.modes[m];
    const auto& nl = im.problem.nonlocal;
    const std::size_t size = im.grid.size(), N = size - 1;
    std::vector<double> mat(size * size, 0.0);
    for (std::size_t i = 1; i < size; ++i) {
        mat[i * size] += mt.first[i];
        for (std::size_t j = 1; j <= i; ++j) mat[i * size + j] += mt.conv_rev[N - 1 - (i - j)];
    }
    for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t k = 0; k < nl.size(); ++k) {
            const bool trunc = im.form == GreenForm::truncated_to_t;
            const SingularRule& rule = trunc ? im.trunc_rules[k][i] : im.rules[k];
            const auto& coef = trunc ? mt.trunc_coef[k][i] : mt.rule_coef[k];
            const double scale = nl.c[k] * mt.t_vals[i] * im.inv.o[m];
            for (std::size_t e = 0; e < coef.size(); ++e) {
                const auto& en = rule.entries[e];
                mat[i * size + en.lo] += scale * coef[e] * en.theta;
                mat[i * size + en.hi] += scale * coef[e] * (1.0 - en.theta);
            }
        }
    }
    return mat;
}

std::vector<double> MildSolver::endpoint_weights(std::size_t m) const {
    const std::size_t size = impl_->grid.size();
    const auto mat = mode_matrix(m);
    return {mat.end() - static_cast<std::ptrdiff_t>(size), mat.end()};
}

double MildSolver::nonlocal_residual(const std::vector<ModeVector>& states,
                                     const std::vector<ModeVector>& g) const {
    const auto& im = *impl_;
    const std::size_t nm = im.problem.model.n_modes();
    require_node_vectors(states, im.grid.size(), nm, "nonlocal_residual");
    require_node_vectors(g, im.grid.size(), nm, "nonlocal_residual");
    ModeVector r(nm);
    for (std::size_t m = 0; m < nm; ++m) {
        const auto ik = im.nonlocal_integrals(m, Impl::gather(g, m));
        const double u0 = states[0][m];
        double sum = 0.0;
        for (std::size_t k = 0; k < ik.size(); ++k) {
            sum += im.problem.nonlocal.c[k] * (im.modes[m].tk_vals[k] * u0 + ik[k]);
        }
        r[m] = u0 - sum;
    }
    return norm(r);
}

MildSolution MildSolver::solve(const std::vector<ModeVector>& forcing, const SolveOptions& options) const {
    const auto& im = *impl_;
    const std::size_t nm = im.problem.model.n_modes();
    const std::size_t size = im.grid.size();
    require_node_vectors(forcing, size, nm, "solve");
    if (!(options.tol > 0.0)) throw UsageError("solve: tol must be positive");
    if (options.max_iter < 1) throw UsageError("solve: max_iter must be >= 1");
    if (!(options.damping > 0.0 && options.damping <= 1.0)) {
        throw UsageError("solve: damping must lie in (0, 1]");
    }
    if (options.form != im.form) throw UsageError("solve: Green form differs from the solver's");

    const auto& f = im.problem.f;
    auto source = [&](const std::vector<ModeVector>& u) {
        std::vector<ModeVector> g = forcing;
        if (!f.is_zero()) {
            ModeVector fx(nm);
            for (std::size_t j = 0; j < size; ++j) {
                f.eval(im.grid.node(j), u[j], fx);
                for (std::size_t m = 0; m < nm; ++m) g[j][m] += fx[m];
            }
        }
        return g;
    };

    MildSolution out{Trajectory::zeros(im.grid, nm), {}};
    auto& u = out.trajectory.states;
    auto& rep = out.report;
    for (const auto& x : forcing) rep.control_bound_psi = std::max(rep.control_bound_psi, norm(x));

    auto estimate = [&rep]() {
        const auto& h = rep.residual_history;
        // geometric mean of the successive ratios, ignoring an exact-zero last step
        std::size_t last = h.size();
        while (last > 0 && h[last - 1] == 0.0) --last;
        if (last < 2 || h[0] == 0.0) return 0.0;
        return std::pow(h[last - 1] / h[0], 1.0 / static_cast<double>(last - 1));
    };

    bool converged = false;
    auto g = source(u);
    for (int it = 1; it <= options.max_iter; ++it) {
        auto next = green_map(g);
        double diff = 0.0;
        for (std::size_t j = 0; j < size; ++j) {
            for (std::size_t m = 0; m < nm; ++m) {
                const double v = options.damping == 1.0
                                     ? next[j][m]
                                     : (1.0 - options.damping) * u[j][m] + options.damping * next[j][m];
                diff = std::max(diff, std::abs(v - u[j][m]));
                u[j][m] = v;
            }
        }
        rep.iterations = it;
        rep.final_residual = diff;
        rep.residual_history.push_back(diff);
        if (!std::isfinite(diff)) break;
        if (diff <= options.tol) {
            converged = true;
            break;
        }
        g = source(u);
    }
    rep.contraction_estimate = estimate();
    if (!converged) {
        std::ostringstream os;
        os << "Picard iteration did not converge: " << rep.iterations << " iterations, last difference "
           << rep.final_residual << ", contraction estimate " << rep.contraction_estimate;
        throw NonConvergenceError(os.str(), rep.iterations, rep.contraction_estimate, rep.final_residual);
    }
    rep.nonlocal_residual = nonlocal_residual(u, source(u));
    return out;
}

MildSolution solve_mild(const ProblemSpec& problem, const TimeGrid& grid, const ControlSignal& v,
                        const SolveOptions& options) {
    require_same_grid(v.grid, grid, "solve_mild");
    const std::size_t nm = problem.model.n_modes();
    require_node_vectors(v.values, grid.size(), nm, "solve_mild");
    const MildSolver solver(problem, grid, options.form);
    std::vector<ModeVector> forcing(grid.size(), ModeVector(nm));
    for (std::size_t j = 0; j < grid.size(); ++j) {
        for (std::size_t m = 0; m < nm; ++m) forcing[j][m] = problem.gains[m] * v.values[j][m];
    }
    return solver.solve(forcing, options);
}

// ---------------------------------------------------------------------------------------------
// Verification

VerifyReport verify_mild(const ProblemSpec& problem, const Trajectory& trajectory,
                         const ControlSignal& v) {
    problem.validate();
    const TimeGrid& grid = trajectory.grid;
    if (std::abs(grid.horizon() - problem.horizon()) > 1e-12 * problem.horizon()) {
        throw UsageError("verify_mild: trajectory horizon differs from the problem horizon");
    }
    require_same_grid(v.grid, grid, "verify_mild");
    const std::size_t nm = problem.model.n_modes();
    const std::size_t size = grid.size(), N = size - 1;
    require_node_vectors(trajectory.states, size, nm, "verify_mild");
    require_node_vectors(v.values, size, nm, "verify_mild");
    for (const auto& x : trajectory.states) {
        for (double val : x) {
            if (!std::isfinite(val)) throw UsageError("verify_mild: trajectory has non-finite entries");
        }
    }

    const double alpha = problem.alpha, h = grid.step();
    const auto& nl = problem.nonlocal;
    std::vector<ModeVector> g(size, ModeVector(nm));
    for (std::size_t j = 0; j < size; ++j) {
        const auto fx = problem.f(grid.node(j), trajectory.states[j]);
        for (std::size_t m = 0; m < nm; ++m) g[j][m] = problem.gains[m] * v.values[j][m] + fx[m];
    }

    const ProductWeights pw(alpha, grid);
    VerifyReport rep;
    rep.node_residuals.assign(size, 0.0);
    rep.endpoint.assign(nm, 0.0);
    ModeVector nonlocal_gap(nm, 0.0);

    for (std::size_t m = 0; m < nm; ++m) {
        const double lambda = problem.model.lambda(m);
        std::vector<double> gm(size), um(size);
        for (std::size_t j = 0; j < size; ++j) {
            gm[j] = g[j][m];
            um[j] = trajectory.states[j][m];
        }
        // exact-kernel weights of lattice cell k: tau in [(k-1) h, k h]
        std::vector<ExactCell> cells(size);
        for (std::size_t k = 1; k < size; ++k) cells[k] = exact_cell(alpha, lambda, (k - 1) * h, h);
        std::vector<double> h_lattice(size);
        for (std::size_t i = 0; i < size; ++i) h_lattice[i] = s_smooth(alpha, lambda, i * h);

        const double u0 = um[0];
        for (std::size_t n = 1; n < size; ++n) {
            double exact = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                exact += cells[n - j].far * gm[j] + cells[n - j].near * gm[j + 1];
            }
            double solver_rule = pw.first(n) * h_lattice[n] * gm[0];
            for (std::size_t j = 1; j <= n; ++j) solver_rule += pw.lag(n - j) * h_lattice[n - j] * gm[j];

            const double tn = t_value(alpha, lambda, grid.node(n));
            const double r = std::abs(um[n] - tn * u0 - exact);
            rep.node_residuals[n] = std::max(rep.node_residuals[n], r);
            rep.consistency_residual =
                std::max(rep.consistency_residual, std::abs(um[n] - tn * u0 - solver_rule));
            if (n == N) rep.endpoint[m] = tn * u0 + solver_rule;
        }
        if (N == 0) rep.endpoint[m] = u0;

        double sum = 0.0;
        for (std::size_t k = 0; k < nl.size(); ++k) {
            const double tk = nl.t[k];
            // cells fully below t_k, then the partial cell [s_J, t_k]
            double integral = 0.0;
            std::size_t j = 0;
            for (; j < N && grid.node(j + 1) <= tk * (1.0 + 1e-14); ++j) {
                const double d = std::max(0.0, tk - grid.node(j + 1));
                const auto c = exact_cell(alpha, lambda, d, h);
                integral += c.far * gm[j] + c.near * gm[j + 1];
            }
            const double rest = tk - grid.node(j);
            if (j < N && rest > 1e-14 * h) {
                const double theta = rest / h;
                const double g_end = (1.0 - theta) * gm[j] + theta * gm[j + 1];
                const auto c = exact_cell(alpha, lambda, 0.0, rest);
                integral += c.far * gm[j] + c.near * g_end;
            }
            sum += nl.c[k] * (t_value(alpha, lambda, tk) * u0 + integral);
        }
        nonlocal_gap[m] = u0 - sum;
    }
    rep.mild_residual = *std::max_element(rep.node_residuals.begin(), rep.node_residuals.end());
    rep.nonlocal_residual = norm(nonlocal_gap);
    return rep;
}

}  // namespace fracctl
