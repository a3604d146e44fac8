#include "fracctl/fraccalc.hpp"

#include <cmath>
#include <sstream>

#include "fracctl/errors.hpp"
#include "fracctl/specfun.hpp"

namespace fracctl {

namespace {

void require_integral_order(double alpha, const char* who) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        std::ostringstream os;
        os << who << ": order must lie in (0, 1], got " << alpha;
        throw DomainError(os.str());
    }
}

void require_derivative_order(double alpha, const char* who) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        std::ostringstream os;
        os << who << ": order must lie in (0, 1), got " << alpha;
        throw DomainError(os.str());
    }
}

void require_samples(const SampledFn& f, std::size_t min_nodes, const char* who) {
    if (f.values.size() != f.grid.size()) {
        std::ostringstream os;
        os << who << ": " << f.values.size() << " samples for " << f.grid.size() << " nodes";
        throw UsageError(os.str());
    }
    if (f.values.size() < min_nodes) {
        std::ostringstream os;
        os << who << ": needs at least " << min_nodes << " nodes";
        throw UsageError(os.str());
    }
}

/// Value at node 0 extrapolated from nodes 1..3 (fewer when the grid is short).
double extrapolate_node0(std::span<const double> v) {
    if (v.size() >= 4) return 3.0 * v[1] - 3.0 * v[2] + v[3];
    if (v.size() == 3) return 2.0 * v[1] - v[2];
    return v[1];
}

/// L1 weights b_k = (k+1)^{1-alpha} - k^{1-alpha}.
double l1_weight(double alpha, std::size_t k) {
    if (k == 0) return 1.0;
    const long double p = 1.0L - alpha;
    const long double kk = static_cast<long double>(k);
    return static_cast<double>(std::pow(kk, p) * std::expm1(p * std::log1p(1.0L / kk)));
}

/// sum_{j<n} b_{n-j-1} (f_{j+1} - f_j) for every n >= 1.
std::vector<double> l1_sums(double alpha, std::span<const double> f) {
    const std::size_t size = f.size();
    std::vector<double> b(size);
    for (std::size_t k = 0; k < size; ++k) b[k] = l1_weight(alpha, k);
    std::vector<double> out(size, 0.0);
    for (std::size_t n = 1; n < size; ++n) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += b[n - j - 1] * (f[j + 1] - f[j]);
        out[n] = s;
    }
    return out;
}

}  // namespace

TimeGrid::TimeGrid(double horizon, int n_steps) : horizon_(horizon), n_steps_(n_steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw UsageError("TimeGrid: horizon must be positive and finite");
    }
    if (n_steps < 1) {
        throw UsageError("TimeGrid: n_steps must be a positive integer");
    }
    step_ = horizon / n_steps;
    nodes_.resize(static_cast<std::size_t>(n_steps) + 1);
    for (int i = 0; i <= n_steps; ++i) nodes_[i] = horizon * i / n_steps;
}

long TimeGrid::index_of(double t) const {
    const double pos = t / step_;
    const double rounded = std::round(pos);
    if (rounded < 0 || rounded > n_steps_) return -1;
    if (std::abs(pos - rounded) <= 1e-12 * std::max(1.0, rounded)) {
        return static_cast<long>(rounded);
    }
    return -1;
}

SampledFn SampledFn::from(const TimeGrid& grid, const std::function<double(double)>& f) {
    SampledFn out{grid, std::vector<double>(grid.size())};
    for (std::size_t i = 0; i < grid.size(); ++i) out.values[i] = f(grid.node(i));
    return out;
}

CellMoments cell_moments(double alpha, long double r) {
    const long double a = alpha;
    if (r >= 4.0L) {
        // (r + x)^{a-1} = r^{a-1} sum_m binom(a-1, m) (x/r)^m
        long double coef = 1.0L;
        long double inv_pow = 1.0L;
        long double far = 0.0L;
        long double near = 0.0L;
        for (int m = 0; m < 60; ++m) {
            const long double t = coef * inv_pow;
            far += t / (m + 2);
            near += t / ((m + 1) * (m + 2));
            if (std::abs(t) < 1e-22L) break;
            coef *= (a - 1.0L - m) / (m + 1);
            inv_pow /= r;
        }
        const long double scale = std::pow(r, a - 1.0L);
        return {far * scale, near * scale};
    }
    if (r == 0.0L) {
        return {1.0L / (a + 1.0L), 1.0L / a - 1.0L / (a + 1.0L)};
    }
    const long double j0 = (std::pow(r + 1.0L, a) - std::pow(r, a)) / a;
    const long double j1 = (std::pow(r + 1.0L, a + 1.0L) - std::pow(r, a + 1.0L)) / (a + 1.0L);
    const long double far = j1 - r * j0;
    return {far, j0 - far};
}

ProductWeights::ProductWeights(double alpha, const TimeGrid& grid) : alpha_(alpha) {
    require_integral_order(alpha, "ProductWeights");
    const std::size_t size = grid.size();
    const long double scale = std::pow(static_cast<long double>(grid.step()), alpha);
    lag_.resize(size);
    first_.assign(size, 0.0);
    std::vector<CellMoments> cells(size);
    for (std::size_t r = 0; r < size; ++r) cells[r] = cell_moments(alpha, r);
    lag_[0] = static_cast<double>(scale * cells[0].near);
    for (std::size_t k = 1; k < size; ++k) {
        lag_[k] = static_cast<double>(scale * (cells[k - 1].far + cells[k].near));
    }
    for (std::size_t n = 1; n < size; ++n) {
        first_[n] = static_cast<double>(scale * cells[n - 1].far);
    }
}

double SingularRule::apply(std::span<const double> g,
                           const std::function<double(double)>& kernel) const {
    double s = 0.0;
    for (const auto& e : entries) {
        const double sample = e.theta * g[e.lo] + (1.0 - e.theta) * g[e.hi];
        s += e.weight * kernel(e.tau) * sample;
    }
    return s;
}

SingularRule build_singular_rule(const TimeGrid& grid, double alpha, double singular_point,
                                 double upper) {
    require_integral_order(alpha, "build_singular_rule");
    if (!(upper >= 0.0 && upper <= grid.horizon() * (1.0 + 1e-14)) ||
        !(singular_point >= upper)) {
        std::ostringstream os;
        os << "build_singular_rule: need 0 <= upper <= min(T, a); got upper " << upper
           << ", T " << singular_point;
        throw UsageError(os.str());
    }
    SingularRule rule;
    rule.singular_point = singular_point;
    rule.upper = upper;
    if (upper == 0.0) return rule;

    struct Breakpoint {
        double x;
        std::size_t lo;
        std::size_t hi;
        double theta;
    };
    std::vector<Breakpoint> pts;
    const long on_grid = grid.index_of(upper);
    const std::size_t last_full = on_grid >= 0 ? static_cast<std::size_t>(on_grid)
                                               : static_cast<std::size_t>(upper / grid.step());
    for (std::size_t j = 0; j <= last_full && j < grid.size(); ++j) {
        if (on_grid < 0 && grid.node(j) >= upper) break;
        pts.push_back({grid.node(j), j, j, 1.0});
    }
    if (on_grid < 0) {
        const std::size_t lo = pts.back().lo;
        const std::size_t hi = std::min(lo + 1, grid.size() - 1);
        const double theta = hi == lo ? 1.0 : (grid.node(hi) - upper) / grid.step();
        pts.push_back({upper, lo, hi, theta});
    }

    const long double T = singular_point;
    std::vector<long double> w(pts.size(), 0.0L);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const long double len = static_cast<long double>(pts[i + 1].x) - pts[i].x;
        const long double d_near = T - pts[i + 1].x;
        const long double r = d_near <= 0.0L ? 0.0L : d_near / len;
        const CellMoments m = cell_moments(alpha, r);
        const long double scale = std::pow(len, static_cast<long double>(alpha));
        w[i] += scale * m.far;
        w[i + 1] += scale * m.near;
    }
    rule.entries.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double tau = singular_point == pts[i].x ? 0.0 : singular_point - pts[i].x;
        rule.entries.push_back(
            {static_cast<double>(w[i]), tau, pts[i].lo, pts[i].hi, pts[i].theta});
    }
    return rule;
}

SampledFn rl_integral(double alpha, const SampledFn& f) {
    require_integral_order(alpha, "rl_integral");
    require_samples(f, 1, "rl_integral");
    const ProductWeights w(alpha, f.grid);
    const double inv_gamma = 1.0 / gamma(alpha);
    SampledFn out{f.grid, std::vector<double>(f.values.size(), 0.0)};
    for (std::size_t n = 1; n < f.values.size(); ++n) {
        double s = w.first(n) * f.values[0];
        for (std::size_t j = 1; j <= n; ++j) s += w.lag(n - j) * f.values[j];
        out.values[n] = inv_gamma * s;
    }
    return out;
}

SampledFn caputo_derivative(double alpha, const SampledFn& f) {
    require_derivative_order(alpha, "caputo_derivative");
    require_samples(f, 2, "caputo_derivative");
    const double scale = std::pow(f.grid.step(), -alpha) / gamma(2.0 - alpha);
    SampledFn out{f.grid, l1_sums(alpha, f.values), true};
    for (std::size_t n = 1; n < out.values.size(); ++n) out.values[n] *= scale;
    out.values[0] = extrapolate_node0(out.values);
    return out;
}

SampledFn rl_derivative(double alpha, const SampledFn& f) {
    require_derivative_order(alpha, "rl_derivative");
    require_samples(f, 2, "rl_derivative");
    SampledFn out = caputo_derivative(alpha, f);
    const double f0 = f.values[0];
    if (f0 != 0.0) {
        const double c = f0 / gamma(1.0 - alpha);
        for (std::size_t n = 1; n < out.values.size(); ++n) {
            out.values[n] += c * std::pow(f.grid.node(n), -alpha);
        }
        out.values[0] = extrapolate_node0(out.values);
    }
    return out;
}

double singular_convolution(double alpha, const std::function<double(double)>& kernel_smooth,
                            const SampledFn& f, std::size_t t_index) {
    require_integral_order(alpha, "singular_convolution");
    require_samples(f, 1, "singular_convolution");
    if (t_index >= f.values.size()) {
        throw UsageError("singular_convolution: time index outside the grid");
    }
    if (t_index == 0) return 0.0;
    const ProductWeights w(alpha, f.grid);
    const double tn = f.grid.node(t_index);
    double s = w.first(t_index) * kernel_smooth(tn) * f.values[0];
    for (std::size_t j = 1; j <= t_index; ++j) {
        const double tau = j == t_index ? 0.0 : tn - f.grid.node(j);
        s += w.lag(t_index - j) * kernel_smooth(tau) * f.values[j];
    }
    return s;
}

}  // namespace fracctl
