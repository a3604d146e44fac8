#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fracctl {

/// Uniform nodes t_i = i * a / n_steps on [0, a].
class TimeGrid {
public:
    TimeGrid(double horizon, int n_steps);

    double horizon() const { return horizon_; }
    int n_steps() const { return n_steps_; }
    double step() const { return step_; }
    std::size_t size() const { return nodes_.size(); }
    double node(std::size_t i) const { return nodes_[i]; }
    std::span<const double> nodes() const { return nodes_; }

    /// Index of the node equal to t (within 1e-12 relative), or -1.
    long index_of(double t) const;

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
        return a.horizon_ == b.horizon_ && a.n_steps_ == b.n_steps_;
    }

private:
    double horizon_;
    int n_steps_;
    double step_;
    std::vector<double> nodes_;
};

/// A real function sampled on a grid.
struct SampledFn {
    TimeGrid grid;
    std::vector<double> values;
    /// Set by the derivative operators: node 0 was extrapolated, not computed.
    bool node0_extrapolated = false;

    static SampledFn from(const TimeGrid& grid, const std::function<double(double)>& f);
};

/// Product-quadrature moments of the weakly singular kernel tau^{alpha-1} on one cell.
///
/// For a cell tau in [r L, (r+1) L] (distance r L from the singular point) and a linear
/// interpolant, returns the weights, in units of L^alpha, attached to the far end
/// (`far`, tau = (r+1) L) and the near end (`near`, tau = r L).
struct CellMoments {
    long double far;
    long double near;
};
CellMoments cell_moments(double alpha, long double r);

/// Weights of the product trapezoidal rule on a uniform grid for
///   int_0^{t_n} (t_n - s)^{alpha-1} g(s) ds ~= sum_j w_{n,j} g(s_j).
/// The weight depends on k = n - j only, except at j = 0.
class ProductWeights {
public:
    ProductWeights(double alpha, const TimeGrid& grid);

    double alpha() const { return alpha_; }
    /// Weight of node j = n - k for 0 <= k < n.
    double lag(std::size_t k) const { return lag_[k]; }
    /// Weight of node 0 in the rule for t_n (n >= 1).
    double first(std::size_t n) const { return first_[n]; }
    /// Weight of node j in the rule ending at node n.
    double weight(std::size_t n, std::size_t j) const {
        return j == 0 ? first_[n] : lag_[n - j];
    }

private:
    double alpha_;
    std::vector<double> lag_;
    std::vector<double> first_;
};

/// One term of a general product rule: the sample is theta * g[lo] + (1 - theta) * g[hi],
/// located at distance `tau` from the singular point.
struct RuleEntry {
    double weight;
    double tau;
    std::size_t lo;
    std::size_t hi;
    double theta;
};

/// Product trapezoidal rule for int_0^{upper} (T - s)^{alpha-1} phi(s) ds, T >= upper,
/// on the grid nodes below `upper` plus `upper` itself (interpolated when off-grid).
struct SingularRule {
    double singular_point = 0.0;
    double upper = 0.0;
    std::vector<RuleEntry> entries;

    /// sum_e weight_e * kernel(tau_e) * sample_e(g).
    double apply(std::span<const double> g, const std::function<double(double)>& kernel) const;
};

SingularRule build_singular_rule(const TimeGrid& grid, double alpha, double singular_point,
                                 double upper);

/// Riemann-Liouville integral I^alpha f at every node (node 0 maps to 0).
SampledFn rl_integral(double alpha, const SampledFn& f);

/// L1 discretization of the Caputo derivative. Node 0 is extrapolated from nodes 1..3.
SampledFn caputo_derivative(double alpha, const SampledFn& f);

/// Riemann-Liouville derivative: the L1 sum plus the exact f(0) t^{-alpha}/Gamma(1-alpha)
/// term. Node 0 is extrapolated.
SampledFn rl_derivative(double alpha, const SampledFn& f);

/// int_0^{t_n} (t_n - s)^{alpha-1} h(t_n - s) f(s) ds with the (t_n - s)^{alpha-1} factor
/// integrated exactly against the piecewise-linear interpolant of h(t_n - s) f(s).
double singular_convolution(double alpha, const std::function<double(double)>& kernel_smooth,
                            const SampledFn& f, std::size_t t_index);

}  // namespace fracctl
