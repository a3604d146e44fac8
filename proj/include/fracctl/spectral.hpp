#pragma once

#include <span>
#include <string>
#include <vector>

#include "fracctl/fraccalc.hpp"

namespace fracctl {

/// Spectral coordinates of a state u in E (one coefficient per eigenfunction).
using ModeVector = std::vector<double>;

/// Euclidean norm of the coefficients, i.e. the E-norm for an orthonormal basis.
double norm(std::span<const double> x);
double max_abs(std::span<const double> x);

/// Generator A = -diag(lambda_n) on an orthonormal eigenbasis.
class SpectralModel {
public:
    /// lambdas must be positive and strictly increasing.
    explicit SpectralModel(std::vector<double> lambdas, std::string basis_label = "explicit");

    /// -d^2/dx^2 on (0, pi) with Dirichlet conditions: lambda_n = n^2, basis sqrt(2/pi) sin(n x).
    static SpectralModel dirichlet_laplacian(int n_modes);

    /// Test hook: admits lambda >= 0 (non-decreasing), e.g. a conservative mode lambda = 0.
    static SpectralModel permissive(std::vector<double> lambdas);

    std::size_t n_modes() const { return lambdas_.size(); }
    std::span<const double> lambdas() const { return lambdas_; }
    double lambda(std::size_t n) const { return lambdas_[n]; }
    const std::string& basis_label() const { return basis_label_; }
    /// True when every eigenvalue of -A is positive (dissipative generator).
    bool dissipative() const { return lambdas_.front() > 0.0; }

    /// Diagonal action of A on x.
    ModeVector apply_A(std::span<const double> x) const;

private:
    SpectralModel() = default;
    std::vector<double> lambdas_;
    std::string basis_label_;
};

/// T_alpha(t) x: coefficient n maps to E_alpha(-lambda_n t^alpha) x_n. Requires t >= 0.
ModeVector apply_T(const SpectralModel& model, double alpha, double t, std::span<const double> x);

/// S_alpha(t) x: coefficient n maps to t^{alpha-1} E_{alpha,alpha}(-lambda_n t^alpha) x_n.
/// Requires t > 0.
ModeVector apply_S(const SpectralModel& model, double alpha, double t, std::span<const double> x);

/// (nu^alpha I - A)^{-1} x. Requires nu > 0.
ModeVector resolvent(const SpectralModel& model, double alpha, double nu,
                     std::span<const double> x);

/// sup_{t in [0, a]} ||T_alpha(t)||, sampled on `samples` uniform points plus t = 0.
double estimate_MT(const SpectralModel& model, double alpha, double horizon, int samples = 2048);

struct MsEstimate {
    /// sup_{t in (0, a]} t^{1-alpha} ||S_alpha(t)||, including the t -> 0 limit 1/Gamma(alpha).
    double ms = 0.0;
    /// sup of the unweighted ||S_alpha(t)|| over the sample points; grows like t_min^{alpha-1}.
    double raw_sup = 0.0;
    /// Smallest sampled time, where raw_sup is attained for dissipative models.
    double t_min = 0.0;
};
MsEstimate estimate_MS(const SpectralModel& model, double alpha, double horizon,
                       int samples = 2048);

struct IdentityReport {
    /// sup over nodes and modes of |u(t) - x - I^alpha(A u)(t)| with u(t) = T_alpha(t) x.
    double sup_residual = 0.0;
    std::vector<double> node_residuals;
};

/// Checks u(t) = x + (1/Gamma(alpha)) int_0^t (t-s)^{alpha-1} A u(s) ds for u = T_alpha(.) x on
/// the grid, evaluating the integral with the product trapezoidal rule.
IdentityReport check_solution_operator_identity(const SpectralModel& model, double alpha,
                                                std::span<const double> x, const TimeGrid& grid);

}  // namespace fracctl
