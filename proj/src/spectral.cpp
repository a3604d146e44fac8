#include "fracctl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fracctl/errors.hpp"
#include "fracctl/specfun.hpp"

namespace fracctl {

namespace {

void require_order(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        std::ostringstream os;
        os << "spectral: order must lie in (0, 1], got " << alpha;
        throw DomainError(os.str());
    }
}

void require_size(const SpectralModel& model, std::span<const double> x) {
    if (x.size() != model.n_modes()) {
        std::ostringstream os;
        os << "spectral: mode vector has " << x.size() << " entries, model has "
           << model.n_modes();
        throw UsageError(os.str());
    }
}

}  // namespace

double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double max_abs(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

SpectralModel::SpectralModel(std::vector<double> lambdas, std::string basis_label)
    : lambdas_(std::move(lambdas)), basis_label_(std::move(basis_label)) {
    if (lambdas_.empty()) throw UsageError("SpectralModel: at least one mode is required");
    for (std::size_t i = 0; i < lambdas_.size(); ++i) {
        if (!(lambdas_[i] > 0.0) || !std::isfinite(lambdas_[i])) {
            throw UsageError("SpectralModel: eigenvalues of -A must be positive and finite");
        }
        if (i > 0 && !(lambdas_[i] > lambdas_[i - 1])) {
            throw UsageError("SpectralModel: eigenvalues must be strictly increasing");
        }
    }
}

SpectralModel SpectralModel::dirichlet_laplacian(int n_modes) {
    if (n_modes < 1) throw UsageError("SpectralModel: n_modes must be >= 1");
    std::vector<double> l(static_cast<std::size_t>(n_modes));
    for (int n = 1; n <= n_modes; ++n) l[n - 1] = static_cast<double>(n) * n;
    return SpectralModel(std::move(l), "dirichlet sine basis on (0, pi)");
}

SpectralModel SpectralModel::permissive(std::vector<double> lambdas) {
    SpectralModel m;
    if (lambdas.empty()) throw UsageError("SpectralModel: at least one mode is required");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] >= 0.0) || (i > 0 && lambdas[i] < lambdas[i - 1])) {
            throw UsageError("SpectralModel::permissive: need non-decreasing lambda >= 0");
        }
    }
    m.lambdas_ = std::move(lambdas);
    m.basis_label_ = "test model";
    return m;
}

ModeVector SpectralModel::apply_A(std::span<const double> x) const {
    ModeVector out(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) out[n] = -lambdas_[n] * x[n];
    return out;
}

ModeVector apply_T(const SpectralModel& model, double alpha, double t, std::span<const double> x) {
    require_order(alpha);
    require_size(model, x);
    if (!(t >= 0.0)) throw DomainError("apply_T: t must be non-negative");
    ModeVector out(x.begin(), x.end());
    if (t == 0.0) return out;
    const double ta = std::pow(t, alpha);
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] *= mittag_leffler(alpha, 1.0, -model.lambda(n) * ta);
    }
    return out;
}

ModeVector apply_S(const SpectralModel& model, double alpha, double t, std::span<const double> x) {
    require_order(alpha);
    require_size(model, x);
    if (!(t > 0.0)) throw DomainError("apply_S: t must be positive (kernel singular at 0)");
    ModeVector out(x.begin(), x.end());
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] *= ml_derivative_kernel(alpha, model.lambda(n), t);
    }
    return out;
}

ModeVector resolvent(const SpectralModel& model, double alpha, double nu,
                     std::span<const double> x) {
    require_order(alpha);
    require_size(model, x);
    if (!(nu > 0.0)) throw DomainError("resolvent: nu must be positive");
    const double na = std::pow(nu, alpha);
    ModeVector out(x.begin(), x.end());
    for (std::size_t n = 0; n < out.size(); ++n) out[n] /= na + model.lambda(n);
    return out;
}

double estimate_MT(const SpectralModel& model, double alpha, double horizon, int samples) {
    require_order(alpha);
    if (!(horizon > 0.0)) throw DomainError("estimate_MT: horizon must be positive");
    double sup = 1.0;  // T_alpha(0) = I
    for (int i = 1; i <= samples; ++i) {
        const double ta = std::pow(horizon * i / samples, alpha);
        for (double lambda : model.lambdas()) {
            sup = std::max(sup, std::abs(mittag_leffler(alpha, 1.0, -lambda * ta)));
        }
    }
    return sup;
}

MsEstimate estimate_MS(const SpectralModel& model, double alpha, double horizon, int samples) {
    require_order(alpha);
    if (!(horizon > 0.0)) throw DomainError("estimate_MS: horizon must be positive");
    MsEstimate out;
    out.ms = 1.0 / gamma(alpha);  // limit of E_{alpha,alpha}(-lambda t^alpha) as t -> 0
    out.t_min = horizon / samples;
    for (int i = 1; i <= samples; ++i) {
        const double t = horizon * i / samples;
        const double ta = std::pow(t, alpha);
        double mode_max = 0.0;
        for (double lambda : model.lambdas()) {
            mode_max = std::max(mode_max, std::abs(mittag_leffler(alpha, alpha, -lambda * ta)));
        }
        out.ms = std::max(out.ms, mode_max);
        out.raw_sup = std::max(out.raw_sup, mode_max * ta / t);
    }
    return out;
}

IdentityReport check_solution_operator_identity(const SpectralModel& model, double alpha,
                                                std::span<const double> x,
                                                const TimeGrid& grid) {
    require_order(alpha);
    require_size(model, x);
    const ProductWeights w(alpha, grid);
    const double inv_gamma = 1.0 / gamma(alpha);
    const std::size_t size = grid.size();

    IdentityReport report;
    report.node_residuals.assign(size, 0.0);
    std::vector<double> au(size);
    for (std::size_t m = 0; m < model.n_modes(); ++m) {
        const double lambda = model.lambda(m);
        std::vector<double> u(size);
        for (std::size_t i = 0; i < size; ++i) {
            const double ta = std::pow(grid.node(i), alpha);
            u[i] = (i == 0 ? 1.0 : mittag_leffler(alpha, 1.0, -lambda * ta)) * x[m];
            au[i] = -lambda * u[i];
        }
        for (std::size_t n = 1; n < size; ++n) {
            double s = w.first(n) * au[0];
            for (std::size_t j = 1; j <= n; ++j) s += w.lag(n - j) * au[j];
            const double r = std::abs(u[n] - x[m] - inv_gamma * s);
            report.node_residuals[n] = std::max(report.node_residuals[n], r);
        }
    }
    report.sup_residual =
        *std::max_element(report.node_residuals.begin(), report.node_residuals.end());
    return report;
}

}  // namespace fracctl
