#include "fracctl/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "fracctl/errors.hpp"

namespace fracctl {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;
constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Neumaier's variant of Kahan summation.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// sin(pi x) with argument reduction done before the multiplication by pi.
double sin_pi(double x) {
    double r = std::fmod(x, 2.0);
    if (r < 0) r += 2.0;
    if (r == 0.0 || r == 1.0) return 0.0;
    if (r > 1.0) return -std::sin(kPi * (r - 1.0));
    return std::sin(kPi * r);
}

/// 1/Gamma(x) on the whole real line (zero at the non-positive integers).
double rgamma(double x) {
    if (x > 0.0) {
        if (x > 171.0) return 0.0;
        return 1.0 / std::tgamma(x);
    }
    if (x == std::floor(x)) return 0.0;
    // Reflection: 1/Gamma(x) = sin(pi x) Gamma(1 - x) / pi.
    return sin_pi(x) * std::tgamma(1.0 - x) / kPi;
}

// ---------------------------------------------------------------------------
// alpha == 1: E_{1,b}(z) = 1F1(1; b; z) / Gamma(b).

bool confluent_branch(double beta, double z, double& out) {
    constexpr int kMaxTerms = 4000;
    if (std::abs(z) > 600.0) return false;
    if (z >= 0.0) {
        // sum_n z^n / (b)_n, positive terms.
        CompensatedSum s;
        double term = 1.0;
        s.add(term);
        for (int n = 0; n < kMaxTerms; ++n) {
            term *= z / (beta + n);
            s.add(term);
            if (term < kEps * 1e-2 * s.value() && n > z) {
                out = s.value() * rgamma(beta);
                return true;
            }
        }
        return false;
    }
    // Kummer: 1F1(1; b; -x) = e^{-x} 1F1(b-1; b; x), and
    // 1F1(a; a+1; x) = sum_n a/(a+n) x^n/n!  (a = b-1 > -1).
    const double x = -z;
    const double a = beta - 1.0;
    if (a == 0.0) {
        out = std::exp(z);
        return true;
    }
    CompensatedSum s;
    s.add(1.0);
    double pw = 1.0;  // x^n / n!
    for (int n = 1; n < kMaxTerms; ++n) {
        pw *= x / n;
        const double term = a / (a + n) * pw;
        s.add(term);
        if (n > x && std::abs(term) < kEps * 1e-2 * std::abs(s.value())) {
            out = std::exp(z) * s.value() * rgamma(beta);
            return true;
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// Power series.

/// Single term z^n / Gamma(alpha n + beta) without intermediate overflow.
double series_term(double alpha, double beta, double z, int n) {
    const double arg = alpha * n + beta;
    if (arg < 150.0) {
        return std::pow(z, n) * rgamma(arg);
    }
    const double mag = std::exp(n * std::log(std::abs(z)) - std::lgamma(arg));
    return (z < 0.0 && (n % 2 == 1)) ? -mag : mag;
}

bool power_series(double alpha, double beta, double z, double& out) {
    constexpr int kMaxTerms = 1200;
    constexpr double kMaxCancellation = 1e4;
    CompensatedSum s;
    double max_term = 0.0;
    int quiet = 0;
    for (int n = 0; n < kMaxTerms; ++n) {
        const double term = series_term(alpha, beta, z, n);
        if (!std::isfinite(term)) return false;
        s.add(term);
        max_term = std::max(max_term, std::abs(term));
        // Gamma(alpha n + beta) only becomes monotone past its minimum; require the
        // tail to stay below round-off for a few consecutive terms.
        if (std::abs(term) <= 1e-2 * kEps * std::abs(s.value()) && alpha * n + beta > 2.0) {
            if (++quiet >= 3) break;
        } else {
            quiet = 0;
        }
        if (n == kMaxTerms - 1) return false;
    }
    const double value = s.value();
    if (!std::isfinite(value)) return false;
    if (z < 0.0 && max_term > kMaxCancellation * std::abs(value)) return false;
    out = value;
    return true;
}

// ---------------------------------------------------------------------------
// Algebraic asymptotic expansion for z -> -infinity, 0 < alpha < 1:
//   E_{a,b}(z) ~ -sum_{k>=1} z^{-k} / Gamma(b - a k).

bool asymptotic_negative(double alpha, double beta, double z, double& out) {
    constexpr int kMaxTerms = 400;
    const double x = -z;
    const double log_x = std::log(x);
    CompensatedSum s;
    double prev_envelope = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= kMaxTerms; ++k) {
        const double arg = beta - alpha * k;
        // |term| <= x^{-k} / |Gamma(arg)|; for arg < 0 the reflection bound drops sin(pi arg).
        double log_envelope;
        if (arg > 0.0) {
            log_envelope = -k * log_x - std::lgamma(arg);
        } else {
            log_envelope = -k * log_x + std::lgamma(1.0 - arg) - std::log(kPi);
        }
        const double envelope = std::exp(log_envelope);
        // z^{-k} = (-1)^k x^{-k}
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        const double term = -sign * std::exp(-k * log_x) * rgamma(arg);
        s.add(term);
        const double value = s.value();
        if (value != 0.0 && envelope < 1e-2 * kEps * std::abs(value)) {
            out = value;
            return true;
        }
        if (envelope > prev_envelope && alpha * k > beta + 1.0) {
            return false;  // diverging before reaching round-off
        }
        prev_envelope = envelope;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Laplace transform inversion on an optimal parabolic contour
// s(u) = mu (i u + 1)^2, trapezoidal rule with step h on [-N h, N h].

struct ContourParams {
    double mu = 0.0;
    double h = 0.0;
    double n = std::numeric_limits<double>::infinity();
};

const double kLogEps = std::log(kEps);

/// Parameters for a region bounded by two singularities.
ContourParams params_bounded(double t, double phi_j, double phi_j1, double pj, double qj,
                             double log_epsilon) {
    constexpr double fac = 1.01;
    const double f_max = std::exp(log_epsilon - kLogEps);
    const double sq_phi_j = std::sqrt(phi_j);
    const double threshold = 2.0 * std::sqrt((log_epsilon - kLogEps) / t);
    const double sq_phi_j1 = std::min(std::sqrt(phi_j1), threshold - sq_phi_j);

    double sq_bar_j = 0.0;
    double sq_bar_j1 = 0.0;
    double f_bar = 1.0;
    bool admissible = false;
    const bool p_small = pj < 1e-14;
    const bool q_small = qj < 1e-14;

    if (p_small && q_small) {
        sq_bar_j = sq_phi_j;
        sq_bar_j1 = sq_phi_j1;
        admissible = true;
    } else if (p_small) {
        sq_bar_j = sq_phi_j;
        const double f_min =
            sq_phi_j > 0 ? fac * std::pow(sq_phi_j / (sq_phi_j1 - sq_phi_j), qj) : fac;
        if (f_min < f_max) {
            f_bar = f_min + f_min / f_max * (f_max - f_min);
            const double fq = std::pow(f_bar, -1.0 / qj);
            sq_bar_j1 = (2.0 * sq_phi_j1 - fq * sq_phi_j) / (2.0 + fq);
            admissible = true;
        }
    } else if (q_small) {
        sq_bar_j1 = sq_phi_j1;
        const double f_min = fac * std::pow(sq_phi_j1 / (sq_phi_j1 - sq_phi_j), pj);
        if (f_min < f_max) {
            f_bar = f_min + f_min / f_max * (f_max - f_min);
            const double fp = std::pow(f_bar, -1.0 / pj);
            sq_bar_j = (2.0 * sq_phi_j + fp * sq_phi_j1) / (2.0 - fp);
            admissible = true;
        }
    } else {
        double f_min =
            fac * (sq_phi_j + sq_phi_j1) / std::pow(sq_phi_j1 - sq_phi_j, std::max(pj, qj));
        if (f_min < f_max) {
            f_min = std::max(f_min, 1.5);
            f_bar = f_min + f_min / f_max * (f_max - f_min);
            const double fp = std::pow(f_bar, -1.0 / pj);
            const double fq = std::pow(f_bar, -1.0 / qj);
            const double w = -phi_j1 * t / log_epsilon;
            const double den = 2.0 + w - (1.0 + w) * fp + fq;
            sq_bar_j = ((2.0 + w + fq) * sq_phi_j + fp * sq_phi_j1) / den;
            sq_bar_j1 = (-(1.0 + w) * fq * sq_phi_j + (2.0 + w - (1.0 + w) * fp) * sq_phi_j1) / den;
            admissible = true;
        }
    }

    ContourParams out;
    if (!admissible) return out;
    const double log_eps_adj = log_epsilon - std::log(f_bar);
    const double w = -sq_bar_j1 * sq_bar_j1 * t / log_eps_adj;
    const double denom = (1.0 + w) * sq_bar_j + sq_bar_j1;
    out.mu = std::pow(denom / (2.0 + w), 2);
    out.h = -2.0 * kPi / log_eps_adj * (sq_bar_j1 - sq_bar_j) / denom;
    out.n = std::ceil(std::sqrt(1.0 - log_eps_adj / t / out.mu) / out.h);
    if (!(out.h > 0.0) || !std::isfinite(out.n)) out = ContourParams{};
    return out;
}

/// Parameters for the unbounded region to the right of the last singularity.
ContourParams params_unbounded(double t, double phi_j, double pj, double log_epsilon) {
    const double sq_phi_j = std::sqrt(phi_j);
    double phi_bar = phi_j > 0 ? phi_j * 1.01 : 0.01;
    double sq_phi_bar = std::sqrt(phi_bar);
    constexpr double f_min = 1.0;
    constexpr double f_max = 10.0;
    constexpr double f_tar = 5.0;

    double n = 0.0;
    double a_coef = 0.0;
    double sq_mu = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
        const double phi_t = phi_bar * t;
        const double log_eps_phi_t = log_epsilon / phi_t;
        n = std::ceil(phi_t / kPi *
                      (1.0 - 1.5 * log_eps_phi_t + std::sqrt(1.0 - 2.0 * log_eps_phi_t)));
        a_coef = kPi * n / phi_t;
        sq_mu = sq_phi_bar * std::abs(4.0 - a_coef) / std::abs(7.0 - std::sqrt(1.0 + 12.0 * a_coef));
        const double f_bar = std::pow((sq_phi_bar - sq_phi_j) / sq_mu, -pj);
        if (pj < 1e-14 || (f_min < f_bar && f_bar < f_max)) break;
        sq_phi_bar = std::pow(f_tar, -1.0 / pj) * sq_mu + sq_phi_j;
        phi_bar = sq_phi_bar * sq_phi_bar;
    }

    ContourParams out;
    out.mu = sq_mu * sq_mu;
    out.h = (-3.0 * a_coef - 2.0 + 2.0 * std::sqrt(1.0 + 12.0 * a_coef)) / (4.0 - a_coef) / n;
    out.n = n;

    // Keep round-off under control: the contour must not wander too far right.
    const double threshold = (log_epsilon - kLogEps) / t;
    if (out.mu > threshold) {
        const double q = std::abs(pj) < 1e-14 ? 0.0 : std::pow(f_tar, -1.0 / pj) * std::sqrt(out.mu);
        phi_bar = std::pow(q + sq_phi_j, 2);
        if (phi_bar < threshold) {
            const double w = std::sqrt(kLogEps / (kLogEps - log_epsilon));
            const double u = std::sqrt(-phi_bar * t / kLogEps);
            out.mu = threshold;
            out.n = std::ceil(w * log_epsilon / 2.0 / kPi / (u * w - 1.0));
            out.h = std::sqrt(kLogEps / (kLogEps - log_epsilon)) / out.n;
        } else {
            out = ContourParams{};
        }
    }
    return out;
}

double laplace_inversion(double alpha, double beta, double z) {
    constexpr double t = 1.0;
    double log_epsilon = std::log(1e-15);

    // z > 0: the residue (1/alpha) s*^{1-beta} e^{s*} at s* = z^{1/alpha} dominates and may
    // exceed the double range (small alpha).
    if (z > 0.0) {
        const double log_s = std::log(z) / alpha;
        const double log_max = std::log(std::numeric_limits<double>::max());
        if (log_s > std::log(2.0 * log_max) ||
            -std::log(alpha) + (1.0 - beta) * log_s + std::exp(log_s) > log_max) {
            return std::numeric_limits<double>::infinity();
        }
    }

    // Poles s* of s^{alpha-beta}/(s^alpha - z) on the principal sheet.
    const double theta = z < 0.0 ? kPi : 0.0;
    const int kmin = static_cast<int>(std::ceil(-alpha / 2.0 - theta / (2.0 * kPi)));
    const int kmax = static_cast<int>(std::floor(alpha / 2.0 - theta / (2.0 * kPi)));
    const double radius = std::pow(std::abs(z), 1.0 / alpha);

    struct Pole {
        cplx s;
        double phi;
    };
    std::vector<Pole> poles;
    for (int k = kmin; k <= kmax; ++k) {
        const cplx s = std::polar(radius, (theta + 2.0 * k * kPi) / alpha);
        const double phi = (s.real() + std::abs(s)) / 2.0;
        if (phi > 1e-15) poles.push_back({s, phi});
    }
    std::stable_sort(poles.begin(), poles.end(),
                     [](const Pole& a, const Pole& b) { return a.phi < b.phi; });

    // Singularities: the branch point at the origin followed by the poles.
    std::vector<cplx> sing{cplx(0.0)};
    std::vector<double> phi{0.0};
    for (const auto& p : poles) {
        sing.push_back(p.s);
        phi.push_back(p.phi);
    }
    const std::size_t count = sing.size();
    std::vector<double> pw(count, 1.0);
    std::vector<double> qw(count, std::numeric_limits<double>::infinity());
    pw[0] = std::max(0.0, -2.0 * (alpha - beta + 1.0));
    for (std::size_t j = 0; j + 1 < count; ++j) qw[j] = 1.0;
    phi.push_back(std::numeric_limits<double>::infinity());

    std::vector<std::size_t> regions;
    for (std::size_t j = 0; j < count; ++j) {
        if (phi[j] < (log_epsilon - kLogEps) / t && phi[j] < phi[j + 1]) regions.push_back(j);
    }
    if (regions.empty()) {
        throw DomainError("mittag_leffler: no admissible integration region");
    }

    std::vector<ContourParams> params(count);
    std::size_t best = regions.front();
    for (int attempt = 0; attempt < 10; ++attempt) {
        double best_n = std::numeric_limits<double>::infinity();
        for (std::size_t j : regions) {
            params[j] = (j + 1 < count)
                            ? params_bounded(t, phi[j], phi[j + 1], pw[j], qw[j], log_epsilon)
                            : params_unbounded(t, phi[j], pw[j], log_epsilon);
            if (params[j].n < best_n) {
                best_n = params[j].n;
                best = j;
            }
        }
        if (best_n <= 200.0) break;
        log_epsilon += std::log(10.0);
    }
    const ContourParams& cp = params[best];
    if (!std::isfinite(cp.n)) {
        throw DomainError("mittag_leffler: contour parameter selection failed");
    }

    const int n = static_cast<int>(cp.n);
    cplx integral(0.0);
    for (int k = -n; k <= n; ++k) {
        const double u = cp.h * k;
        const cplx s = cp.mu * std::pow(cplx(1.0, u), 2);
        const cplx ds = cplx(-2.0 * cp.mu * u, 2.0 * cp.mu);
        const cplx f = std::pow(s, alpha - beta) / (std::pow(s, alpha) - z) * ds;
        integral += std::exp(s * t) * f;
    }
    integral *= cp.h / (2.0 * kPi * cplx(0.0, 1.0));

    // Residues of the poles lying to the right of the chosen contour.
    cplx residues(0.0);
    for (std::size_t j = best + 1; j < count; ++j) {
        const cplx s = sing[j];
        residues += std::pow(s, 1.0 - beta) * std::exp(t * s) / alpha;
    }
    return (integral + residues).real();
}

void validate(const MlfArgs& a) {
    if (!(a.alpha > 0.0 && a.alpha <= 2.0)) {
        std::ostringstream os;
        os << "mittag_leffler: alpha must lie in (0, 2], got " << a.alpha;
        throw DomainError(os.str());
    }
    if (!(a.beta > 0.0) || !std::isfinite(a.beta)) {
        std::ostringstream os;
        os << "mittag_leffler: beta must be positive, got " << a.beta;
        throw DomainError(os.str());
    }
    if (!std::isfinite(a.z)) {
        throw DomainError("mittag_leffler: argument must be finite");
    }
}

}  // namespace

double gamma(double x) {
    if (!(x > 0.0) || std::isnan(x)) {
        std::ostringstream os;
        os << "gamma: argument must be positive, got " << x;
        throw DomainError(os.str());
    }
    return std::tgamma(x);
}

double mittag_leffler(const MlfArgs& args) {
    validate(args);
    const double alpha = args.alpha;
    const double beta = args.beta;
    const double z = args.z;

    if (z == 0.0) return rgamma(beta);

    double out = 0.0;
    if (alpha == 1.0 && confluent_branch(beta, z, out)) return out;

    const bool series_candidate = z > 0.0 || z >= -3.0;
    if (series_candidate && power_series(alpha, beta, z, out)) return out;

    if (z < 0.0 && alpha < 1.0 && std::pow(-z, 1.0 / alpha) > 30.0 &&
        asymptotic_negative(alpha, beta, z, out)) {
        return out;
    }
    return laplace_inversion(alpha, beta, z);
}

double ml_derivative_kernel(double alpha, double lambda, double t) {
    if (!(t > 0.0)) {
        std::ostringstream os;
        os << "ml_derivative_kernel: t must be positive (kernel singular at 0), got " << t;
        throw DomainError(os.str());
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw DomainError("ml_derivative_kernel: alpha must lie in (0, 1]");
    }
    if (!(lambda >= 0.0)) {
        throw DomainError("ml_derivative_kernel: lambda must be non-negative");
    }
    const double ta = std::pow(t, alpha);
    return ta / t * mittag_leffler(alpha, alpha, -lambda * ta);
}

}  // namespace fracctl
