#pragma once

namespace fracctl {

/// Arguments of the two-parameter Mittag-Leffler function E_{alpha,beta}(z).
struct MlfArgs {
    double alpha = 1.0;  ///< order, in (0, 2]
    double beta = 1.0;   ///< second parameter, > 0
    double z = 0.0;      ///< real argument
};

/// Gamma function for x > 0. Throws DomainError otherwise.
double gamma(double x);

/// Two-parameter Mittag-Leffler function E_{alpha,beta}(z) = sum_n z^n / Gamma(alpha n + beta)
/// for real z, alpha in (0, 2], beta > 0.
///
/// The evaluation picks one of four routes:
///   - alpha == 1: confluent hypergeometric series 1F1(1; beta; z) / Gamma(beta), with a
///     Kummer transformation for z < 0 so that every term is positive;
///   - power series with compensated summation when it converges without cancellation;
///   - the algebraic asymptotic expansion for large negative z and alpha < 1, when the
///     smallest term is below round-off;
///   - otherwise, numerical inversion of the Laplace transform s^{alpha-beta}/(s^alpha - z)
///     on an optimal parabolic contour plus the residues of the poles it leaves behind.
///
/// Throws DomainError for parameters outside the supported range.
double mittag_leffler(const MlfArgs& args);

inline double mittag_leffler(double alpha, double beta, double z) {
    return mittag_leffler(MlfArgs{alpha, beta, z});
}

/// t^{alpha-1} E_{alpha,alpha}(-lambda t^alpha): the scalar resolvent kernel of one mode.
/// alpha in (0, 1], lambda >= 0, t > 0.
double ml_derivative_kernel(double alpha, double lambda, double t);

}  // namespace fracctl
