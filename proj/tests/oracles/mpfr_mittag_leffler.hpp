#pragma once

// Test-only oracle: E_{alpha,beta}(z) in multiple precision.
//
// Inside the convergence region that is practical for a power series (|z|^{1/alpha} <= 60)
// the series sum_n z^n / Gamma(alpha n + beta) is summed with MPFR at a working precision
// that covers the largest term, with at least 300 terms. Beyond that region (only reached
// for alpha < 1) the exponentially accurate expansion
//   E = [z > 0] (1/alpha) z^{(1-beta)/alpha} exp(z^{1/alpha}) - sum_k z^{-k} / Gamma(beta - alpha k)
// is summed in MPFR until its terms fall below the working precision.

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <optional>

namespace oracle {

class Mpfr {
public:
    explicit Mpfr(mpfr_prec_t prec) { mpfr_init2(v_, prec); mpfr_set_zero(v_, 1); }
    ~Mpfr() { mpfr_clear(v_); }
    Mpfr(const Mpfr&) = delete;
    Mpfr& operator=(const Mpfr&) = delete;
    mpfr_ptr get() { return v_; }
    mpfr_srcptr get() const { return v_; }

private:
    mpfr_t v_;
};

/// Largest log-magnitude of the series terms, scanned in double precision.
inline double series_peak_log(double alpha, double beta, double z) {
    const double lz = std::log(std::abs(z));
    double peak = -std::lgamma(beta);
    for (int n = 1; n < 2000000; ++n) {
        const double v = n * lz - std::lgamma(alpha * n + beta);
        peak = std::max(peak, v);
        if (alpha * n + beta > 3.0 && v < peak - 200.0) break;
    }
    return peak;
}

/// 1/Gamma(x) in MPFR, zero at the non-positive integers.
inline void mpfr_rgamma_safe(mpfr_ptr out, mpfr_srcptr x, mpfr_prec_t prec) {
    if (mpfr_integer_p(x) && mpfr_sgn(x) <= 0) {
        mpfr_set_zero(out, 1);
        return;
    }
    Mpfr g(prec);
    mpfr_gamma(g.get(), x, MPFR_RNDN);
    mpfr_ui_div(out, 1, g.get(), MPFR_RNDN);
}

/// Returns nullopt when no branch of the oracle can certify the value.
inline std::optional<long double> mittag_leffler_mp(double alpha, double beta, double z,
                                                    int min_terms = 300) {
    if (z == 0.0) return 1.0L / std::tgamma(static_cast<long double>(beta));
    const double x_scale = std::pow(std::abs(z), 1.0 / alpha);

    if (x_scale <= 60.0) {
        const double peak = series_peak_log(alpha, beta, z);
        const mpfr_prec_t prec =
            static_cast<mpfr_prec_t>(192 + std::max(0.0, peak) / std::log(2.0));
        Mpfr sum(prec), term(prec), zz(prec), arg(prec), pw(prec), rg(prec), tol(prec);
        mpfr_set_d(zz.get(), z, MPFR_RNDN);
        mpfr_set_ui(pw.get(), 1, MPFR_RNDN);
        const int max_terms = 4000000;
        int quiet = 0;
        for (int n = 0; n < max_terms; ++n) {
            mpfr_set_d(arg.get(), alpha, MPFR_RNDN);
            mpfr_mul_si(arg.get(), arg.get(), n, MPFR_RNDN);
            mpfr_add_d(arg.get(), arg.get(), beta, MPFR_RNDN);
            mpfr_rgamma_safe(rg.get(), arg.get(), prec);
            mpfr_mul(term.get(), pw.get(), rg.get(), MPFR_RNDN);
            mpfr_add(sum.get(), sum.get(), term.get(), MPFR_RNDN);
            mpfr_mul(pw.get(), pw.get(), zz.get(), MPFR_RNDN);
            if (n >= min_terms && alpha * n + beta > 3.0) {
                // |term| < 2^-(prec-64) |sum| for a few consecutive terms
                mpfr_abs(tol.get(), sum.get(), MPFR_RNDN);
                mpfr_mul_2si(tol.get(), tol.get(), -(static_cast<long>(prec) - 64), MPFR_RNDN);
                if (mpfr_cmpabs(term.get(), tol.get()) < 0) {
                    if (++quiet >= 3) return mpfr_get_ld(sum.get(), MPFR_RNDN);
                } else {
                    quiet = 0;
                }
            }
        }
        return std::nullopt;
    }

    if (alpha >= 1.0) return std::nullopt;

    const mpfr_prec_t prec = 256;
    Mpfr sum(prec), term(prec), arg(prec), rg(prec), zinv(prec), pw(prec), tmp(prec);
    if (z > 0.0) {
        // (1/alpha) z^{(1-beta)/alpha} exp(z^{1/alpha})
        Mpfr zz(prec), e(prec);
        mpfr_set_d(zz.get(), z, MPFR_RNDN);
        mpfr_set_d(e.get(), 1.0 / alpha, MPFR_RNDN);
        mpfr_pow(tmp.get(), zz.get(), e.get(), MPFR_RNDN);
        mpfr_exp(sum.get(), tmp.get(), MPFR_RNDN);
        mpfr_set_d(e.get(), (1.0 - beta) / alpha, MPFR_RNDN);
        mpfr_pow(tmp.get(), zz.get(), e.get(), MPFR_RNDN);
        mpfr_mul(sum.get(), sum.get(), tmp.get(), MPFR_RNDN);
        mpfr_div_d(sum.get(), sum.get(), alpha, MPFR_RNDN);
    }
    mpfr_set_d(zinv.get(), z, MPFR_RNDN);
    mpfr_ui_div(zinv.get(), 1, zinv.get(), MPFR_RNDN);
    mpfr_set_ui(pw.get(), 1, MPFR_RNDN);
    double prev_mag = INFINITY;
    for (int k = 1; k < 100000; ++k) {
        mpfr_mul(pw.get(), pw.get(), zinv.get(), MPFR_RNDN);
        mpfr_set_d(arg.get(), -alpha, MPFR_RNDN);
        mpfr_mul_si(arg.get(), arg.get(), k, MPFR_RNDN);
        mpfr_add_d(arg.get(), arg.get(), beta, MPFR_RNDN);
        mpfr_rgamma_safe(rg.get(), arg.get(), prec);
        mpfr_mul(term.get(), pw.get(), rg.get(), MPFR_RNDN);
        mpfr_sub(sum.get(), sum.get(), term.get(), MPFR_RNDN);
        // envelope |z|^{-k} Gamma(1 - beta + alpha k) / pi, independent of sin zeros
        const double log_env =
            -k * std::log(std::abs(z)) + std::lgamma(1.0 - beta + alpha * k) - std::log(M_PI);
        const double log_sum = std::log(std::abs(mpfr_get_d(sum.get(), MPFR_RNDN)));
        if (log_env < log_sum - 120.0) return mpfr_get_ld(sum.get(), MPFR_RNDN);
        if (log_env > prev_mag && alpha * k > beta + 1.0) {
            // smallest term reached: accept if it is far below long double resolution
            if (prev_mag < log_sum - 50.0) return mpfr_get_ld(sum.get(), MPFR_RNDN);
            return std::nullopt;
        }
        prev_mag = log_env;
    }
    return std::nullopt;
}

}  // namespace oracle
