#pragma once

#include <stdexcept>
#include <string>

namespace fracctl {

/// Failure categories; the CLI maps each one onto its exit code.
enum class ErrorKind {
    usage,
    domain,
    inadmissible,
    non_convergence,
    unsupported_regime,
    verification_failure,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

/// The nonlocal weights violate sum |c_k| * M_T < 1.
class InadmissibleError : public Error {
public:
    InadmissibleError(const std::string& what, double margin)
        : Error(ErrorKind::inadmissible, what), margin_(margin) {}

    double margin() const noexcept { return margin_; }

private:
    double margin_;
};

class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, int iterations, double contraction_estimate,
                        double last_difference)
        : Error(ErrorKind::non_convergence, what),
          iterations_(iterations),
          contraction_estimate_(contraction_estimate),
          last_difference_(last_difference) {}

    int iterations() const noexcept { return iterations_; }
    double contraction_estimate() const noexcept { return contraction_estimate_; }
    double last_difference() const noexcept { return last_difference_; }

private:
    int iterations_;
    double contraction_estimate_;
    double last_difference_;
};

class UnsupportedRegimeError : public Error {
public:
    explicit UnsupportedRegimeError(const std::string& what)
        : Error(ErrorKind::unsupported_regime, what) {}
};

}  // namespace fracctl
