#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace radspec {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base class for all failures raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Adaptive integration (ODE or quadrature) could not reach the requested
/// tolerance within its budget. Carries the partial estimate and what was
/// actually achieved.
struct IntegrationFailure : Error {
    double partial = 0.0;
    double achieved_tol = kInf;
    double last_t = 0.0;
    IntegrationFailure(const std::string& msg, double partial_, double achieved_, double last_t_)
        : Error(msg), partial(partial_), achieved_tol(achieved_), last_t(last_t_) {}
};

/// The arclength integral converges as r approaches the domain edge, so the
/// surface is not geodesically complete.
struct IncompleteSurface : Error {
    using Error::Error;
};

/// A sampled quantity violates a structural hypothesis (e.g. r' outside
/// (0, c]). Carries the offending parameter value.
struct HypothesisViolation : Error {
    double where = 0.0;
    HypothesisViolation(const std::string& msg, double where_) : Error(msg), where(where_) {}
};

/// Operation called on the wrong end classification (bounded vs unbounded).
struct WrongBranch : Error {
    using Error::Error;
};

struct SingularBasePoint : Error {
    using Error::Error;
};

/// Requested zero count not reachable before the given horizon. Carries the
/// zeros found so far.
struct HorizonTooShort : Error {
    std::vector<double> zeros_found;
    HorizonTooShort(const std::string& msg, std::vector<double> zeros)
        : Error(msg), zeros_found(std::move(zeros)) {}
};

struct InsufficientData : Error {
    using Error::Error;
};

struct InsufficientZeros : Error {
    using Error::Error;
};

struct PreconditionViolation : Error {
    using Error::Error;
};

/// Bracketing/bisection solver exhausted its budget. Carries the last bracket.
struct SolverFailure : Error {
    double bracket_lo = 0.0, bracket_hi = 0.0;
    SolverFailure(const std::string& msg, double lo, double hi)
        : Error(msg), bracket_lo(lo), bracket_hi(hi) {}
};

struct OutOfRange : Error {
    using Error::Error;
};

struct SamplingError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

/// Default tolerances. Downstream inequality checks run with 1e-8 slack, so
/// the integrators are kept two orders tighter.
struct Tolerances {
    double ode_rel = 1e-10;
    double ode_abs = 1e-12;
    double quad_abs = 1e-10;
    double check_slack = 1e-8;
};

/// x^k for small nonnegative integer k.
inline double ipow(double x, int k) {
    double out = 1.0;
    for (int i = 0; i < k; ++i) out *= x;
    return out;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = a;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i)
        out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    out.back() = b;
    return out;
}

inline std::vector<double> logspace(double a, double b, std::size_t n) {
    std::vector<double> out = linspace(std::log(a), std::log(b), n);
    for (double& x : out) x = std::exp(x);
    return out;
}

}  // namespace radspec
