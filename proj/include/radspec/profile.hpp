#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "radspec/common.hpp"
#include "radspec/quadrature.hpp"

namespace radspec {

/// Graph profile of a radial hypersurface: height f(r) over a ball of radius
/// domain_radius (+inf for entire space). The derivative is supplied, not
/// differenced; singular radii mark where f' blows up so sampling avoids them.
struct RadialProfile {
    std::function<double(double)> f;
    std::function<double(double)> df;
    double domain_radius = kInf;
    std::string name;
    std::vector<double> singular_radii;
};

struct ProfileValidation {
    std::uint64_t seed = 0x52414453u;  // fixed default: sampling is reproducible
    std::size_t samples = 24;
    double exclusion_frac = 0.1;  // keep-out zone around declared singular radii
    double rel_tol = 1e-6;
};

/// Checks the profile's structural invariants: positive domain, finite values,
/// and f' consistent with a centered difference of f at random interior radii.
inline void validate_profile(const RadialProfile& p, ProfileValidation opts = {}) {
    if (!(p.domain_radius > 0.0))
        throw PreconditionViolation("profile '" + p.name + "': domain radius must be positive");
    if (!p.f || !p.df)
        throw PreconditionViolation("profile '" + p.name + "': f and df must be callable");

    const double span = std::min(p.domain_radius, 16.0);
    const double keep_out = opts.exclusion_frac * span;
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> dist(0.02 * span, 0.98 * span);

    std::size_t kept = 0, attempts = 0;
    while (kept < opts.samples && attempts < 100 * opts.samples) {
        ++attempts;
        const double r = dist(rng);
        bool excluded = std::abs(r - p.domain_radius) < keep_out;
        for (double s : p.singular_radii)
            excluded = excluded || std::abs(r - s) < keep_out;
        if (excluded) continue;
        ++kept;

        const double fr = p.f(r), dfr = p.df(r);
        if (!std::isfinite(fr) || !std::isfinite(dfr))
            throw PreconditionViolation("profile '" + p.name + "': non-finite value at r=" +
                                        std::to_string(r));
        const double h = 6.0e-6 * (1.0 + std::abs(r));
        const double fd = (p.f(r + h) - p.f(r - h)) / (2.0 * h);
        if (std::abs(dfr - fd) > opts.rel_tol * (1.0 + std::abs(dfr)))
            throw PreconditionViolation("profile '" + p.name + "': df inconsistent with f at r=" +
                                        std::to_string(r) + " (df=" + std::to_string(dfr) +
                                        ", fd=" + std::to_string(fd) + ")");
    }
    if (kept == 0)
        throw PreconditionViolation("profile '" + p.name +
                                    "': no admissible sample radii outside exclusion zones");
}

/// Arc length t(r) of the profile graph from the origin, by adaptive
/// quadrature of sqrt(1 + f'^2).
inline double arclength(const RadialProfile& p, double r, double abs_tol = 1e-10) {
    if (!(r >= 0.0) || !(r < p.domain_radius))
        throw PreconditionViolation("arclength: r must lie in [0, domain_radius)");
    if (r == 0.0) return 0.0;
    quad::Control ctl;
    ctl.abs_tol = abs_tol;
    ctl.rel_tol = 1e-12;
    const auto res = quad::integrate(
        [&](double tau) {
            const double d = p.df(tau);
            return std::sqrt(1.0 + d * d);
        },
        0.0, r, ctl);
    return res.value;
}

}  // namespace radspec
