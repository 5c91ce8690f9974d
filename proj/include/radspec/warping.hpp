#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "radspec/common.hpp"
#include "radspec/ode.hpp"
#include "radspec/profile.hpp"
#include "radspec/rootfind.hpp"

namespace radspec {

enum class WarpEnd { Bounded, Unbounded };
enum class WarpSource { FromProfile, Direct };

namespace detail {

struct ProfileSpeed {
    std::function<double(double)> df;
    ode::State<1> operator()(double, const ode::State<1>& y) const {
        const double d = df(y[0]);
        return {1.0 / std::sqrt(1.0 + d * d)};
    }
};

/// Dense record of the radius ODE dr/dt = (1 + f'(r)^2)^{-1/2}, r(0) = 0,
/// extended on demand. Extension always continues from the stored integrator
/// state, so the table contents for a given t are independent of the query
/// pattern; the mutex makes shared use safe.
class RadialOdeTable {
public:
    RadialOdeTable(std::function<double(double)> df, ode::StepControl ctl)
        : stepper_(ProfileSpeed{std::move(df)}, 0.0, {0.0}, ctl) {}

    double r(double t) const {
        if (t <= 0.0) return 0.0;
        std::lock_guard lock(mu_);
        extend(t);
        return traj_.component(t, 0);
    }

    double reached() const {
        std::lock_guard lock(mu_);
        return stepper_.t();
    }

private:
    void extend(double t) const {
        while (stepper_.t() < t) {
            if (traj_.steps.size() >= kMaxSteps)
                throw IntegrationFailure("warping trajectory step budget exhausted",
                                         stepper_.y()[0], kInf, stepper_.t());
            traj_.steps.push_back(stepper_.step());
        }
    }

    static constexpr std::size_t kMaxSteps = 20'000'000;
    mutable std::mutex mu_;
    mutable ode::DopriStepper<1, ProfileSpeed> stepper_;
    mutable ode::DenseTrajectory<1> traj_;
};

}  // namespace detail

/// Model-manifold warping function r(t) with its derivative and end
/// classification. Copies share the underlying evaluators.
class WarpingFunction {
public:
    WarpingFunction(std::function<double(double)> r, std::function<double(double)> dr,
                    WarpEnd end, double sup_radius, double cap, double t0, WarpSource source,
                    std::string name = {})
        : r_(std::move(r)),
          dr_(std::move(dr)),
          end_(end),
          sup_radius_(sup_radius),
          cap_(cap),
          t0_(t0),
          source_(source),
          name_(std::move(name)) {}

    double r(double t) const { return r_(t); }
    double dr(double t) const { return dr_(t); }
    WarpEnd end() const { return end_; }
    bool bounded() const { return end_ == WarpEnd::Bounded; }
    /// Supremum R of r(t); only meaningful for bounded warps.
    double sup_radius() const {
        if (!bounded()) throw WrongBranch("sup_radius: warp is unbounded");
        return sup_radius_;
    }
    double derivative_cap() const { return cap_; }
    double t0() const { return t0_; }
    WarpSource source() const { return source_; }
    const std::string& name() const { return name_; }

private:
    std::function<double(double)> r_, dr_;
    WarpEnd end_;
    double sup_radius_;
    double cap_;
    double t0_;
    WarpSource source_;
    std::string name_;
};

struct WarpBuildOptions {
    ode::StepControl ode;
    double t0 = 1.0;
    // Completeness proxy: arclength at domain_radius*(1 - 10^-k) for
    // k = 2..completeness_k_max must keep near-doubling.
    int completeness_k_max = 6;
    double completeness_ratio = 1.9;
    bool validate = true;
    std::uint64_t seed = 0x52414453u;

    WarpBuildOptions() {
        ode.rel_tol = 1e-10;
        ode.abs_tol = 1e-12;
    }
};

namespace detail {

/// Arclength values t(r_k) at the checkpoint radii, via the ODE
/// dt/dr = sqrt(1 + f'(r)^2). One sweep covers all checkpoints.
inline std::vector<double> completeness_samples(const RadialProfile& p, int k_max) {
    ode::StepControl ctl;
    ctl.rel_tol = 1e-6;
    ctl.abs_tol = 1e-9;
    auto rhs = [&](double r, const ode::State<1>&) -> ode::State<1> {
        const double d = p.df(r);
        return {std::sqrt(1.0 + d * d)};
    };
    ode::DopriStepper<1, decltype(rhs)> stepper(rhs, 0.0, {0.0}, ctl);
    std::vector<double> out;
    for (int k = 2; k <= k_max; ++k) {
        const double rk = p.domain_radius * (1.0 - std::pow(10.0, -k));
        while (stepper.t() < rk) stepper.step(rk);
        out.push_back(stepper.y()[0]);
    }
    return out;
}

/// Dyadic growth probe: geometric decay of the increments of g(2^k) means a
/// finite limit. Returns (bounded, limit estimate).
inline std::pair<bool, double> classify_growth(const std::function<double(double)>& g,
                                               int k_lo = 0, int k_hi = 12) {
    std::vector<double> s;
    for (int k = k_lo; k <= k_hi; ++k) s.push_back(g(std::pow(2.0, k)));
    const std::size_t m = s.size();
    const double d_last = s[m - 1] - s[m - 2];
    const double d_prev = s[m - 2] - s[m - 3];
    const double scale = 1.0 + std::abs(s[m - 1]);
    const bool saturated = std::abs(d_last) <= 1e-13 * scale;
    const bool decaying = std::abs(d_last) <= 0.75 * std::abs(d_prev) &&
                          std::abs(d_last) <= 1e-6 * scale;
    if (!saturated && !decaying) return {false, kInf};
    double limit = s[m - 1];
    const double denom = d_prev - d_last;
    if (!saturated && std::abs(denom) > 0.0) {
        // Aitken extrapolation of the tail.
        const double aitken = s[m - 1] + d_last * d_last / denom;
        if (std::isfinite(aitken) && aitken >= limit) limit = aitken;
    }
    return {true, limit};
}

}  // namespace detail

/// Builds the warping function of a profile by integrating
/// dr/dt = (1 + f'(r)^2)^{-1/2} with dense output. Fails with
/// IncompleteSurface when the arclength integral does not diverge at the
/// domain edge.
inline WarpingFunction build_warping(const RadialProfile& p, WarpBuildOptions opts = {}) {
    if (opts.validate) validate_profile(p, {opts.seed});

    if (std::isfinite(p.domain_radius)) {
        const auto samples = detail::completeness_samples(p, opts.completeness_k_max);
        for (std::size_t i = samples.size() >= 2 ? samples.size() - 2 : 0;
             i + 1 < samples.size(); ++i) {
            if (!(samples[i + 1] >= opts.completeness_ratio * samples[i]))
                throw IncompleteSurface(
                    "profile '" + p.name + "': arclength saturates near the domain edge (t(" +
                    std::to_string(i) + ")=" + std::to_string(samples[i]) + " -> " +
                    std::to_string(samples[i + 1]) + "); surface is not complete");
        }
    }

    auto table = std::make_shared<detail::RadialOdeTable>(p.df, opts.ode);
    auto df = p.df;
    auto r_fn = [table](double t) { return table->r(t); };
    auto dr_fn = [table, df](double t) {
        const double d = df(table->r(t));
        return 1.0 / std::sqrt(1.0 + d * d);
    };

    WarpEnd end = WarpEnd::Unbounded;
    double sup_radius = kInf;
    if (std::isfinite(p.domain_radius)) {
        end = WarpEnd::Bounded;
        sup_radius = p.domain_radius;
    } else {
        // r(t) -> domain_radius always; confirm unbounded growth numerically.
        const auto [bounded, limit] = detail::classify_growth(r_fn);
        if (bounded)
            throw HypothesisViolation("profile '" + p.name +
                                          "': r(t) appears to saturate at " +
                                          std::to_string(limit) +
                                          " despite an unbounded domain",
                                      limit);
    }

    // Sample the Theorem-2 hypotheses on an initial window.
    for (double t : linspace(0.0, 32.0, 257)) {
        const double d = dr_fn(t);
        if (!(d > 0.0) || d > 1.0 + 1e-12)
            throw HypothesisViolation("warping derivative outside (0, 1] at t=" +
                                          std::to_string(t),
                                      t);
    }

    return WarpingFunction(r_fn, dr_fn, end, sup_radius, 1.0, opts.t0, WarpSource::FromProfile,
                           p.name);
}

struct DirectWarpOptions {
    double t0 = 1.0;
    double grid_hi = 64.0;
    std::size_t grid_uniform = 1024;
    std::size_t grid_log = 256;
    std::string name;
};

/// Validates a user-supplied warp (bypassing graphs) and classifies its end.
/// The derivative is required to stay in (0, c]; local extrema between grid
/// points are refined so isolated zeros of dr are caught.
inline WarpingFunction direct_warping(std::function<double(double)> r_of_t,
                                      std::function<double(double)> dr_of_t, double cap,
                                      double t0, DirectWarpOptions opts = {}) {
    if (!(cap > 0.0)) throw PreconditionViolation("direct_warping: cap must be positive");
    if (!(t0 > 0.0)) throw PreconditionViolation("direct_warping: t0 must be positive");

    std::vector<double> grid = linspace(0.0, opts.grid_hi, opts.grid_uniform);
    for (double t : logspace(1e-3, 4096.0, opts.grid_log)) grid.push_back(t);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const std::size_t m = grid.size();
    std::vector<double> d(m);
    for (std::size_t i = 0; i < m; ++i) {
        d[i] = dr_of_t(grid[i]);
        if (!std::isfinite(d[i]))
            throw HypothesisViolation("dr(t) not finite at t=" + std::to_string(grid[i]), grid[i]);
    }

    // A vanishing derivative is an underflow artifact (bounded warps saturate)
    // exactly when the whole neighborhood has died out as well.
    auto dead_zone = [&](std::size_t i) {
        double near = 0.0;
        for (std::size_t j = (i >= 2 ? i - 2 : 0); j < std::min(m, i + 3); ++j)
            near = std::max(near, d[j]);
        return near <= 1e-250;
    };
    auto check_value = [&](double value, double t, bool allow_underflow) {
        if (value < 0.0 || (!(value > 0.0) && !allow_underflow))
            throw HypothesisViolation("dr(t) <= 0 at t=" + std::to_string(t), t);
        if (value > cap * (1.0 + 1e-12))
            throw HypothesisViolation("dr(t)=" + std::to_string(value) + " exceeds cap " +
                                          std::to_string(cap) + " at t=" + std::to_string(t),
                                      t);
    };

    for (std::size_t i = 0; i < m; ++i) check_value(d[i], grid[i], dead_zone(i));

    double prev_r = r_of_t(grid[0]);
    for (std::size_t i = 1; i < m; ++i) {
        const double ri = r_of_t(grid[i]);
        // Strict increase is only required where the increment is resolvable
        // in double precision.
        const double expected_inc =
            dr_of_t(0.5 * (grid[i - 1] + grid[i])) * (grid[i] - grid[i - 1]);
        const bool resolvable = expected_inc > 1e-12 * (1.0 + std::abs(ri));
        if (!std::isfinite(ri) || ri < prev_r || (resolvable && !(ri > prev_r)))
            throw HypothesisViolation("r(t) not strictly increasing at t=" +
                                          std::to_string(grid[i]),
                                      grid[i]);
        // Refine interior extrema of dr: a grid-local dip may hide a zero and
        // a grid-local hump may hide a cap violation.
        if (i >= 2) {
            if (d[i - 1] < d[i - 2] && d[i - 1] < d[i]) {
                const double t_min = roots::golden_min(dr_of_t, grid[i - 2], grid[i], 1e-12);
                check_value(dr_of_t(t_min), t_min, dead_zone(i - 1));
            }
            if (d[i - 1] > d[i - 2] && d[i - 1] > d[i]) {
                const double t_max = roots::golden_min(
                    [&](double t) { return -dr_of_t(t); }, grid[i - 2], grid[i], 1e-12);
                check_value(dr_of_t(t_max), t_max, dead_zone(i - 1));
            }
        }
        prev_r = ri;
    }

    const auto [bounded, limit] = detail::classify_growth(r_of_t);
    WarpEnd end = bounded ? WarpEnd::Bounded : WarpEnd::Unbounded;
    if (bounded) {
        for (double t : grid)
            if (r_of_t(t) > limit * (1.0 + 1e-12))
                throw HypothesisViolation("r(t) exceeds its extrapolated supremum at t=" +
                                              std::to_string(t),
                                          t);
    }
    return WarpingFunction(std::move(r_of_t), std::move(dr_of_t), end, limit, cap, t0,
                           WarpSource::Direct, opts.name);
}

/// Radial Laplacian of the geodesic coordinate: Delta t = (n-1) r'(t)/r(t).
inline double laplacian_of_t(const WarpingFunction& w, int n, double t) {
    if (n < 2) throw PreconditionViolation("laplacian_of_t: dimension must be >= 2");
    if (!(t >= 0.0)) throw PreconditionViolation("laplacian_of_t: t must be >= 0");
    const double r = w.r(t);
    if (!(r > 0.0))
        throw SingularBasePoint("laplacian_of_t: r(t) = 0 at t=" + std::to_string(t));
    return static_cast<double>(n - 1) * w.dr(t) / r;
}

struct KumuraReport {
    bool passes = false;
    double sup_tail = kInf;
    double t_max = 0.0;
    double epsilon = 0.0;
};

/// Certifies the unbounded-branch hypothesis at the sampled horizon:
/// sup of |Delta t| over [t_max/2, t_max] below epsilon.
inline KumuraReport kumura_check(const WarpingFunction& w, int n, double t_max, double epsilon,
                                 std::size_t grid = 2048) {
    if (w.bounded()) throw WrongBranch("kumura_check: warp has a bounded end");
    KumuraReport rep;
    rep.t_max = t_max;
    rep.epsilon = epsilon;
    rep.sup_tail = 0.0;
    for (double t : linspace(0.5 * t_max, t_max, grid))
        rep.sup_tail = std::max(rep.sup_tail, std::abs(laplacian_of_t(w, n, t)));
    rep.passes = rep.sup_tail < epsilon;
    return rep;
}

/// First time with r(t) > sup_radius / 2 (every zero past this point is in
/// the oscillation tail used by the zero-gap bound).
inline double first_tail_time(const WarpingFunction& w, double t_hi = 4096.0) {
    if (!w.bounded()) throw WrongBranch("first_tail_time: warp is unbounded");
    const double target = 0.5 * w.sup_radius();
    if (w.r(0.0) > target) return 0.0;
    if (w.r(t_hi) <= target)
        throw OutOfRange("first_tail_time: r stays below R/2 up to the probe horizon");
    return roots::bisect([&](double t) { return w.r(t) - target; }, 0.0, t_hi, 1e-12);
}

}  // namespace radspec
