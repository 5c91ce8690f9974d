#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "radspec/common.hpp"
#include "radspec/ode.hpp"
#include "radspec/quadrature.hpp"
#include "radspec/rootfind.hpp"
#include "radspec/warping.hpp"

namespace radspec {

/// Weighted Sturm-Liouville problem (v u')' + lambda v u = 0 on [t0, inf).
/// The geometric case uses v(t) = r(t)^{n-1}; the constant-weight hook
/// (v = 1, r = 1, R = 1) supplies closed-form oracles for every check.
class SLProblem {
public:
    static SLProblem from_warp(const WarpingFunction& w, int n, double lambda, double t0) {
        if (n < 2) throw PreconditionViolation("SLProblem: dimension must be >= 2");
        if (!(lambda > 0.0)) throw PreconditionViolation("SLProblem: lambda must be positive");
        if (!(t0 > 0.0)) throw PreconditionViolation("SLProblem: t0 must be positive");
        SLProblem p;
        p.warp_ = w;
        p.n_ = n;
        p.lambda_ = lambda;
        p.t0_ = t0;
        p.v_ = [w, n](double t) { return ipow(w.r(t), n - 1); };
        if (!(p.v_(t0) > 0.0))
            throw PreconditionViolation("SLProblem: weight not positive at t0");
        return p;
    }

    /// Test hook with an explicit weight. n = 1 gives the flat reduction.
    static SLProblem with_weight(std::function<double(double)> v, double lambda, double t0,
                                 int n = 1) {
        if (!(lambda > 0.0)) throw PreconditionViolation("SLProblem: lambda must be positive");
        if (!(t0 >= 0.0)) throw PreconditionViolation("SLProblem: t0 must be >= 0");
        SLProblem p;
        p.n_ = n;
        p.lambda_ = lambda;
        p.t0_ = t0;
        p.v_ = std::move(v);
        if (!(p.v_(t0) > 0.0))
            throw PreconditionViolation("SLProblem: weight not positive at t0");
        return p;
    }

    double v(double t) const { return v_(t); }
    double lambda() const { return lambda_; }
    double t0() const { return t0_; }
    int dim() const { return n_; }

    bool has_warp() const { return warp_.has_value(); }
    const WarpingFunction& warp() const {
        if (!warp_) throw PreconditionViolation("SLProblem: no warp attached");
        return *warp_;
    }

    double radius(double t) const { return warp_ ? warp_->r(t) : 1.0; }
    double dradius(double t) const { return warp_ ? warp_->dr(t) : 0.0; }
    double sup_radius() const { return warp_ ? warp_->sup_radius() : 1.0; }
    bool bounded() const { return warp_ ? warp_->bounded() : true; }

private:
    SLProblem() = default;
    std::function<double(double)> v_;
    double lambda_ = 1.0, t0_ = 1.0;
    int n_ = 1;
    std::optional<WarpingFunction> warp_;
};

namespace detail {
struct PhaseRhs {
    std::function<double(double)> v;
    double lambda;
    // State: (theta, log rho) with u = rho sin(theta), v u' = rho cos(theta).
    ode::State<2> operator()(double t, const ode::State<2>& y) const {
        const double vt = v(t);
        const double c = std::cos(y[0]), s = std::sin(y[0]);
        return {c * c / vt + lambda * vt * s * s, (1.0 / vt - lambda * vt) * s * c};
    }
};
}  // namespace detail

/// Phase-plane solution record: dense (theta, log rho) trajectory, the
/// ordered zero list (zeros[0] is the initial zero t0) and u' at each zero.
struct SLSolution {
    SLProblem problem;
    double t_end = 0.0;
    ode::DenseTrajectory<2> phase;
    std::vector<double> zeros;
    std::vector<double> du_at_zeros;

    double theta(double t) const { return phase.component(t, 0); }
    double rho(double t) const { return std::exp(phase.component(t, 1)); }
    double u(double t) const {
        const auto s = phase.state(t);
        return std::exp(s[1]) * std::sin(s[0]);
    }
    double du(double t) const {
        const auto s = phase.state(t);
        return std::exp(s[1]) * std::cos(s[0]) / problem.v(t);
    }
};

struct IntegrateOptions {
    double slope0 = 1.0;  // u'(t0); the equation is linear so checks are scale-free
    ode::StepControl ode;
    double zero_x_tol = 1e-12;
    double phase_end_tol = 1e-9;  // phase this close to k*pi at the horizon counts as a zero
    IntegrateOptions() {
        ode.rel_tol = 1e-10;
        ode.abs_tol = 1e-12;
        ode.h_init = 1e-4;
    }
};

/// Integrates the problem until t_end or until zeros_wanted zeros beyond t0
/// have been located (whichever is requested; if both, whichever comes
/// first -- reaching t_end short of the requested zeros is an error).
/// Zeros are phase crossings of k*pi, located by bisection on the dense
/// output plus one Newton polish; u'(t_k) = (-1)^k rho(t_k)/v(t_k).
inline SLSolution integrate(const SLProblem& prob, double t_end, std::size_t zeros_wanted,
                            IntegrateOptions opts = {}) {
    if (!(t_end > prob.t0()) && zeros_wanted == 0)
        throw PreconditionViolation("integrate: need t_end > t0 or zeros_wanted >= 1");
    if (!(opts.slope0 > 0.0))
        throw PreconditionViolation("integrate: slope normalization must be positive");

    SLSolution sol{prob, 0.0, {}, {}, {}};
    const double t0 = prob.t0();
    const double v0 = prob.v(t0);
    detail::PhaseRhs rhs{[&prob](double t) { return prob.v(t); }, prob.lambda()};
    ode::DopriStepper<2, detail::PhaseRhs> stepper(rhs, t0, {0.0, std::log(v0 * opts.slope0)},
                                                   opts.ode);
    sol.zeros.push_back(t0);
    sol.du_at_zeros.push_back(opts.slope0);

    auto record_zero = [&](const ode::DenseStep<2>& ds, std::size_t k, double lo, double hi) {
        const double target = static_cast<double>(k) * M_PI;
        double s = roots::bisect([&](double t) { return ds.eval(t, 0) - target; }, lo, hi,
                                 opts.zero_x_tol);
        // One Newton polish with theta' from the RHS.
        const auto y = ds.eval(s);
        const double dtheta = rhs(s, y)[0];
        if (dtheta > 0.0) s -= (y[0] - target) / dtheta;
        s = std::clamp(s, ds.t, ds.t + ds.h);
        sol.zeros.push_back(s);
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        sol.du_at_zeros.push_back(sign * std::exp(ds.eval(s, 1)) / prob.v(s));
    };

    std::size_t next_k = 1;
    std::size_t steps = 0;
    for (;;) {
        if (zeros_wanted > 0 && sol.zeros.size() - 1 >= zeros_wanted) {
            sol.t_end = sol.zeros.back();
            return sol;
        }
        if (stepper.t() >= t_end) break;
        if (++steps > opts.ode.max_steps)
            throw IntegrationFailure("integrate: step budget exhausted", 0.0, kInf, stepper.t());
        const auto ds = stepper.step(t_end);
        sol.phase.steps.push_back(ds);
        const double th_hi = ds.eval(ds.t + ds.h, 0);
        double lo = ds.t;
        while (static_cast<double>(next_k) * M_PI <= th_hi) {
            record_zero(ds, next_k, lo, ds.t + ds.h);
            lo = std::max(lo, sol.zeros.back() - 1e-9);
            ++next_k;
            if (zeros_wanted > 0 && sol.zeros.size() - 1 >= zeros_wanted) {
                sol.t_end = sol.zeros.back();
                return sol;
            }
        }
    }

    // Horizon reached. A phase kissing the next multiple of pi at t_end is
    // still a zero there (theta crossings are strictly upward).
    if (!sol.phase.steps.empty()) {
        const auto& last = sol.phase.steps.back();
        const double th_end = last.eval(t_end, 0);
        if (static_cast<double>(next_k) * M_PI - th_end <= opts.phase_end_tol) {
            sol.zeros.push_back(t_end);
            const double sign = (next_k % 2 == 0) ? 1.0 : -1.0;
            sol.du_at_zeros.push_back(sign * std::exp(last.eval(t_end, 1)) / prob.v(t_end));
        }
    }
    if (zeros_wanted > 0 && sol.zeros.size() - 1 < zeros_wanted)
        throw HorizonTooShort("integrate: only " + std::to_string(sol.zeros.size() - 1) + " of " +
                                  std::to_string(zeros_wanted) + " zeros before t_end",
                              sol.zeros);
    sol.t_end = t_end;
    return sol;
}

namespace detail {
/// Weighted quadrature partitioned at the zeros inside [a, b] plus any extra
/// breakpoints (integrand kinks live there).
template <class G>
double integrate_partitioned_at(G g, double a, double b, std::span<const double> zeros,
                                std::initializer_list<double> extra = {},
                                double abs_tol = 1e-10) {
    std::vector<double> brk{a, b};
    for (double z : zeros)
        if (z > a && z < b) brk.push_back(z);
    for (double e : extra)
        if (e > a && e < b) brk.push_back(e);
    std::sort(brk.begin(), brk.end());
    quad::Control ctl;
    ctl.abs_tol = abs_tol;
    ctl.rel_tol = 1e-12;
    return quad::integrate_partitioned(g, brk, ctl).value;
}

struct LinearFit {
    double slope = 0.0, intercept = 0.0;
};
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    LinearFit f;
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}
}  // namespace detail

struct OscillationReport {
    bool is_oscillatory_certified = false;
    double integral_growth = 0.0;  // cumulative integral of v at the horizon
    double linear_slope = 0.0;     // tail fit of I(t) against t
    double power_exponent = 0.0;   // a in I ~ C t^a over the tail
    bool weight_pinned = false;    // bounded branch: v inside ((R/2)^{n-1}, R^{n-1})
};

/// Confirms the oscillation criterion's hypotheses at the horizon: the
/// cumulative weight integral grows linearly (divergence proxy) and stays
/// under a C t^a bound. On the bounded branch the weight is also checked to
/// be pinned inside ((R/2)^{n-1}, R^{n-1}) over the tail.
inline OscillationReport oscillation_check(const SLProblem& prob, double horizon,
                                           std::size_t samples = 129) {
    const double t0 = prob.t0();
    if (!(horizon > t0)) throw PreconditionViolation("oscillation_check: horizon <= t0");
    auto rhs = [&prob](double t, const ode::State<1>&) -> ode::State<1> { return {prob.v(t)}; };
    ode::StepControl ctl;
    ctl.rel_tol = 1e-10;
    ctl.abs_tol = 1e-12;
    const auto traj = ode::integrate_dense<1>(rhs, t0, {0.0}, horizon, ctl);

    OscillationReport rep;
    rep.integral_growth = traj.component(horizon, 0);

    const double tail_lo = t0 + 0.5 * (horizon - t0);
    std::vector<double> ts = linspace(tail_lo, horizon, samples);
    std::vector<double> is(ts.size()), lts(ts.size()), lis(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        is[i] = traj.component(ts[i], 0);
        lts[i] = std::log(ts[i]);
        lis[i] = std::log(std::max(is[i], 1e-300));
    }
    rep.linear_slope = detail::least_squares(ts, is).slope;
    rep.power_exponent = detail::least_squares(lts, lis).slope;

    if (prob.has_warp() && prob.bounded()) {
        const double lo = ipow(0.5 * prob.sup_radius(), prob.dim() - 1);
        const double hi = ipow(prob.sup_radius(), prob.dim() - 1);
        rep.weight_pinned = true;
        for (double t : ts) {
            const double vt = prob.v(t);
            rep.weight_pinned = rep.weight_pinned && vt > lo && vt < hi * (1.0 + 1e-12);
        }
    } else {
        rep.weight_pinned = !prob.has_warp();
    }

    const bool growing = rep.integral_growth > 0.0 && rep.linear_slope > 0.0;
    rep.is_oscillatory_certified = growing && rep.power_exponent <= 1.1 && rep.weight_pinned;
    return rep;
}

struct ZeroGapReport {
    double min_gap = kInf;
    double bound = 0.0;
    bool passes = false;
    std::size_t tail_gaps = 0;
};

/// Tail zero gaps against the comparison bound pi / sqrt(2^{n-1} lambda).
inline ZeroGapReport zero_gap_check(const SLSolution& sol, double tail_start) {
    if (!sol.problem.bounded()) throw WrongBranch("zero_gap_check: bounded branch only");
    ZeroGapReport rep;
    rep.bound = M_PI / std::sqrt(ipow(2.0, sol.problem.dim() - 1) * sol.problem.lambda());
    const auto& z = sol.zeros;
    for (std::size_t i = 0; i + 1 < z.size(); ++i) {
        if (!(z[i] > tail_start)) continue;
        rep.min_gap = std::min(rep.min_gap, z[i + 1] - z[i]);
        ++rep.tail_gaps;
    }
    if (rep.tail_gaps == 0)
        throw InsufficientData("zero_gap_check: no zero pairs past tail_start");
    rep.passes = rep.min_gap > rep.bound - 1e-10;
    return rep;
}

/// Comparison companions for the interval [t_k, t_{k+1}]: v_k solves the
/// faster equation and stays below |u| until its first zero t_tilde; w_k
/// solves the slower one and dominates |u| up to t_{k+1}. Both are driven by
/// the cumulative quadrature of 1/v.
struct Envelope {
    std::function<double(double)> v_k, w_k;
    double t_tilde = 0.0;
    double t_k = 0.0, t_k1 = 0.0;
};

inline Envelope comparison_envelope(const SLSolution& sol, std::size_t k) {
    const auto& prob = sol.problem;
    if (!prob.bounded()) throw WrongBranch("comparison_envelope: bounded branch only");
    if (k + 1 >= sol.zeros.size())
        throw InsufficientZeros("comparison_envelope: need zeros through index k+1");

    Envelope env;
    env.t_k = sol.zeros[k];
    env.t_k1 = sol.zeros[k + 1];
    const double lambda = prob.lambda();
    const double sqrt_lambda = std::sqrt(lambda);
    const double vR = ipow(prob.sup_radius(), prob.dim() - 1);
    const double v_tk = prob.v(env.t_k);
    const double du_k = sol.du_at_zeros[k];

    // Cumulative 1/v from t_k, carried past t_{k+1} until the faster
    // companion's first zero is certainly covered.
    auto rhs = [&prob](double t, const ode::State<1>&) -> ode::State<1> {
        return {1.0 / prob.v(t)};
    };
    ode::StepControl ctl;
    ctl.rel_tol = 1e-11;
    ctl.abs_tol = 1e-13;
    ctl.h_init = 1e-4;
    ode::DopriStepper<1, decltype(rhs)> stepper(rhs, env.t_k, {0.0}, ctl);
    auto traj = std::make_shared<ode::DenseTrajectory<1>>();
    const double target = M_PI / (sqrt_lambda * vR);
    const double t_pad = env.t_k1 + 0.1 * (env.t_k1 - env.t_k);
    while (stepper.t() < t_pad || stepper.y()[0] < target * 1.0001)
        traj->steps.push_back(stepper.step());

    env.v_k = [traj, v_tk, du_k, vR, sqrt_lambda](double t) {
        const double inner = sqrt_lambda * vR * traj->component(t, 0);
        return v_tk * du_k / (vR * sqrt_lambda) * std::sin(inner);
    };
    env.w_k = [traj, v_tk, du_k, sqrt_lambda](double t) {
        const double inner = sqrt_lambda * v_tk * traj->component(t, 0);
        return du_k / sqrt_lambda * std::sin(inner);
    };
    env.t_tilde = roots::bisect([&](double t) { return traj->component(t, 0) - target; },
                                env.t_k, traj->t_end(), 1e-13);
    return env;
}

/// Closed-form-friendly view of a solution for the comparison theorems:
/// coefficients (p, q), the solution and its derivative, and its zeros.
struct ComparableSolution {
    std::function<double(double)> p, q, value, dvalue;
    std::vector<double> zeros;
    double a = 0.0, b = 0.0;
};

inline ComparableSolution as_comparable(const SLSolution& sol) {
    ComparableSolution c;
    const SLProblem prob = sol.problem;
    c.p = [prob](double t) { return prob.v(t); };
    const double lambda = prob.lambda();
    c.q = [prob, lambda](double t) { return lambda * prob.v(t); };
    c.value = [sol](double t) { return sol.u(t); };
    c.dvalue = [sol](double t) { return sol.du(t); };
    c.zeros = sol.zeros;
    c.a = prob.t0();
    c.b = sol.t_end;
    return c;
}

struct InterleaveReport {
    bool interleaved = false;
    bool proportional = false;
    double witness_lo = 0.0, witness_hi = 0.0;  // first x-zero interval missing a y-zero
    std::size_t intervals_checked = 0;
};

/// Between consecutive zeros of x, the faster-oscillating y must vanish
/// (unless the two are proportional). Zeros of y within 1e-10 of an endpoint
/// count as interior -- the boundary case is the proportional branch.
inline InterleaveReport sturm_interleave(const ComparableSolution& x,
                                         const ComparableSolution& y,
                                         std::size_t hyp_samples = 512, std::size_t scan = 256) {
    const double lo = std::max(x.a, y.a), hi = std::min(x.b, y.b);
    if (!(hi > lo)) throw PreconditionViolation("sturm_interleave: empty common interval");
    for (double t : linspace(lo, hi, hyp_samples)) {
        const double px = x.p(t), py = y.p(t), qx = x.q(t), qy = y.q(t);
        const double ps = 1e-12 * (std::abs(px) + std::abs(py));
        const double qs = 1e-12 * (std::abs(qx) + std::abs(qy));
        if (!(py > 0.0) || px < py - ps)
            throw HypothesisViolation("sturm_interleave: p >= p1 > 0 fails at t=" +
                                          std::to_string(t),
                                      t);
        if (qy < qx - qs)
            throw HypothesisViolation("sturm_interleave: q1 >= q fails at t=" + std::to_string(t),
                                      t);
    }

    InterleaveReport rep;

    // Proportionality probe: Wronskian numerically zero throughout.
    double w_max = 0.0, scale = 0.0;
    for (double t : linspace(lo, hi, 64)) {
        const double xv = x.value(t), yv = y.value(t), xd = x.dvalue(t), yd = y.dvalue(t);
        w_max = std::max(w_max, std::abs(xv * yd - xd * yv));
        scale = std::max(scale, std::abs(xv * yd) + std::abs(xd * yv));
    }
    if (w_max <= 1e-10 * std::max(scale, 1e-300)) {
        rep.proportional = true;
        rep.interleaved = true;
        return rep;
    }

    const double tie = 1e-10;
    double y_amp = 0.0;
    for (double t : linspace(lo, hi, 128)) y_amp = std::max(y_amp, std::abs(y.value(t)));

    rep.interleaved = true;
    for (std::size_t i = 0; i + 1 < x.zeros.size(); ++i) {
        const double za = x.zeros[i], zb = x.zeros[i + 1];
        if (za < lo - tie || zb > hi + tie) continue;
        ++rep.intervals_checked;
        bool found = std::abs(y.value(za)) <= tie * y_amp || std::abs(y.value(zb)) <= tie * y_amp;
        if (!found) {
            double prev_t = za, prev_v = y.value(za);
            for (std::size_t j = 1; j <= scan && !found; ++j) {
                const double t = za + (zb - za) * static_cast<double>(j) / (scan + 1.0);
                const double v = y.value(t);
                if ((prev_v < 0) != (v < 0) || v == 0.0) {
                    found = true;
                } else {
                    prev_t = t;
                    prev_v = v;
                }
            }
            (void)prev_t;
        }
        if (!found) {
            rep.interleaved = false;
            rep.witness_lo = za;
            rep.witness_hi = zb;
            break;
        }
    }
    return rep;
}

struct RatioReport {
    double lhs = 0.0, rhs = 0.0;
    bool holds = false;
};

/// p x'/x against p1 y'/y at c, after both solutions accumulated the same
/// number of zeros since the shared left endpoint.
inline RatioReport derivative_ratio_compare(const ComparableSolution& x,
                                            const ComparableSolution& y, double c) {
    const double a = std::max(x.a, y.a);
    if (!(c > a)) throw PreconditionViolation("derivative_ratio_compare: c must exceed a");
    for (double t : linspace(a, c, 256)) {
        const double px = x.p(t), py = y.p(t);
        if (!(py > 0.0) || px < py - 1e-12 * (px + py))
            throw HypothesisViolation("derivative_ratio_compare: p >= p1 > 0 fails", t);
        if (y.q(t) < x.q(t) - 1e-12 * (std::abs(x.q(t)) + std::abs(y.q(t))))
            throw HypothesisViolation("derivative_ratio_compare: q1 >= q fails", t);
    }
    auto count_zeros = [&](const ComparableSolution& s) {
        std::size_t n = 0;
        for (double z : s.zeros)
            if (z > a + 1e-10 && z < c - 1e-10) ++n;
        return n;
    };
    if (count_zeros(x) != count_zeros(y))
        throw PreconditionViolation("derivative_ratio_compare: zero counts differ on (a, c)");
    const double xv = x.value(c), yv = y.value(c);
    if (xv == 0.0 || yv == 0.0)
        throw PreconditionViolation("derivative_ratio_compare: solution vanishes at c");
    RatioReport rep;
    rep.lhs = x.p(c) * x.dvalue(c) / xv;
    rep.rhs = y.p(c) * y.dvalue(c) / yv;
    rep.holds = rep.lhs >= rep.rhs - 1e-9 * std::max({1.0, std::abs(rep.lhs), std::abs(rep.rhs)});
    return rep;
}

struct DuBoundsReport {
    bool lower_ok = false, upper_ok = false;
    double margin_lower = kInf, margin_upper = kInf;
};

/// Derivative bounds at zeros: the energy identity forces
/// u'(t_k)^2 > (r(t0)/R)^{2(n-1)} u'(t0)^2 and the companion comparison gives
/// u'(t_k)^2 <= R^{4(n-1)} / (r(t0) r(t1))^{2(n-1)} u'(t0)^2.
inline DuBoundsReport du_bounds_check(const SLSolution& sol) {
    const auto& prob = sol.problem;
    if (!prob.bounded()) throw WrongBranch("du_bounds_check: bounded branch only");
    if (sol.zeros.size() < 2) throw InsufficientData("du_bounds_check: need at least 2 zeros");

    const double vR = ipow(prob.sup_radius(), prob.dim() - 1);
    const double v0 = prob.v(sol.zeros[0]);
    const double v1 = prob.v(sol.zeros[1]);
    const double du0_sq = sol.du_at_zeros[0] * sol.du_at_zeros[0];
    const double lower = (v0 / vR) * (v0 / vR) * du0_sq;
    const double upper = (vR * vR / (v0 * v1)) * (vR * vR / (v0 * v1)) * du0_sq;

    DuBoundsReport rep;
    rep.lower_ok = rep.upper_ok = true;
    for (std::size_t k = 1; k < sol.zeros.size(); ++k) {
        const double dk_sq = sol.du_at_zeros[k] * sol.du_at_zeros[k];
        rep.lower_ok = rep.lower_ok && dk_sq > lower * (1.0 - 1e-10);
        rep.upper_ok = rep.upper_ok && dk_sq <= upper * (1.0 + 1e-10);
        rep.margin_lower = std::min(rep.margin_lower, (dk_sq - lower) / lower);
        rep.margin_upper = std::min(rep.margin_upper, (upper - dk_sq) / upper);
    }
    return rep;
}

struct EnergyReport {
    double lhs = 0.0, rhs = 0.0, rel_err = 0.0;
};

/// Energy identity integrated from t0 to the k-th zero:
/// (v u')^2 at t_k minus at t0 equals 2 lambda (n-1) int r^{2n-3} r' u^2.
inline EnergyReport energy_identity_check(const SLSolution& sol, std::size_t k,
                                          double quad_abs_tol = 1e-10) {
    if (k >= sol.zeros.size())
        throw InsufficientZeros("energy_identity_check: zero index out of range");
    const auto& prob = sol.problem;
    const double tk = sol.zeros[k], t0 = sol.zeros[0];
    const double rho_k = prob.v(tk) * sol.du_at_zeros[k];
    const double rho_0 = prob.v(t0) * sol.du_at_zeros[0];

    EnergyReport rep;
    rep.lhs = rho_k * rho_k - rho_0 * rho_0;
    if (prob.has_warp()) {
        const int n = prob.dim();
        const double lambda = prob.lambda();
        rep.rhs = 2.0 * lambda * (n - 1) *
                  detail::integrate_partitioned_at(
                      [&](double t) {
                          const double ut = sol.u(t);
                          return ipow(prob.radius(t), 2 * n - 3) * prob.dradius(t) * ut * ut;
                      },
                      t0, tk, sol.zeros, {}, quad_abs_tol);
    } else {
        rep.rhs = 0.0;  // r' = 0 for explicit weights
    }
    const double denom = std::max(std::abs(rep.lhs), std::abs(rep.rhs));
    rep.rel_err = denom <= 1e-13 * rho_0 * rho_0 ? 0.0 : std::abs(rep.lhs - rep.rhs) / denom;
    return rep;
}

/// CSV exports per the solution interface: samples (t, u, du) and the zero
/// table (k, t_k, du_k). Formatting goes through one fixed "%.17g" path so
/// reruns are byte-stable.
inline void export_solution_csv(const SLSolution& sol, std::ostream& os,
                                std::size_t samples = 2048) {
    os << "t,u,du\n";
    char buf[96];
    for (double t : linspace(sol.problem.t0(), sol.t_end, samples)) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t, sol.u(t), sol.du(t));
        os << buf;
    }
}

inline void export_zeros_csv(const SLSolution& sol, std::ostream& os) {
    os << "k,t_k,du_k\n";
    char buf[64];
    for (std::size_t k = 0; k < sol.zeros.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", k, sol.zeros[k], sol.du_at_zeros[k]);
        os << buf;
    }
}

}  // namespace radspec
