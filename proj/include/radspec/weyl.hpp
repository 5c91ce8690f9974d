#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "radspec/common.hpp"
#include "radspec/quadrature.hpp"
#include "radspec/rootfind.hpp"
#include "radspec/sturm.hpp"

namespace radspec {

/// Smooth bump kernel phi(x) = K exp(-1/(x(1-x))) on (0, 1): nonnegative,
/// supported exactly on [0, 1], unit integral. The antiderivative is
/// tabulated once by adaptive quadrature and interpolated with a cubic
/// Hermite (phi itself supplies the node derivatives).
class Mollifier {
public:
    // 1 / integral_0^1 exp(-1/(x(1-x))) dx, frozen at build time.
    static constexpr double kNormalization = 142.25037577709631;

    static const Mollifier& bump_exp() {
        static const Mollifier m;
        return m;
    }

    double phi(double x) const {
        if (x <= 0.0 || x >= 1.0) return 0.0;
        return kNormalization * std::exp(-1.0 / (x * (1.0 - x)));
    }

    double dphi(double x) const {
        if (x <= 0.0 || x >= 1.0) return 0.0;
        const double w = x * (1.0 - x);
        return phi(x) * (1.0 - 2.0 * x) / (w * w);
    }

    /// Phi(x) = int_{-inf}^x phi, clamped to [0, 1].
    double antiderivative(double x) const {
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 1.0;
        const double s = x * static_cast<double>(kTableIntervals);
        const std::size_t i = std::min(static_cast<std::size_t>(s), kTableIntervals - 1);
        const double h = 1.0 / static_cast<double>(kTableIntervals);
        const double u = s - static_cast<double>(i);
        const double y0 = table_[i], y1 = table_[i + 1];
        const double d0 = h * dtable_[i], d1 = h * dtable_[i + 1];
        const double u2 = u * u, u3 = u2 * u;
        const double val = (2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * d0 +
                           (-2 * u3 + 3 * u2) * y1 + (u3 - u2) * d1;
        return std::clamp(val, 0.0, 1.0);
    }

    double sup_phi() const { return sup_phi_; }
    double sup_dphi() const { return sup_dphi_; }
    double computed_integral() const { return raw_integral_; }

private:
    Mollifier() {
        // Cumulative table of the antiderivative on a uniform grid. Each cell
        // is smooth, so per-cell quadrature converges immediately.
        table_.resize(kTableIntervals + 1);
        dtable_.resize(kTableIntervals + 1);
        table_[0] = 0.0;
        quad::Control ctl;
        ctl.abs_tol = 1e-15;
        ctl.rel_tol = 1e-13;
        double acc = 0.0;
        for (std::size_t i = 0; i < kTableIntervals; ++i) {
            const double a = static_cast<double>(i) / kTableIntervals;
            const double b = static_cast<double>(i + 1) / kTableIntervals;
            acc += quad::integrate([this](double x) { return phi(x); }, a, b, ctl).value;
            table_[i + 1] = acc;
        }
        raw_integral_ = acc / kNormalization;
        // Renormalize the tiny residual so Phi(1) = 1 exactly.
        for (auto& v : table_) v /= acc;
        for (std::size_t i = 0; i <= kTableIntervals; ++i)
            dtable_[i] = phi(static_cast<double>(i) / kTableIntervals) / acc;

        sup_phi_ = phi(0.5);
        double best_x = 0.25;
        double best = 0.0;
        for (double x : linspace(1e-3, 0.5, 2048)) {
            const double v = dphi(x);
            if (v > best) {
                best = v;
                best_x = x;
            }
        }
        best_x = roots::golden_min([this](double x) { return -dphi(x); },
                                   std::max(1e-6, best_x - 1e-3), best_x + 1e-3, 1e-14);
        sup_dphi_ = dphi(best_x);
    }

    static constexpr std::size_t kTableIntervals = 8192;
    std::vector<double> table_, dtable_;
    double raw_integral_ = 0.0;
    double sup_phi_ = 0.0, sup_dphi_ = 0.0;
};

/// h_p: 0 until t0, mollified ramp up to 1 across [t0, t_p], plateau on
/// [t_p, t_2p], ramp back down across [t_2p, t_3p], 0 afterwards.
class BumpFunction {
public:
    BumpFunction(double t0, double tp, double t2p, double t3p, const Mollifier* m)
        : t0_(t0), tp_(tp), t2p_(t2p), t3p_(t3p), m_(m) {}

    double operator()(double t) const {
        if (t <= t0_ || t >= t3p_) return 0.0;
        if (t < tp_) return m_->antiderivative((t - t0_) / (tp_ - t0_));
        if (t <= t2p_) return 1.0;
        return 1.0 - m_->antiderivative((t - t2p_) / (t3p_ - t2p_));
    }
    double d1(double t) const {
        if (t > t0_ && t < tp_) return m_->phi((t - t0_) / (tp_ - t0_)) / (tp_ - t0_);
        if (t > t2p_ && t < t3p_) return -m_->phi((t - t2p_) / (t3p_ - t2p_)) / (t3p_ - t2p_);
        return 0.0;
    }
    double d2(double t) const {
        const double up = tp_ - t0_, dn = t3p_ - t2p_;
        if (t > t0_ && t < tp_) return m_->dphi((t - t0_) / up) / (up * up);
        if (t > t2p_ && t < t3p_) return -m_->dphi((t - t2p_) / dn) / (dn * dn);
        return 0.0;
    }

    double t_start() const { return t0_; }
    double ramp_up_end() const { return tp_; }
    double ramp_down_start() const { return t2p_; }
    double t_stop() const { return t3p_; }
    double sup_d1() const {
        return m_->sup_phi() * std::max(1.0 / (tp_ - t0_), 1.0 / (t3p_ - t2p_));
    }
    double sup_d2() const {
        const double up = tp_ - t0_, dn = t3p_ - t2p_;
        return m_->sup_dphi() * std::max(1.0 / (up * up), 1.0 / (dn * dn));
    }

private:
    double t0_, tp_, t2p_, t3p_;
    const Mollifier* m_;
};

inline BumpFunction build_bump(std::span<const double> zeros, int p,
                               const Mollifier& m = Mollifier::bump_exp()) {
    if (p < 1) throw PreconditionViolation("build_bump: p must be >= 1");
    if (zeros.size() < static_cast<std::size_t>(3 * p) + 1)
        throw InsufficientZeros("build_bump: need zeros through index 3p (" +
                                std::to_string(3 * p + 1) + " entries, have " +
                                std::to_string(zeros.size()) + ")");
    return BumpFunction(zeros[0], zeros[p], zeros[2 * p], zeros[3 * p], &m);
}

/// Pointwise residual (Delta + lambda) applied to f_p = u h_p:
/// 2 u' h' + u h'' + (n-1)(r'/r) h' u. Identically zero on the plateau.
inline double residual(const SLSolution& sol, const BumpFunction& h, double t) {
    const double h1 = h.d1(t);
    const double h2 = h.d2(t);
    if (h1 == 0.0 && h2 == 0.0) return 0.0;
    const auto& prob = sol.problem;
    const double ut = sol.u(t), dut = sol.du(t);
    double geom = 0.0;
    if (prob.has_warp())
        geom = (prob.dim() - 1) * prob.dradius(t) / prob.radius(t) * h1 * ut;
    return 2.0 * dut * h1 + ut * h2 + geom;
}

/// Weighted L2 norm (int_a^b g^2 v dt)^{1/2}; the constant angular volume is
/// dropped throughout (it cancels in every quotient).
template <class G, class V>
double weighted_norm(G g, double a, double b, V v, std::span<const double> breakpoints = {},
                     double abs_tol = 1e-12) {
    if (!(b > a)) throw PreconditionViolation("weighted_norm: need a < b");
    const double sq = detail::integrate_partitioned_at(
        [&](double t) {
            const double gt = g(t);
            return gt * gt * v(t);
        },
        a, b, breakpoints, {}, abs_tol);
    return std::sqrt(std::max(sq, 0.0));
}

template <class G>
double weighted_norm(G g, double a, double b, const WarpingFunction& w, int n,
                     std::span<const double> breakpoints = {}, double abs_tol = 1e-12) {
    return weighted_norm(std::move(g), a, b,
                         [&w, n](double t) { return ipow(w.r(t), n - 1); }, breakpoints, abs_tol);
}

/// One element of the Weyl sequence: f_p = u h_p with its weighted norms and
/// the Rayleigh-style residual quotient over the support [t_0, t_3p].
struct WeylElement {
    int p = 0;
    std::shared_ptr<const SLSolution> sol;
    BumpFunction h;
    double norm_f = 0.0;
    double norm_residual = 0.0;
    double quotient = 0.0;

    double f(double t) const { return sol->u(t) * h(t); }
    /// Uniform samples of f_p across the support (fuel for the
    /// finite-difference oracle).
    std::vector<std::pair<double, double>> sample_f(double spacing) const {
        std::vector<std::pair<double, double>> out;
        const double a = h.t_start(), b = h.t_stop();
        const auto count = static_cast<std::size_t>(std::ceil((b - a) / spacing)) + 1;
        for (std::size_t i = 0; i <= count; ++i) {
            const double t = std::min(a + static_cast<double>(i) * spacing, b);
            out.emplace_back(t, f(t));
            if (t >= b) break;
        }
        return out;
    }
};

inline WeylElement weyl_element_from(std::shared_ptr<const SLSolution> sol, int p,
                                     double quad_abs_tol = 1e-12) {
    const auto& s = *sol;
    BumpFunction h = build_bump(s.zeros, p);
    const auto& prob = s.problem;
    auto v = [&prob](double t) { return prob.v(t); };

    const double t0 = h.t_start(), tp = h.ramp_up_end(), t2p = h.ramp_down_start(),
                 t3p = h.t_stop();
    const std::span<const double> zeros(s.zeros);

    WeylElement el{p, sol, h, 0.0, 0.0, 0.0};
    el.norm_f = weighted_norm([&](double t) { return s.u(t) * h(t); }, t0, t3p, v, zeros,
                              quad_abs_tol);

    auto res_sq = [&](double a, double b) {
        return detail::integrate_partitioned_at(
            [&](double t) {
                const double rt = residual(s, h, t);
                return rt * rt * prob.v(t);
            },
            a, b, zeros, {}, quad_abs_tol);
    };
    el.norm_residual = std::sqrt(std::max(res_sq(t0, tp) + res_sq(t2p, t3p), 0.0));
    el.quotient = el.norm_residual / el.norm_f;
    return el;
}

/// Integrates to 3p zeros and assembles the Weyl element.
inline WeylElement weyl_quotient(const SLProblem& prob, int p, IntegrateOptions opts = {},
                                 double quad_abs_tol = 1e-12) {
    if (prob.has_warp() && !prob.bounded())
        throw WrongBranch("weyl_quotient: bounded branch only");
    auto sol = std::make_shared<const SLSolution>(
        integrate(prob, kInf, static_cast<std::size_t>(3 * p), opts));
    return weyl_element_from(std::move(sol), p, quad_abs_tol);
}

struct DecayFit {
    double beta = 0.0;  // fitted exponent in q ~ C p^-beta
    double C = 0.0;
    std::vector<int> p_list;
    std::vector<double> quotients;
};

/// A failed quotient evaluation mid-sweep, carrying what was finished.
struct DecayAborted : Error {
    std::vector<int> p_done;
    std::vector<double> q_done;
    DecayAborted(const std::string& msg, std::vector<int> p, std::vector<double> q)
        : Error(msg), p_done(std::move(p)), q_done(std::move(q)) {}
};

/// Quotient decay across the p grid with a log-log least-squares fit.
/// The solution u does not depend on p, so one integration to 3 p_max zeros
/// serves the whole sweep.
inline DecayFit decay_fit(const SLProblem& prob, std::span<const int> p_list,
                          IntegrateOptions opts = {}, double quad_abs_tol = 1e-12) {
    if (p_list.size() < 4)
        throw PreconditionViolation("decay_fit: need at least 4 values of p");
    for (std::size_t i = 0; i + 1 < p_list.size(); ++i)
        if (!(p_list[i + 1] > p_list[i]))
            throw PreconditionViolation("decay_fit: p grid must be strictly increasing");

    DecayFit fit;
    std::shared_ptr<const SLSolution> sol;
    try {
        sol = std::make_shared<const SLSolution>(
            integrate(prob, kInf, static_cast<std::size_t>(3 * p_list.back()), opts));
        for (int p : p_list) {
            fit.quotients.push_back(weyl_element_from(sol, p, quad_abs_tol).quotient);
            fit.p_list.push_back(p);
        }
    } catch (const Error& e) {
        throw DecayAborted(std::string("decay_fit aborted: ") + e.what(), fit.p_list,
                           fit.quotients);
    }

    std::vector<double> lp, lq;
    for (std::size_t i = 0; i < fit.p_list.size(); ++i) {
        lp.push_back(std::log(static_cast<double>(fit.p_list[i])));
        lq.push_back(std::log(fit.quotients[i]));
    }
    const auto f = detail::least_squares(lp, lq);
    fit.beta = -f.slope;
    fit.C = std::exp(f.intercept);
    return fit;
}

struct MassRatio {
    double full_mass = 0.0;     // int_{t0}^{t3p} u^2 v
    double plateau_mass = 0.0;  // int_{tp}^{t2p} u^2 v
    double ratio = 0.0;
};

/// Mass comparison behind the quotient bound: the full support carries at
/// most a p-independent multiple of the plateau mass.
inline MassRatio lemma12_ratio_from(const SLSolution& s, int p, double quad_abs_tol = 1e-12) {
    if (s.zeros.size() < static_cast<std::size_t>(3 * p) + 1)
        throw InsufficientZeros("lemma12_ratio: need zeros through index 3p");
    const auto& prob = s.problem;
    auto mass = [&](double a, double b) {
        return detail::integrate_partitioned_at(
            [&](double t) {
                const double ut = s.u(t);
                return ut * ut * prob.v(t);
            },
            a, b, s.zeros, {}, quad_abs_tol);
    };
    MassRatio m;
    m.full_mass = mass(s.zeros[0], s.zeros[3 * p]);
    m.plateau_mass = mass(s.zeros[p], s.zeros[2 * p]);
    m.ratio = m.full_mass / m.plateau_mass;
    return m;
}

inline MassRatio lemma12_ratio(const SLProblem& prob, int p, IntegrateOptions opts = {},
                               double quad_abs_tol = 1e-12) {
    if (prob.has_warp() && !prob.bounded())
        throw WrongBranch("lemma12_ratio: bounded branch only");
    const auto sol = integrate(prob, kInf, static_cast<std::size_t>(3 * p), opts);
    return lemma12_ratio_from(sol, p, quad_abs_tol);
}

/// Integration-by-parts identity over [t_0, t_3p] (a zero at each end):
/// int u'^2 v = lambda int u^2 v. Returns the relative error.
inline double parseval_identity_check_from(const SLSolution& s, int p,
                                           double quad_abs_tol = 1e-12) {
    if (s.zeros.size() < static_cast<std::size_t>(3 * p) + 1)
        throw InsufficientZeros("parseval_identity_check: need zeros through index 3p");
    const auto& prob = s.problem;
    const double a = s.zeros[0], b = s.zeros[3 * p];
    const double lhs = detail::integrate_partitioned_at(
        [&](double t) {
            const double d = s.du(t);
            return d * d * prob.v(t);
        },
        a, b, s.zeros, {}, quad_abs_tol);
    const double rhs = prob.lambda() * detail::integrate_partitioned_at(
                                           [&](double t) {
                                               const double ut = s.u(t);
                                               return ut * ut * prob.v(t);
                                           },
                                           a, b, s.zeros, {}, quad_abs_tol);
    return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
}

inline double parseval_identity_check(const SLProblem& prob, int p, IntegrateOptions opts = {},
                                      double quad_abs_tol = 1e-12) {
    const auto sol = integrate(prob, kInf, static_cast<std::size_t>(3 * p), opts);
    return parseval_identity_check_from(sol, p, quad_abs_tol);
}

}  // namespace radspec
