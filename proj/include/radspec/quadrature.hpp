#pragma once

#include <algorithm>
#include <cstddef>
#include <queue>
#include <span>
#include <vector>

#include "radspec/common.hpp"

namespace radspec::quad {

struct Control {
    double abs_tol = 1e-10;
    double rel_tol = 0.0;
    std::size_t max_intervals = 400'000;
};

struct Result {
    double value = 0.0;
    double error_estimate = 0.0;
    std::size_t intervals = 0;
};

namespace detail {
// Gauss-Kronrod 7-15 nodes/weights on [-1, 1] (positive half; node 7 is 0).
constexpr double xgk[8] = {0.991455371120813, 0.949107912342759, 0.864864423359769,
                           0.741531185599394, 0.586087235467691, 0.405845151377397,
                           0.207784955007898, 0.0};
constexpr double wgk[8] = {0.022935322010529, 0.063092092629979, 0.104790010322250,
                           0.140653259715525, 0.169004726639267, 0.190350578064785,
                           0.204432940075298, 0.209482141084728};
constexpr double wg[4] = {0.129484966168870, 0.279705391489277, 0.381830050505119,
                          0.417959183673469};

template <class F>
void gk15(F& f, double a, double b, double& kronrod, double& err) {
    const double c = 0.5 * (a + b);
    const double hw = 0.5 * (b - a);
    const double f0 = f(c);
    double resk = wgk[7] * f0;
    double resg = wg[3] * f0;
    for (int j = 0; j < 7; ++j) {
        const double fv = f(c - hw * xgk[j]) + f(c + hw * xgk[j]);
        resk += wgk[j] * fv;
        if (j % 2 == 1) resg += wg[j / 2] * fv;
    }
    kronrod = resk * hw;
    err = std::abs((resk - resg) * hw);
}

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const {
        // Largest error first; ties broken by position for determinism.
        if (error != o.error) return error < o.error;
        return a > o.a;
    }
};
}  // namespace detail

/// Globally adaptive Gauss-Kronrod integration. Throws IntegrationFailure
/// (carrying the partial value and achieved error) if the interval budget
/// runs out before the tolerance is met.
template <class F>
Result integrate(F f, double a, double b, Control ctl = {}) {
    Result res;
    if (a == b) return res;

    std::priority_queue<detail::Segment> heap;
    double total = 0.0, total_err = 0.0;
    auto push = [&](double lo, double hi) {
        detail::Segment s{lo, hi, 0.0, 0.0};
        detail::gk15(f, lo, hi, s.value, s.error);
        total += s.value;
        total_err += s.error;
        heap.push(s);
    };
    push(a, b);
    res.intervals = 1;

    auto tol = [&] { return std::max(ctl.abs_tol, ctl.rel_tol * std::abs(total)); };
    while (total_err > tol()) {
        if (res.intervals >= ctl.max_intervals)
            throw IntegrationFailure("quadrature interval budget exhausted", total, total_err,
                                     heap.top().a);
        const detail::Segment worst = heap.top();
        heap.pop();
        total -= worst.value;
        total_err -= worst.error;
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b))
            throw IntegrationFailure("quadrature interval underflow", total + worst.value,
                                     total_err + worst.error, worst.a);
        push(worst.a, mid);
        push(mid, worst.b);
        ++res.intervals;
    }
    res.value = total;
    res.error_estimate = total_err;
    return res;
}

/// Integrate across a sorted breakpoint list (integrand kinks live there).
template <class F>
Result integrate_partitioned(F f, std::span<const double> breakpoints, Control ctl = {}) {
    Result total;
    if (breakpoints.size() < 2) return total;
    Control per = ctl;
    per.abs_tol = ctl.abs_tol / static_cast<double>(breakpoints.size() - 1);
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        if (!(breakpoints[i + 1] > breakpoints[i])) continue;
        const Result r = integrate(f, breakpoints[i], breakpoints[i + 1], per);
        total.value += r.value;
        total.error_estimate += r.error_estimate;
        total.intervals += r.intervals;
    }
    return total;
}

}  // namespace radspec::quad
