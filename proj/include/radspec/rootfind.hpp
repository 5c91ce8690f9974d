#pragma once

#include <cmath>
#include <cstddef>

#include "radspec/common.hpp"

namespace radspec::roots {

/// Bisection on a sign change. Requires f(a) and f(b) of opposite sign (or
/// one of them zero). Returns the midpoint of the final bracket.
template <class F>
double bisect(F f, double a, double b, double x_tol, std::size_t max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0) == (fb > 0))
        throw SolverFailure("bisect: no sign change in bracket", a, b);
    for (std::size_t i = 0; i < max_iter && (b - a) > x_tol; ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) return m;
        if ((fm > 0) == (fa > 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

/// Golden-section minimization of a unimodal function on [a, b].
template <class F>
double golden_min(F f, double a, double b, double x_tol, std::size_t max_iter = 200) {
    constexpr double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (std::size_t i = 0; i < max_iter && (b - a) > x_tol; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace radspec::roots
