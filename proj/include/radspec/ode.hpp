#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "radspec/common.hpp"

namespace radspec::ode {

template <std::size_t N>
using State = std::array<double, N>;

struct StepControl {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double h_init = 1e-3;
    double h_max = kInf;
    // Below h_floor * (1 + |t|) the step has effectively underflowed.
    double h_floor = 1e-14;
    std::size_t max_steps = 200'000'000;
};

/// One accepted Dormand-Prince step together with the quartic interpolant
/// for continuous output on [t, t+h].
template <std::size_t N>
struct DenseStep {
    double t = 0.0, h = 0.0;
    State<N> rc1{}, rc2{}, rc3{}, rc4{}, rc5{};

    State<N> eval(double s) const {
        const double th = (s - t) / h;
        const double th1 = 1.0 - th;
        State<N> y;
        for (std::size_t i = 0; i < N; ++i)
            y[i] = rc1[i] + th * (rc2[i] + th1 * (rc3[i] + th * (rc4[i] + th1 * rc5[i])));
        return y;
    }
    double eval(double s, std::size_t i) const {
        const double th = (s - t) / h;
        const double th1 = 1.0 - th;
        return rc1[i] + th * (rc2[i] + th1 * (rc3[i] + th * (rc4[i] + th1 * rc5[i])));
    }
};

/// Piecewise record of an adaptive integration, queryable at any s inside
/// [t_begin, t_end]. Steps are contiguous and ordered.
template <std::size_t N>
class DenseTrajectory {
public:
    std::vector<DenseStep<N>> steps;

    double t_begin() const { return steps.empty() ? 0.0 : steps.front().t; }
    double t_end() const { return steps.empty() ? 0.0 : steps.back().t + steps.back().h; }
    bool empty() const { return steps.empty(); }

    const DenseStep<N>& step_at(double s) const {
        if (steps.empty()) throw OutOfRange("dense trajectory is empty");
        // Allow a sliver of roundoff at either endpoint.
        const double lo = t_begin(), hi = t_end();
        const double pad = 1e-12 * (1.0 + std::max(std::abs(lo), std::abs(hi)));
        if (s < lo - pad || s > hi + pad)
            throw OutOfRange("dense trajectory queried outside [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "] at t=" + std::to_string(s));
        std::size_t lo_i = 0, hi_i = steps.size() - 1;
        while (lo_i < hi_i) {
            const std::size_t mid = (lo_i + hi_i + 1) / 2;
            if (steps[mid].t <= s)
                lo_i = mid;
            else
                hi_i = mid - 1;
        }
        return steps[lo_i];
    }

    State<N> state(double s) const { return step_at(s).eval(s); }
    double component(double s, std::size_t i) const { return step_at(s).eval(s, i); }
};

namespace detail {
// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - b_hat (embedded 4th order error weights).
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous-output weights.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace detail

/// Adaptive Dormand-Prince stepper. Owns the current integration state and
/// emits one DenseStep per accepted step (FSAL).
template <std::size_t N, class RHS>
class DopriStepper {
public:
    DopriStepper(RHS f, double t0, State<N> y0, StepControl ctl = {})
        : f_(std::move(f)), ctl_(ctl), t_(t0), y_(y0), h_(ctl.h_init), k1_(f_(t0, y0)) {}

    double t() const { return t_; }
    const State<N>& y() const { return y_; }
    double suggested_h() const { return h_; }
    void set_suggested_h(double h) { h_ = h; }

    /// Advance by one accepted step, never beyond t_limit.
    DenseStep<N> step(double t_limit = kInf) {
        using namespace detail;
        std::size_t attempts = 0;
        for (;;) {
            if (++attempts > 10'000)
                throw IntegrationFailure("step size control failed to accept a step", y_[0],
                                         kInf, t_);
            double h = std::min(h_, ctl_.h_max);
            bool clipped = false;
            if (t_ + h >= t_limit) {
                h = t_limit - t_;
                clipped = true;
            }
            if (!(h > ctl_.h_floor * (1.0 + std::abs(t_))))
                throw IntegrationFailure("step size underflow", y_[0], kInf, t_);

            State<N> y2, y3, y4, y5, y6, y1;
            for (std::size_t i = 0; i < N; ++i) y2[i] = y_[i] + h * a21 * k1_[i];
            const State<N> k2 = f_(t_ + c2 * h, y2);
            for (std::size_t i = 0; i < N; ++i) y3[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2[i]);
            const State<N> k3 = f_(t_ + c3 * h, y3);
            for (std::size_t i = 0; i < N; ++i)
                y4[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2[i] + a43 * k3[i]);
            const State<N> k4 = f_(t_ + c4 * h, y4);
            for (std::size_t i = 0; i < N; ++i)
                y5[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
            const State<N> k5 = f_(t_ + c5 * h, y5);
            for (std::size_t i = 0; i < N; ++i)
                y6[i] = y_[i] +
                        h * (a61 * k1_[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
            const State<N> k6 = f_(t_ + h, y6);
            for (std::size_t i = 0; i < N; ++i)
                y1[i] = y_[i] + h * (b1 * k1_[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
            const State<N> k7 = f_(t_ + h, y1);

            double err_sq = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double ei = h * (e1 * k1_[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                       e6 * k6[i] + e7 * k7[i]);
                const double sc =
                    ctl_.abs_tol + ctl_.rel_tol * std::max(std::abs(y_[i]), std::abs(y1[i]));
                err_sq += (ei / sc) * (ei / sc);
            }
            const double err = std::sqrt(err_sq / static_cast<double>(N));

            if (err <= 1.0) {
                DenseStep<N> ds;
                ds.t = t_;
                ds.h = h;
                for (std::size_t i = 0; i < N; ++i) {
                    const double dy = y1[i] - y_[i];
                    const double bspl = h * k1_[i] - dy;
                    ds.rc1[i] = y_[i];
                    ds.rc2[i] = dy;
                    ds.rc3[i] = bspl;
                    ds.rc4[i] = dy - h * k7[i] - bspl;
                    ds.rc5[i] = h * (d1 * k1_[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                     d6 * k6[i] + d7 * k7[i]);
                }
                t_ = clipped ? t_limit : t_ + h;
                y_ = y1;
                k1_ = k7;
                const double grow =
                    err > 0.0 ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0) : 5.0;
                h_ = std::min(h * grow, ctl_.h_max);
                return ds;
            }
            h_ = h * std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
        }
    }

private:
    RHS f_;
    StepControl ctl_;
    double t_;
    State<N> y_;
    double h_;
    State<N> k1_;
};

/// Integrate to t_end storing the full dense trajectory.
template <std::size_t N, class RHS>
DenseTrajectory<N> integrate_dense(RHS f, double t0, State<N> y0, double t_end,
                                   StepControl ctl = {}) {
    DenseTrajectory<N> traj;
    DopriStepper<N, RHS> stepper(std::move(f), t0, y0, ctl);
    std::size_t steps = 0;
    while (stepper.t() < t_end) {
        if (++steps > ctl.max_steps)
            throw IntegrationFailure("step budget exhausted", stepper.y()[0], kInf, stepper.t());
        traj.steps.push_back(stepper.step(t_end));
    }
    return traj;
}

/// Integrate to t_end keeping only the final state.
template <std::size_t N, class RHS>
State<N> integrate_final(RHS f, double t0, State<N> y0, double t_end, StepControl ctl = {}) {
    DopriStepper<N, RHS> stepper(std::move(f), t0, y0, ctl);
    std::size_t steps = 0;
    while (stepper.t() < t_end) {
        if (++steps > ctl.max_steps)
            throw IntegrationFailure("step budget exhausted", stepper.y()[0], kInf, stepper.t());
        stepper.step(t_end);
    }
    return stepper.y();
}

}  // namespace radspec::ode
