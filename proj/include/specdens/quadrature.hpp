#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace specdens {

/// Neumaier compensated accumulator. Sums in the order values are added.
class CompensatedSum {
public:
    void add(double v) noexcept {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(double v) noexcept { add(v); return *this; }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

namespace detail {

template <class Fn>
double simpson_step(Fn& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Adaptive Simpson quadrature of f over [a, b].
///
/// The tolerance is relative to a coarse estimate of the integral of |f| (taken from
/// a 9-point composite rule), floored by abs_tol. Integrands with kinks converge; the
/// recursion depth is capped at max_depth.
template <class Fn>
double adaptive_simpson(Fn&& f, double a, double b, double rel_tol = 1e-9, double abs_tol = 0.0,
                        int max_depth = 48) {
    if (!(rel_tol > 0.0) && !(abs_tol > 0.0))
        throw std::invalid_argument("adaptive_simpson: tolerance must be positive");
    if (a == b)
        return 0.0;
    if (b < a)
        return -adaptive_simpson(f, b, a, rel_tol, abs_tol, max_depth);

    // Composite 8-panel estimate of the magnitude sets the scale for the relative tolerance.
    constexpr int panels = 8;
    const double h = (b - a) / panels;
    double fx[panels + 1];
    double magnitude = 0.0;
    for (int i = 0; i <= panels; ++i) {
        fx[i] = f(a + i * h);
        magnitude += (i == 0 || i == panels ? 0.5 : 1.0) * std::abs(fx[i]);
    }
    magnitude *= h;
    const double tol = std::max(rel_tol * magnitude, abs_tol);

    CompensatedSum total;
    for (int i = 0; i + 2 <= panels; i += 2) {
        const double lo = a + i * h;
        const double hi = (i + 2 == panels) ? b : a + (i + 2) * h;
        const double mid = a + (i + 1) * h;
        const double whole = (hi - lo) / 6.0 * (fx[i] + 4.0 * fx[i + 1] + fx[i + 2]);
        total += detail::simpson_step(f, lo, fx[i], hi, fx[i + 2], mid, fx[i + 1], whole,
                                      tol / (panels / 2), max_depth);
    }
    return total.value();
}

/// Integral of f over (0, +inf) through the substitution u = e^s, truncated to
/// s in [log_lo, log_hi]. Suitable for integrands with power-law or exponential decay
/// at both ends; the truncation error is the caller's responsibility.
template <class Fn>
double integrate_half_line(Fn&& f, double log_lo = -40.0, double log_hi = 40.0,
                           double rel_tol = 1e-12) {
    auto g = [&](double s) {
        const double u = std::exp(s);
        return f(u) * u;
    };
    return adaptive_simpson(g, log_lo, log_hi, rel_tol);
}

} // namespace specdens
