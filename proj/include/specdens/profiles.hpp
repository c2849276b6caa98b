#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadrature.hpp"

namespace specdens {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

/// Product with the measure-theoretic convention 0 * inf = 0.
inline double weighted(double w, double v) noexcept {
    return (w == 0.0 || v == 0.0) ? 0.0 : w * v;
}

/// Slack used when comparing an eigenvalue against a spectral threshold.
inline double tie_slack(double lambda) noexcept {
    return std::abs(lambda) * 1e-12 + 1e-14;
}

inline bool within_threshold(double value, double lambda) noexcept {
    return value <= lambda + tie_slack(lambda);
}

struct Breakpoint {
    double position;
    double increment;
};

struct Sample {
    double at;
    double value;
};

/// Right-continuous nondecreasing function on [0, inf).
///
/// Step and tabulated profiles share one storage layout: sorted positions with the
/// value reached at (and after) each position. Below the first position the value is
/// value_at_zero.
class MonotoneProfile {
public:
    enum class Kind { step, power, tabulated };

    MonotoneProfile() = default;

    static MonotoneProfile step(const std::vector<Breakpoint>& breakpoints, double value_at_zero = 0.0) {
        check_base(value_at_zero);
        MonotoneProfile p;
        p.kind_ = Kind::step;
        p.base_ = value_at_zero;
        double running = value_at_zero;
        double last = -1.0;
        for (const auto& b : breakpoints) {
            if (!(b.position >= 0.0) || !std::isfinite(b.position))
                throw std::invalid_argument("step profile: positions must be finite and nonnegative");
            if (b.position <= last)
                throw std::invalid_argument("step profile: positions must be strictly increasing");
            if (!(b.increment > 0.0) || !std::isfinite(b.increment))
                throw std::invalid_argument("step profile: increments must be finite and positive");
            running += b.increment;
            p.positions_.push_back(b.position);
            p.values_.push_back(running);
            last = b.position;
        }
        return p;
    }

    /// Step profile given by its cumulative values at each breakpoint. Samples whose value
    /// does not exceed the previous one are dropped, so the result has positive increments.
    static MonotoneProfile step_cumulative(const std::vector<Sample>& samples, double value_at_zero = 0.0) {
        check_base(value_at_zero);
        MonotoneProfile p;
        p.kind_ = Kind::step;
        p.base_ = value_at_zero;
        double current = value_at_zero;
        double last = -1.0;
        for (const auto& s : samples) {
            if (!(s.at >= 0.0) || !std::isfinite(s.at) || s.at <= last)
                throw std::invalid_argument("step profile: positions must be nonnegative and strictly increasing");
            if (!std::isfinite(s.value))
                throw std::invalid_argument("step profile: values must be finite");
            last = s.at;
            if (s.value <= current)
                continue;
            p.positions_.push_back(s.at);
            p.values_.push_back(s.value);
            current = s.value;
        }
        return p;
    }

    static MonotoneProfile power(double coefficient, double exponent) {
        if (!(coefficient > 0.0) || !std::isfinite(coefficient))
            throw std::invalid_argument("power profile: coefficient must be positive");
        if (!(exponent > 0.0) || !std::isfinite(exponent))
            throw std::invalid_argument("power profile: exponent must be positive");
        MonotoneProfile p;
        p.kind_ = Kind::power;
        p.coefficient_ = coefficient;
        p.exponent_ = exponent;
        return p;
    }

    static MonotoneProfile tabulated(const std::vector<Sample>& samples, double value_at_zero = 0.0) {
        check_base(value_at_zero);
        MonotoneProfile p;
        p.kind_ = Kind::tabulated;
        p.base_ = value_at_zero;
        double current = value_at_zero;
        double last = -1.0;
        for (const auto& s : samples) {
            if (!(s.at >= 0.0) || !std::isfinite(s.at) || s.at <= last)
                throw std::invalid_argument("tabulated profile: sample points must be nonnegative and strictly increasing");
            if (!std::isfinite(s.value) || s.value < current)
                throw std::invalid_argument("tabulated profile: values must be finite and nondecreasing");
            p.positions_.push_back(s.at);
            p.values_.push_back(s.value);
            current = s.value;
            last = s.at;
        }
        return p;
    }

    Kind kind() const noexcept { return kind_; }
    bool is_power() const noexcept { return kind_ == Kind::power; }

    /// The stored base value. F(0) also includes a jump located exactly at 0.
    double value_at_zero() const noexcept { return base_; }
    double coefficient() const noexcept { return coefficient_; }
    double exponent() const noexcept { return exponent_; }
    const std::vector<double>& positions() const noexcept { return positions_; }
    const std::vector<double>& values() const noexcept { return values_; }

    std::vector<Breakpoint> breakpoints() const {
        std::vector<Breakpoint> out;
        double prev = base_;
        for (std::size_t i = 0; i < positions_.size(); ++i) {
            if (values_[i] > prev)
                out.push_back({positions_[i], values_[i] - prev});
            prev = values_[i];
        }
        return out;
    }

    /// Limit at +inf.
    double supremum() const noexcept {
        if (kind_ == Kind::power)
            return infinity;
        return values_.empty() ? base_ : values_.back();
    }

    double operator()(double x) const {
        if (!(x >= 0.0))
            throw std::invalid_argument("profile evaluation: argument must be nonnegative");
        if (kind_ == Kind::power)
            return x == infinity ? infinity : coefficient_ * std::pow(x, exponent_);
        // Breakpoints within the tie slack of x count as reached.
        const auto it = std::upper_bound(positions_.begin(), positions_.end(), x + tie_slack(x));
        const auto k = static_cast<std::size_t>(it - positions_.begin());
        return k == 0 ? base_ : values_[k - 1];
    }

    double evaluate(double x) const { return (*this)(x); }

private:
    static void check_base(double v) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("profile: value_at_zero must be finite and nonnegative");
    }

    Kind kind_ = Kind::step;
    double base_ = 0.0;
    double coefficient_ = 0.0;
    double exponent_ = 0.0;
    std::vector<double> positions_;
    std::vector<double> values_;
};

struct ExponentialTerm {
    double coefficient;
    double rate;
};

/// Right-continuous nonincreasing function on (0, inf).
///
/// Either a closed-form sum of exponentials or samples joined log-linearly. A tabulated
/// profile is constant on (0, t_0] and continues as v_last * exp(-rate (t - T)) past the
/// last sample T.
class DecayProfile {
public:
    enum class Kind { exponential_sum, tabulated };

    DecayProfile() = default;

    static DecayProfile exponential_sum(const std::vector<ExponentialTerm>& terms) {
        DecayProfile p;
        p.kind_ = Kind::exponential_sum;
        for (const auto& t : terms) {
            if (!(t.coefficient >= 0.0) || !std::isfinite(t.coefficient))
                throw std::invalid_argument("exponential sum: coefficients must be finite and nonnegative");
            if (!(t.rate >= 0.0) || !std::isfinite(t.rate))
                throw std::invalid_argument("exponential sum: rates must be finite and nonnegative");
            if (t.coefficient > 0.0)
                p.terms_.push_back(t);
        }
        return p;
    }

    /// tail_rate <= 0 (or NaN) records a missing tail descriptor.
    static DecayProfile tabulated(const std::vector<Sample>& samples, double tail_rate) {
        if (samples.empty())
            throw std::invalid_argument("tabulated decay profile: no samples");
        DecayProfile p;
        p.kind_ = Kind::tabulated;
        double last_t = -1.0;
        double last_v = infinity;
        for (const auto& s : samples) {
            if (!(s.at >= 0.0) || !std::isfinite(s.at) || s.at <= last_t)
                throw std::invalid_argument("tabulated decay profile: sample points must be nonnegative and strictly increasing");
            if (!(s.value >= 0.0) || !std::isfinite(s.value) || s.value > last_v)
                throw std::invalid_argument("tabulated decay profile: values must be finite, nonnegative and nonincreasing");
            last_t = s.at;
            last_v = s.value;
        }
        p.samples_ = samples;
        p.tail_rate_ = (tail_rate > 0.0 && std::isfinite(tail_rate)) ? tail_rate : 0.0;
        return p;
    }

    Kind kind() const noexcept { return kind_; }
    const std::vector<ExponentialTerm>& terms() const noexcept { return terms_; }
    const std::vector<Sample>& samples() const noexcept { return samples_; }
    bool has_tail() const noexcept { return tail_rate_ > 0.0; }
    double tail_rate() const noexcept { return tail_rate_; }

    /// Coefficient c of the tail bound c * exp(-rate t).
    double tail_coefficient() const noexcept {
        if (!has_tail())
            return infinity;
        const auto& s = samples_.back();
        return s.value * std::exp(tail_rate_ * s.at);
    }

    /// Value at 0+.
    double initial_value() const noexcept {
        if (kind_ == Kind::tabulated)
            return samples_.front().value;
        double s = 0.0;
        for (const auto& t : terms_)
            s += t.coefficient;
        return s;
    }

    double operator()(double t) const {
        if (!(t >= 0.0))
            throw std::invalid_argument("decay profile evaluation: argument must be nonnegative");
        if (kind_ == Kind::exponential_sum) {
            CompensatedSum s;
            for (const auto& term : terms_)
                s += term.coefficient * std::exp(-term.rate * t);
            return s.value();
        }
        if (t <= samples_.front().at)
            return samples_.front().value;
        const auto& last = samples_.back();
        if (t >= last.at) {
            if (t == last.at)
                return last.value;
            if (!has_tail())
                throw std::domain_error("decay profile: evaluation beyond the last sample needs a tail descriptor");
            return last.value * std::exp(-tail_rate_ * (t - last.at));
        }
        const auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                                         [](double v, const Sample& s) { return v < s.at; });
        const Sample& b = *it;
        const Sample& a = *(it - 1);
        const double w = (t - a.at) / (b.at - a.at);
        if (a.value > 0.0 && b.value > 0.0)
            return a.value * std::exp(w * std::log(b.value / a.value));
        return a.value + w * (b.value - a.value);
    }

    double evaluate(double t) const { return (*this)(t); }

private:
    Kind kind_ = Kind::exponential_sum;
    std::vector<ExponentialTerm> terms_;
    std::vector<Sample> samples_;
    double tail_rate_ = 0.0;
};

// ---------------------------------------------------------------------------------
// Grids

/// n points from lo to hi, log-uniform, endpoints exact.
inline std::vector<double> log_grid(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2)
        throw std::invalid_argument("log_grid: need 0 < lo < hi and at least two points");
    std::vector<double> g(static_cast<std::size_t>(n));
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (int i = 0; i < n; ++i)
        g[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

/// Geometric grid covering [lo, hi] with the given number of points per decade.
inline std::vector<double> decade_grid(double lo, double hi, int per_decade) {
    if (per_decade < 1)
        throw std::invalid_argument("decade_grid: per_decade must be positive");
    const int n = std::max(2, static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade)) + 1);
    return log_grid(lo, hi, n);
}

// ---------------------------------------------------------------------------------
// Inverses

/// sup{lambda : p(lambda) <= y}, with the cutoff 0 when y < p(0) and +inf when p never
/// exceeds y.
inline double right_inverse_increasing(const MonotoneProfile& p, double y) {
    if (std::isnan(y))
        throw std::invalid_argument("right inverse: NaN argument");
    if (y < p(0.0))
        return 0.0;
    if (p.is_power())
        return y == infinity ? infinity : std::pow(y / p.coefficient(), 1.0 / p.exponent());
    const auto& v = p.values();
    const auto it = std::upper_bound(v.begin(), v.end(), y);
    if (it == v.end())
        return infinity;
    return p.positions()[static_cast<std::size_t>(it - v.begin())];
}

/// inf{t : p(t) <= y}; 0 when p(0+) <= y and +inf when p stays above y.
inline double right_inverse_decreasing(const DecayProfile& p, double y) {
    if (!(y > 0.0))
        throw std::invalid_argument("decreasing right inverse: argument must be positive");
    if (p.initial_value() <= y)
        return 0.0;

    if (p.kind() == DecayProfile::Kind::tabulated) {
        const auto& s = p.samples();
        for (std::size_t i = 1; i < s.size(); ++i) {
            if (s[i].value > y)
                continue;
            const Sample& a = s[i - 1];
            const Sample& b = s[i];
            double w;
            if (b.value > 0.0)
                w = std::log(a.value / y) / std::log(a.value / b.value);
            else
                w = (a.value - y) / (a.value - b.value);
            return a.at + std::clamp(w, 0.0, 1.0) * (b.at - a.at);
        }
        if (!p.has_tail())
            throw std::domain_error("decreasing right inverse: value beyond the samples needs a tail descriptor");
        const Sample& last = s.back();
        return last.at + std::log(last.value / y) / p.tail_rate();
    }

    const auto& terms = p.terms();
    double limit = 0.0;
    bool decaying = false;
    for (const auto& t : terms) {
        if (t.rate == 0.0)
            limit += t.coefficient;
        else
            decaying = true;
    }
    if (limit > y || (limit == y && decaying))
        return infinity;
    if (terms.size() == 1)
        return std::log(terms[0].coefficient / y) / terms[0].rate;

    double lo = 0.0;
    double hi = 1.0;
    while (p(hi) > y)
        hi *= 2.0;
    while (hi - lo > 1e-12 * (1.0 + hi)) {
        const double mid = 0.5 * (lo + hi);
        if (p(mid) > y)
            lo = mid;
        else
            hi = mid;
    }
    // Newton polish inside the bracket.
    double t = hi;
    for (int it = 0; it < 3; ++it) {
        CompensatedSum value;
        CompensatedSum slope;
        for (const auto& term : terms) {
            const double e = term.coefficient * std::exp(-term.rate * t);
            value += e;
            slope += -term.rate * e;
        }
        if (slope.value() == 0.0)
            break;
        const double next = t - (value.value() - y) / slope.value();
        if (!(next >= lo && next <= hi))
            break;
        t = next;
    }
    return t;
}

// ---------------------------------------------------------------------------------
// Transforms

/// G(lambda) = integral over ]0, lambda] of dF(u)/u. Breakpoints at or below `floor`
/// are rejected, as is a nonzero mass at 0.
inline MonotoneProfile g_transform(const MonotoneProfile& f, double floor = 0.0) {
    if (f.is_power()) {
        if (!(f.exponent() > 1.0))
            throw std::domain_error("g_transform: power profile needs exponent > 1 for convergence");
        const double a = f.exponent();
        return MonotoneProfile::power(f.coefficient() * a / (a - 1.0), a - 1.0);
    }
    if (f.value_at_zero() != 0.0)
        throw std::domain_error("g_transform: profile must vanish at 0");
    std::vector<Breakpoint> out;
    for (const auto& b : f.breakpoints()) {
        if (!(b.position > floor))
            throw std::domain_error("g_transform: breakpoint at or below the floor diverges");
        out.push_back({b.position, b.increment / b.position});
    }
    return MonotoneProfile::step(out);
}

/// H(y) = y G^{-1}(y).
inline double h_of(const MonotoneProfile& g, double y) {
    if (!(y >= 0.0))
        throw std::invalid_argument("h_of: argument must be nonnegative");
    return weighted(y, right_inverse_increasing(g, y));
}

/// Integrates a nonincreasing function over [grid_i, inf) for every grid point.
///
/// Each segment uses adaptive Simpson. Past the last point T the function is integrated
/// up to T + 40/rate and the remainder is bounded by fn(T + 40/rate)/rate, which is valid
/// whenever fn(t + s) <= exp(-rate s) fn(t). The result is tabulated on the grid with the
/// same tail rate.
template <class Fn>
DecayProfile integrate_decay(Fn&& fn, const std::vector<double>& grid, double rate, double rel_tol = 1e-9) {
    if (grid.empty())
        throw std::invalid_argument("integrate_decay: empty grid");
    if (!(rate > 0.0))
        throw std::domain_error("integrate_decay: a positive tail rate is required");
    const std::size_t n = grid.size();
    std::vector<double> pieces(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i)
        pieces[i] = adaptive_simpson(fn, grid[i], grid[i + 1], rel_tol);
    const double far = grid.back() + 40.0 / rate;
    pieces[n - 1] = adaptive_simpson(fn, grid.back(), far, rel_tol) + fn(far) / rate;

    std::vector<Sample> samples(n);
    CompensatedSum acc;
    for (std::size_t i = n; i-- > 0;) {
        acc += pieces[i];
        samples[i] = {grid[i], std::max(0.0, acc.value())};
    }
    for (std::size_t i = n - 1; i-- > 0;)
        samples[i].value = std::max(samples[i].value, samples[i + 1].value);
    return DecayProfile::tabulated(samples, rate);
}

/// M(t) = integral of L over [t, inf).
inline DecayProfile m_transform(const DecayProfile& l, double rel_tol = 1e-9) {
    if (l.kind() == DecayProfile::Kind::exponential_sum) {
        std::vector<ExponentialTerm> out;
        for (const auto& t : l.terms()) {
            if (t.rate <= 0.0)
                throw std::domain_error("m_transform: a term with zero rate is not integrable");
            out.push_back({t.coefficient / t.rate, t.rate});
        }
        return DecayProfile::exponential_sum(out);
    }
    if (!l.has_tail())
        throw std::domain_error("m_transform: tabulated profile needs an exponential tail descriptor");
    std::vector<double> grid;
    for (const auto& s : l.samples())
        grid.push_back(s.at);
    // The constant piece on (0, t_0] is part of the integral from 0.
    DecayProfile m = integrate_decay([&](double t) { return l(t); }, grid, l.tail_rate(), rel_tol);
    if (grid.front() > 0.0) {
        std::vector<Sample> s = m.samples();
        s.insert(s.begin(), {0.0, s.front().value + grid.front() * l.samples().front().value});
        return DecayProfile::tabulated(s, l.tail_rate());
    }
    return m;
}

/// N(y) = y / M^{-1}(y).
inline double n_of(const DecayProfile& m, double y) {
    if (!(y > 0.0))
        throw std::invalid_argument("n_of: argument must be positive");
    const double inv = right_inverse_decreasing(m, y);
    if (inv == 0.0)
        return infinity;
    return y / inv;
}

/// Integral of exp(-lambda t) dF(lambda) over [0, inf), including the mass F(0).
inline double laplace_stieltjes(const MonotoneProfile& f, double t) {
    if (!(t >= 0.0))
        throw std::invalid_argument("laplace_stieltjes: t must be nonnegative");
    if (f.is_power()) {
        if (t == 0.0)
            throw std::domain_error("laplace_stieltjes: power profile diverges at t = 0");
        return f.coefficient() * std::exp(std::lgamma(f.exponent() + 1.0) - f.exponent() * std::log(t));
    }
    CompensatedSum s;
    s += f.value_at_zero();
    for (const auto& b : f.breakpoints())
        s += b.increment * std::exp(-b.position * t);
    return s.value();
}

struct GrowthCheck {
    bool holds = true;
    double worst_u = 0.0;
    double worst_y = 0.0;
    double worst_excess = -infinity; ///< G(uy) - e^{Cu} G(y) at the worst pair
};

/// Tests G(u y) <= exp(C u) G(y) on the given (u, y) pairs.
inline GrowthCheck check_growth_condition(const MonotoneProfile& g, double c,
                                          const std::vector<std::pair<double, double>>& samples) {
    if (!(c > 0.0))
        throw std::invalid_argument("check_growth_condition: C must be positive");
    GrowthCheck out;
    for (const auto& [u, y] : samples) {
        if (!(u > 0.0) || !(y > 0.0))
            throw std::invalid_argument("check_growth_condition: sample pairs must be positive");
        const double lhs = g(u * y);
        const double rhs = weighted(std::exp(c * u), g(y));
        const double excess = (lhs == infinity && rhs == infinity) ? 0.0 : lhs - rhs;
        if (excess > out.worst_excess) {
            out.worst_excess = excess;
            out.worst_u = u;
            out.worst_y = y;
        }
        if (excess > 1e-12 * std::max(1.0, std::abs(rhs)))
            out.holds = false;
    }
    return out;
}

/// Tests F(2 lambda) >= 2(1 + eps) F(lambda) on lambda = k lambda_max / grid, k = 1..grid.
inline bool check_doubling(const MonotoneProfile& f, double eps, double lambda_max, int grid) {
    if (!(eps > 0.0) || !(lambda_max > 0.0) || grid < 2)
        throw std::invalid_argument("check_doubling: need eps > 0, lambda_max > 0, grid >= 2");
    for (int k = 1; k <= grid; ++k) {
        const double lambda = lambda_max * k / grid;
        const double lhs = f(2.0 * lambda);
        const double rhs = 2.0 * (1.0 + eps) * f(lambda);
        if (lhs < rhs * (1.0 - 1e-12))
            return false;
    }
    return true;
}

/// Smallest C with F(b) <= C b^exponent at every breakpoint of a step or tabulated F.
inline double dominating_constant(const MonotoneProfile& f, double exponent) {
    if (f.is_power())
        return f.exponent() == exponent ? f.coefficient() : infinity;
    if (f(0.0) > 0.0)
        return infinity;
    double c = 0.0;
    for (std::size_t i = 0; i < f.positions().size(); ++i)
        c = std::max(c, f.values()[i] / std::pow(f.positions()[i], exponent));
    return c;
}

/// True when F(lambda) <= C lambda^exponent at every breakpoint (relative slack 1e-12).
inline bool dominated_by_power(const MonotoneProfile& f, double c, double exponent) {
    if (f.is_power())
        return f.exponent() == exponent && f.coefficient() <= c * (1.0 + 1e-12);
    if (f(0.0) > 0.0)
        return false;
    for (std::size_t i = 0; i < f.positions().size(); ++i)
        if (f.values()[i] > c * std::pow(f.positions()[i], exponent) * (1.0 + 1e-12))
            return false;
    return true;
}

} // namespace specdens
