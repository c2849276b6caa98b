#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "profiles.hpp"
#include "quadrature.hpp"

namespace specdens {

// ---------------------------------------------------------------------------------
// Symbols on the dual torus

/// A periodic field of PSD h x h matrices over [0, 2pi)^d, given by its sorted eigenvalues.
/// The callback writes fiber_dim eigenvalues for the point xi (length dimension).
struct TorusSymbol {
    int dimension = 1;
    int fiber_dim = 1;
    std::function<void(const double* xi, double* eigenvalues)> spectrum;
    std::string name;

    std::vector<double> eigenvalues_at(const std::vector<double>& xi) const {
        if (static_cast<int>(xi.size()) != dimension)
            throw std::invalid_argument("symbol: point has the wrong dimension");
        std::vector<double> e(static_cast<std::size_t>(fiber_dim));
        spectrum(xi.data(), e.data());
        return e;
    }
};

/// Scalar symbol from a real function of xi.
inline TorusSymbol scalar_symbol(int d, std::function<double(const double*)> fn, std::string name) {
    if (d < 1)
        throw std::invalid_argument("symbol: dimension must be positive");
    TorusSymbol s;
    s.dimension = d;
    s.fiber_dim = 1;
    s.name = std::move(name);
    s.spectrum = [fn = std::move(fn)](const double* xi, double* out) { out[0] = fn(xi); };
    return s;
}

/// Matrix-valued symbol from a Hermitian matrix field; eigenvalues come from a dense solve.
inline TorusSymbol matrix_symbol(int d, int h, std::function<Eigen::MatrixXcd(const double*)> fn, std::string name) {
    if (d < 1 || h < 1)
        throw std::invalid_argument("symbol: dimension and fibre dimension must be positive");
    TorusSymbol s;
    s.dimension = d;
    s.fiber_dim = h;
    s.name = std::move(name);
    s.spectrum = [fn = std::move(fn), h](const double* xi, double* out) {
        const Eigen::MatrixXcd m = fn(xi);
        if (m.rows() != h || m.cols() != h)
            throw std::invalid_argument("symbol: matrix has the wrong size");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
        for (int i = 0; i < h; ++i)
            out[i] = es.eigenvalues()(i);
    };
    return s;
}

/// sigma(xi) = sum_i 2 (1 - cos xi_i), the symbol of the Z^d graph Laplacian.
inline TorusSymbol lattice_laplacian_symbol(int d) {
    return scalar_symbol(
        d,
        [d](const double* xi) {
            double s = 0.0;
            for (int i = 0; i < d; ++i)
                s += 2.0 * (1.0 - std::cos(xi[i]));
            return s;
        },
        "lattice_laplacian " + std::to_string(d));
}

/// Square of the lattice Laplacian symbol.
inline TorusSymbol discrete_bilaplacian_symbol(int d) {
    return scalar_symbol(
        d,
        [d](const double* xi) {
            double s = 0.0;
            for (int i = 0; i < d; ++i)
                s += 2.0 * (1.0 - std::cos(xi[i]));
            return s * s;
        },
        "discrete_bilaplacian " + std::to_string(d));
}

// ---------------------------------------------------------------------------------
// Counting on the torus

struct TorusCountOptions {
    int resolution = 256;  ///< base midpoint cells per axis
    double refine = 0.0;   ///< relative eigenvalue spread that triggers subdivision; 0 = plain midpoint
    int max_depth = 10;    ///< subdivision levels below the base grid
    double kappa = 1e-10;  ///< kernel threshold relative to the largest sampled eigenvalue
};

namespace detail {

class TorusCounter {
public:
    TorusCounter(const TorusSymbol& sym, const std::vector<double>& grid, const TorusCountOptions& opt)
        : sym_(sym), grid_(grid), opt_(opt), d_(sym.dimension), h_(sym.fiber_dim),
          buckets_(grid.size() + 1), center_(static_cast<std::size_t>(h_)), corner_(static_cast<std::size_t>(h_)),
          point_(static_cast<std::size_t>(d_)) {}

    std::vector<double> run() {
        threshold_ = opt_.kappa * global_scale();
        const int r = opt_.resolution;
        const double side = 2.0 * M_PI / r;
        const double base_weight = std::pow(static_cast<double>(r), -d_);
        std::vector<int> idx(static_cast<std::size_t>(d_), 0);
        std::vector<double> c(static_cast<std::size_t>(d_));
        while (true) {
            for (int i = 0; i < d_; ++i)
                c[static_cast<std::size_t>(i)] = (idx[static_cast<std::size_t>(i)] + 0.5) * side;
            cell(c, side, base_weight, 0);
            int axis = d_ - 1;
            while (axis >= 0 && ++idx[static_cast<std::size_t>(axis)] == r)
                idx[static_cast<std::size_t>(axis--)] = 0;
            if (axis < 0)
                break;
        }
        std::vector<double> out(grid_.size());
        CompensatedSum acc;
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            acc += buckets_[i].value();
            out[i] = std::min(static_cast<double>(h_), std::max(0.0, acc.value()));
        }
        return out;
    }

    double threshold() const noexcept { return threshold_; }

private:
    double global_scale() {
        const int r = std::min(opt_.resolution, 16);
        double top = 0.0;
        std::vector<int> idx(static_cast<std::size_t>(d_), 0);
        while (true) {
            for (int i = 0; i < d_; ++i)
                point_[static_cast<std::size_t>(i)] = (idx[static_cast<std::size_t>(i)] + 0.5) * 2.0 * M_PI / r;
            sym_.spectrum(point_.data(), center_.data());
            for (double e : center_) {
                if (!std::isfinite(e))
                    throw std::domain_error("symbol: non-finite eigenvalue");
                top = std::max(top, std::abs(e));
            }
            int axis = d_ - 1;
            while (axis >= 0 && ++idx[static_cast<std::size_t>(axis)] == r)
                idx[static_cast<std::size_t>(axis--)] = 0;
            if (axis < 0)
                break;
        }
        return top;
    }

    // First grid index i with lambda_i (plus tie slack) >= e.
    std::size_t bucket(double e) const {
        const auto it = std::lower_bound(grid_.begin(), grid_.end(), e,
                                         [](double lambda, double v) { return lambda + tie_slack(lambda) < v; });
        return static_cast<std::size_t>(it - grid_.begin());
    }

    void cell(const std::vector<double>& c, double side, double weight, int depth) {
        sym_.spectrum(c.data(), center_.data());
        for (double e : center_)
            if (e < -threshold_ - 1e-12 * std::max(1.0, std::abs(e)))
                throw std::domain_error("symbol: negative eigenvalue " + std::to_string(e));
        if (opt_.refine > 0.0 && depth < opt_.max_depth && needs_split(c, side)) {
            std::vector<double> child(c.size());
            const double q = side / 4.0;
            for (int mask = 0; mask < (1 << d_); ++mask) {
                for (int i = 0; i < d_; ++i)
                    child[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)] + ((mask >> i) & 1 ? q : -q);
                cell(child, side / 2.0, weight / (1 << d_), depth + 1);
            }
            return;
        }
        for (double e : center_)
            if (e > threshold_)
                buckets_[bucket(e)] += weight;
    }

    // Spread of each eigenvalue over the cell corners, compared with the nearby grid values.
    bool needs_split(const std::vector<double>& c, double side) {
        std::vector<double> centre = center_;
        std::vector<double> spread(static_cast<std::size_t>(h_), 0.0);
        const double half = side / 2.0;
        for (int mask = 0; mask < (1 << d_); ++mask) {
            for (int i = 0; i < d_; ++i)
                point_[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)] + ((mask >> i) & 1 ? half : -half);
            sym_.spectrum(point_.data(), corner_.data());
            for (int k = 0; k < h_; ++k)
                spread[static_cast<std::size_t>(k)] =
                    std::max(spread[static_cast<std::size_t>(k)],
                             std::abs(corner_[static_cast<std::size_t>(k)] - centre[static_cast<std::size_t>(k)]));
        }
        center_ = centre;
        for (int k = 0; k < h_; ++k) {
            const double e = centre[static_cast<std::size_t>(k)];
            const double v = spread[static_cast<std::size_t>(k)];
            const std::size_t i = bucket(e - v);
            if (i < grid_.size() && grid_[i] <= e + v && 2.0 * v > opt_.refine * grid_[i])
                return true;
        }
        return false;
    }

    const TorusSymbol& sym_;
    const std::vector<double>& grid_;
    TorusCountOptions opt_;
    int d_;
    int h_;
    std::vector<CompensatedSum> buckets_;
    std::vector<double> center_;
    std::vector<double> corner_;
    std::vector<double> point_;
    double threshold_ = 0.0;
};

inline void check_grid(const std::vector<double>& grid) {
    if (grid.empty())
        throw std::invalid_argument("lambda grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!(grid[i] > 0.0) || !std::isfinite(grid[i]) || (i > 0 && grid[i] <= grid[i - 1]))
            throw std::invalid_argument("lambda grid must be positive, finite and strictly increasing");
}

} // namespace detail

/// Fraction of the dual torus (times the fibre count) where the symbol has eigenvalues in
/// ]0, lambda_i], for every grid value.
inline std::vector<double> torus_counting(const TorusSymbol& sym, const std::vector<double>& grid,
                                          const TorusCountOptions& opt = {}) {
    detail::check_grid(grid);
    if (opt.resolution < 1)
        throw std::invalid_argument("torus counting: resolution must be positive");
    if (!sym.spectrum)
        throw std::invalid_argument("torus counting: symbol has no evaluator");
    detail::TorusCounter counter(sym, grid, opt);
    return counter.run();
}

struct SymbolProfile {
    MonotoneProfile profile;
    double error_estimate = 0.0; ///< max difference from the coarser run over the grid
    int resolution = 0;
};

/// Integrated density of states of a torus symbol on lambda_grid. The error estimate is the
/// difference from a run at half the resolution (and twice the refinement spread). Throws
/// when that estimate exceeds `tolerance`.
inline SymbolProfile symbol_density_profile(const TorusSymbol& sym, const std::vector<double>& grid,
                                            const TorusCountOptions& opt = {}, double tolerance = infinity) {
    const auto fine = torus_counting(sym, grid, opt);
    TorusCountOptions coarse_opt = opt;
    coarse_opt.resolution = std::max(1, opt.resolution / 2);
    coarse_opt.refine = 2.0 * opt.refine;
    const auto coarse = torus_counting(sym, grid, coarse_opt);
    double err = 0.0;
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        err = std::max(err, std::abs(fine[i] - coarse[i]));
        samples.push_back({grid[i], fine[i]});
    }
    if (err > tolerance)
        throw std::runtime_error("symbol density profile: grid too coarse (estimated error " + std::to_string(err) +
                                 " > " + std::to_string(tolerance) + ")");
    return {MonotoneProfile::tabulated(samples), err, opt.resolution};
}

// ---------------------------------------------------------------------------------
// Euclidean space

/// log of C_n = (2pi)^{-n} vol(B_n).
inline double log_rn_constant(int n) {
    if (n < 1)
        throw std::invalid_argument("dimension must be at least 1");
    const double half = n / 2.0;
    return -n * std::log(2.0 * M_PI) + half * std::log(M_PI) - std::lgamma(half + 1.0);
}

/// F(lambda) = C_n lambda^{n/2} for the Laplacian on R^n.
inline MonotoneProfile rn_laplacian_profile(int n) {
    return MonotoneProfile::power(std::exp(log_rn_constant(n)), n / 2.0);
}

/// D_n = (1/pi) (n vol(B_n) / (n - 2))^{1/n}.
inline double sobolev_constant_rn(int n) {
    if (n < 3)
        throw std::invalid_argument("sobolev_constant_rn: needs n >= 3");
    const double half = n / 2.0;
    const double log_vol = half * std::log(M_PI) - std::lgamma(half + 1.0);
    return std::exp((std::log(static_cast<double>(n)) + log_vol - std::log(n - 2.0)) / n) / M_PI;
}

/// E_n = 4^{1 + 2/n} C_n^{2/n}.
inline double moser_constant_rn(int n) {
    const double two_n = 2.0 / n;
    return std::exp((1.0 + two_n) * std::log(4.0) + two_n * log_rn_constant(n));
}

// ---------------------------------------------------------------------------------
// Exponent fitting

struct ExponentFit {
    double exponent = 0.0;
    double intercept = 0.0; ///< log C
    double residual = 0.0;  ///< max |log F - fit|
    double lo = 0.0;
    double hi = 0.0;
};

/// Least-squares fit of log F against log lambda on `samples` log-uniform points of the
/// window.
inline ExponentFit ns_exponent_fit(const MonotoneProfile& f, double lo, double hi, int samples = 32) {
    if (!(lo > 0.0) || !(hi > lo) || samples < 2)
        throw std::invalid_argument("ns_exponent_fit: need 0 < lo < hi and at least 2 samples");
    const auto grid = log_grid(lo, hi, samples);
    std::vector<double> x;
    std::vector<double> y;
    for (double lambda : grid) {
        const double v = f(lambda);
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::domain_error("ns_exponent_fit: profile vanishes on the window");
        x.push_back(std::log(lambda));
        y.push_back(std::log(v));
    }
    const double n = static_cast<double>(x.size());
    CompensatedSum sx, sy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx.value() / n;
    const double my = sy.value() / n;
    CompensatedSum sxx, sxy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    ExponentFit fit;
    fit.exponent = sxy.value() / sxx.value();
    fit.intercept = my - fit.exponent * mx;
    for (std::size_t i = 0; i < x.size(); ++i)
        fit.residual = std::max(fit.residual, std::abs(y[i] - (fit.intercept + fit.exponent * x[i])));
    fit.lo = lo;
    fit.hi = hi;
    return fit;
}

} // namespace specdens
