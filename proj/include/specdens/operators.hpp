#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "profiles.hpp"
#include "quadrature.hpp"

namespace specdens {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------------
// Digests

/// FNV-1a 64-bit hash, used to fingerprint operators, states and configs.
class Fnv1a {
public:
    void bytes(const void* data, std::size_t n) noexcept {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    void number(double v) noexcept {
        if (v == 0.0)
            v = 0.0; // fold -0
        bytes(&v, sizeof v);
    }
    void integer(std::int64_t v) noexcept { bytes(&v, sizeof v); }
    void text(const std::string& s) noexcept { bytes(s.data(), s.size()); }
    void matrix(const MatrixXd& m) noexcept {
        integer(m.rows());
        integer(m.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                number(m(i, j));
    }
    std::uint64_t value() const noexcept { return h_; }
    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string s(16, '0');
        std::uint64_t v = h_;
        for (int i = 15; i >= 0; --i) {
            s[static_cast<std::size_t>(i)] = digits[v & 0xf];
            v >>= 4;
        }
        return s;
    }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

// ---------------------------------------------------------------------------------
// Measure space

/// Finite measure space X with weights mu(x) and fibre dimension h. Coordinates are
/// laid out point-major: index x*h + a.
struct MeasureSpace {
    std::vector<double> weights;
    int fiber_dim = 1;

    MeasureSpace() = default;
    MeasureSpace(std::vector<double> w, int h) : weights(std::move(w)), fiber_dim(h) { validate(); }

    static MeasureSpace counting(std::size_t n, int h = 1) { return MeasureSpace(std::vector<double>(n, 1.0), h); }

    void validate() const {
        if (weights.empty())
            throw std::invalid_argument("measure space: no points");
        if (fiber_dim < 1)
            throw std::invalid_argument("measure space: fibre dimension must be positive");
        for (double w : weights)
            if (!(w > 0.0) || !std::isfinite(w))
                throw std::invalid_argument("measure space: weights must be finite and positive");
    }

    std::size_t points() const noexcept { return weights.size(); }
    Eigen::Index dimension() const noexcept { return static_cast<Eigen::Index>(weights.size()) * fiber_dim; }

    /// Weight of every coordinate (mu repeated h times).
    VectorXd coordinate_weights() const {
        VectorXd w(dimension());
        for (std::size_t x = 0; x < points(); ++x)
            for (int a = 0; a < fiber_dim; ++a)
                w(static_cast<Eigen::Index>(x) * fiber_dim + a) = weights[x];
        return w;
    }

    double measure(const std::vector<int>& omega) const {
        double m = 0.0;
        for (int x : omega)
            m += weights.at(static_cast<std::size_t>(x));
        return m;
    }
    double total_measure() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

    bool operator==(const MeasureSpace& o) const { return weights == o.weights && fiber_dim == o.fiber_dim; }
    bool operator!=(const MeasureSpace& o) const { return !(*this == o); }
};

inline void check_region(const MeasureSpace& space, const std::vector<int>& omega) {
    if (omega.empty())
        throw std::invalid_argument("region is empty");
    std::vector<bool> seen(space.points(), false);
    for (int x : omega) {
        if (x < 0 || static_cast<std::size_t>(x) >= space.points())
            throw std::invalid_argument("region point " + std::to_string(x) + " out of range");
        if (seen[static_cast<std::size_t>(x)])
            throw std::invalid_argument("region point " + std::to_string(x) + " repeated");
        seen[static_cast<std::size_t>(x)] = true;
    }
}

inline void check_partition(const MeasureSpace& space, const std::vector<std::vector<int>>& parts) {
    std::vector<int> owner(space.points(), -1);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].empty())
            throw std::invalid_argument("partition part " + std::to_string(i) + " is empty");
        for (int x : parts[i]) {
            if (x < 0 || static_cast<std::size_t>(x) >= space.points())
                throw std::invalid_argument("partition point " + std::to_string(x) + " out of range");
            if (owner[static_cast<std::size_t>(x)] >= 0)
                throw std::invalid_argument("partition parts overlap at point " + std::to_string(x));
            owner[static_cast<std::size_t>(x)] = static_cast<int>(i);
        }
    }
    for (std::size_t x = 0; x < owner.size(); ++x)
        if (owner[x] < 0)
            throw std::invalid_argument("partition does not cover point " + std::to_string(x));
}

/// Coordinate indices of the points in omega.
inline std::vector<Eigen::Index> region_indices(const MeasureSpace& space, const std::vector<int>& omega) {
    std::vector<Eigen::Index> idx;
    for (int x : omega)
        for (int a = 0; a < space.fiber_dim; ++a)
            idx.push_back(static_cast<Eigen::Index>(x) * space.fiber_dim + a);
    return idx;
}

enum class Interval { half_open, closed };

inline const char* to_string(Interval i) { return i == Interval::half_open ? "half_open" : "closed"; }

inline Interval interval_from_string(const std::string& s) {
    if (s == "half_open" || s == "half-open")
        return Interval::half_open;
    if (s == "closed")
        return Interval::closed;
    throw std::invalid_argument("unknown interval flavor '" + s + "' (expected half_open or closed)");
}

// ---------------------------------------------------------------------------------
// Kernels

/// Integral kernel of an operator: (P f)(x) = sum_y K(x,y) f(y) mu(y).
struct KernelMatrix {
    MeasureSpace space;
    MatrixXd entries;

    auto block(std::size_t x, std::size_t y) const {
        const int h = space.fiber_dim;
        return entries.block(static_cast<Eigen::Index>(x) * h, static_cast<Eigen::Index>(y) * h, h, h);
    }

    /// Converts an operator given in matrix convention (acting on coordinate vectors) by
    /// dividing each column by mu(y).
    static KernelMatrix from_matrix_convention(const MeasureSpace& space, const MatrixXd& m) {
        if (m.rows() != space.dimension() || m.cols() != space.dimension())
            throw std::invalid_argument("kernel: matrix size does not match the measure space");
        KernelMatrix k{space, m};
        const VectorXd w = space.coordinate_weights();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            k.entries.col(j) /= w(j);
        return k;
    }

    MatrixXd matrix_convention() const { return entries * space.coordinate_weights().asDiagonal(); }
};

/// Largest operator norm of a block K(x, y); the L1 -> L-infinity norm of the kernel.
inline double ultra_norm(const KernelMatrix& k) {
    const int h = k.space.fiber_dim;
    const std::size_t n = k.space.points();
    double best = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y) {
            if (h == 1) {
                best = std::max(best, std::abs(k.entries(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y))));
            } else {
                Eigen::JacobiSVD<MatrixXd> svd(k.block(x, y));
                best = std::max(best, svd.singularValues()(0));
            }
        }
    }
    return best;
}

/// Same norm for a positive kernel, where it is attained on the diagonal: max_x of the
/// largest eigenvalue of K(x, x).
inline double ultra_norm_positive(const KernelMatrix& k) {
    const int h = k.space.fiber_dim;
    double best = 0.0;
    for (std::size_t x = 0; x < k.space.points(); ++x) {
        if (h == 1) {
            best = std::max(best, k.entries(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)));
        } else {
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(k.block(x, x), Eigen::EigenvaluesOnly);
            best = std::max(best, es.eigenvalues()(h - 1));
        }
    }
    return best;
}

/// Density function: fibre trace of K(x, x).
inline std::vector<double> density_vector(const KernelMatrix& k, double tol = 1e-10) {
    std::vector<double> d(k.space.points());
    const double scale = std::max(1.0, k.entries.cwiseAbs().maxCoeff());
    for (std::size_t x = 0; x < d.size(); ++x) {
        d[x] = k.block(x, x).trace();
        if (d[x] < -tol * scale)
            throw std::domain_error("density_vector: negative diagonal block, kernel is not positive");
        d[x] = std::max(0.0, d[x]);
    }
    return d;
}

/// nu_P(omega) = sum over omega of D nu_P(x) mu(x).
inline double region_measure(const KernelMatrix& k, const std::vector<int>& omega) {
    check_region(k.space, omega);
    const auto d = density_vector(k);
    CompensatedSum s;
    for (int x : omega)
        s += d[static_cast<std::size_t>(x)] * k.space.weights[static_cast<std::size_t>(x)];
    return s.value();
}

/// tau(P) = sum_x tr K(x, x) mu(x).
inline double kernel_trace(const KernelMatrix& k) {
    CompensatedSum s;
    for (std::size_t x = 0; x < k.space.points(); ++x)
        s += k.block(x, x).trace() * k.space.weights[x];
    return s.value();
}

// ---------------------------------------------------------------------------------
// Spectral operator

/// Positive self-adjoint operator on L2(X, mu) tensor R^h, stored as a full eigensystem.
///
/// The operator is given in matrix convention and must be self-adjoint for the weighted
/// inner product, i.e. W A symmetric with W = diag(mu). Eigenvectors psi_j are
/// W-orthonormal; eigenvalues with |lambda| <= kappa ||A|| are flagged as kernel and set
/// to 0.
class SpectralOperator {
public:
    SpectralOperator() = default;

    const MeasureSpace& space() const noexcept { return space_; }
    const VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
    /// Columns are the W-orthonormal eigenvectors psi_j.
    const MatrixXd& eigenvectors() const noexcept { return psi_; }
    /// Columns u_j = W^{1/2} psi_j, Euclidean orthonormal.
    const MatrixXd& symmetric_eigenvectors() const noexcept { return u_; }
    double kernel_threshold() const noexcept { return kappa_; }
    double norm() const noexcept { return norm_; }
    bool is_kernel(Eigen::Index j) const { return is_kernel_[static_cast<std::size_t>(j)]; }
    Eigen::Index size() const noexcept { return eigenvalues_.size(); }
    Eigen::Index kernel_dimension() const noexcept {
        return static_cast<Eigen::Index>(std::count(is_kernel_.begin(), is_kernel_.end(), true));
    }
    const std::string& digest() const noexcept { return digest_; }

    /// Smallest nonkernel eigenvalue (0 when the operator is all kernel).
    double lambda_min() const noexcept {
        for (Eigen::Index j = 0; j < size(); ++j)
            if (!is_kernel_[static_cast<std::size_t>(j)])
                return eigenvalues_(j);
        return 0.0;
    }
    double lambda_max() const noexcept { return size() ? eigenvalues_(size() - 1) : 0.0; }

    /// Symmetric form S = W^{1/2} A W^{-1/2} rebuilt from the clamped spectrum.
    MatrixXd symmetric_matrix() const { return u_ * eigenvalues_.asDiagonal() * u_.transpose(); }
    /// A in matrix convention rebuilt from the clamped spectrum.
    MatrixXd matrix() const {
        const VectorXd w = space_.coordinate_weights();
        return w.cwiseSqrt().cwiseInverse().asDiagonal() * symmetric_matrix() * w.cwiseSqrt().asDiagonal();
    }

    /// Groups of positive eigenvalues equal up to the tie rule. Each group is a half-open
    /// index range [first, last) into eigenvalues().
    struct Cluster {
        Eigen::Index first;
        Eigen::Index last;
        double position; ///< breakpoint used by step profiles
    };
    const std::vector<Cluster>& clusters() const noexcept { return clusters_; }

    friend SpectralOperator diagonalize(const MatrixXd& a, const MeasureSpace& space, double kappa);

private:
    MeasureSpace space_;
    VectorXd eigenvalues_;
    MatrixXd psi_;
    MatrixXd u_;
    std::vector<bool> is_kernel_;
    std::vector<Cluster> clusters_;
    double kappa_ = 1e-10;
    double norm_ = 0.0;
    std::string digest_;
};

/// Full eigendecomposition of an operator given in matrix convention.
inline SpectralOperator diagonalize(const MatrixXd& a, const MeasureSpace& space, double kappa = 1e-10) {
    space.validate();
    const Eigen::Index n = space.dimension();
    if (a.rows() != n || a.cols() != n)
        throw std::invalid_argument("diagonalize: matrix is " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + ", space has dimension " + std::to_string(n));
    if (!a.allFinite())
        throw std::invalid_argument("diagonalize: matrix has non-finite entries");
    if (!(kappa >= 0.0))
        throw std::invalid_argument("diagonalize: kernel threshold must be nonnegative");

    const VectorXd w = space.coordinate_weights();
    const VectorXd sw = w.cwiseSqrt();
    const MatrixXd form = w.asDiagonal() * a;
    const double form_scale = std::max(1.0, form.cwiseAbs().maxCoeff());
    if ((form - form.transpose()).cwiseAbs().maxCoeff() > 1e-10 * form_scale)
        throw std::invalid_argument("diagonalize: operator is not self-adjoint for the weighted inner product");

    MatrixXd s = sw.asDiagonal() * a * sw.cwiseInverse().asDiagonal();
    s = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("diagonalize: eigensolver failed");

    SpectralOperator op;
    op.space_ = space;
    op.kappa_ = kappa;
    op.eigenvalues_ = es.eigenvalues();
    op.u_ = es.eigenvectors();
    op.norm_ = n ? std::max(std::abs(op.eigenvalues_(0)), std::abs(op.eigenvalues_(n - 1))) : 0.0;
    const double threshold = kappa * op.norm_;
    op.is_kernel_.assign(static_cast<std::size_t>(n), false);
    for (Eigen::Index j = 0; j < n; ++j) {
        double& lam = op.eigenvalues_(j);
        if (std::abs(lam) <= threshold) {
            lam = 0.0;
            op.is_kernel_[static_cast<std::size_t>(j)] = true;
        } else if (lam < 0.0) {
            throw std::domain_error("diagonalize: operator has a negative eigenvalue " + std::to_string(lam));
        }
        // Sign convention: the first clearly nonzero component is positive.
        auto col = op.u_.col(j);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(col(i)) > 1e-12) {
                if (col(i) < 0.0)
                    col *= -1.0;
                break;
            }
        }
    }
    op.psi_ = sw.cwiseInverse().asDiagonal() * op.u_;

    for (Eigen::Index j = 0; j < n;) {
        if (op.is_kernel_[static_cast<std::size_t>(j)]) {
            ++j;
            continue;
        }
        Eigen::Index k = j + 1;
        while (k < n && within_threshold(op.eigenvalues_(k), op.eigenvalues_(j)))
            ++k;
        op.clusters_.push_back({j, k, op.eigenvalues_(j)});
        j = k;
    }

    Fnv1a h;
    h.integer(space.fiber_dim);
    for (double x : space.weights)
        h.number(x);
    h.matrix(a);
    op.digest_ = h.hex();
    return op;
}

/// Operator defined by a symmetric quadratic form Q = W A.
inline SpectralOperator from_quadratic_form(const MatrixXd& q, const MeasureSpace& space, double kappa = 1e-10) {
    const VectorXd w = space.coordinate_weights();
    return diagonalize(w.cwiseInverse().asDiagonal() * q, space, kappa);
}

/// Indices j selected by the spectral interval ]0, lambda] or [0, lambda].
inline std::vector<Eigen::Index> spectral_selection(const SpectralOperator& op, Interval interval, double lambda) {
    std::vector<Eigen::Index> sel;
    for (Eigen::Index j = 0; j < op.size(); ++j) {
        if (op.is_kernel(j)) {
            if (interval == Interval::closed)
                sel.push_back(j);
            continue;
        }
        if (within_threshold(op.eigenvalues()(j), lambda))
            sel.push_back(j);
    }
    return sel;
}

/// Kernel of the spectral projector onto ]0, lambda] (or [0, lambda]).
inline KernelMatrix projector(const SpectralOperator& op, Interval interval, double lambda) {
    if (!(lambda >= 0.0))
        throw std::invalid_argument("projector: lambda must be nonnegative");
    const auto sel = spectral_selection(op, interval, lambda);
    MatrixXd psi(op.size(), static_cast<Eigen::Index>(sel.size()));
    for (std::size_t i = 0; i < sel.size(); ++i)
        psi.col(static_cast<Eigen::Index>(i)) = op.eigenvectors().col(sel[i]);
    return {op.space(), psi * psi.transpose()};
}

/// Kernel of exp(-tA), optionally restricted to (ker A)^perp.
inline KernelMatrix heat(const SpectralOperator& op, double t, bool exclude_kernel) {
    if (!(t >= 0.0))
        throw std::invalid_argument("heat: t must be nonnegative");
    VectorXd f(op.size());
    for (Eigen::Index j = 0; j < op.size(); ++j)
        f(j) = (exclude_kernel && op.is_kernel(j)) ? 0.0 : std::exp(-t * op.eigenvalues()(j));
    return {op.space(), op.eigenvectors() * f.asDiagonal() * op.eigenvectors().transpose()};
}

/// Kernel of the function g(A), with g applied to every eigenvalue.
inline KernelMatrix spectral_function(const SpectralOperator& op, const std::function<double(double, bool)>& g) {
    VectorXd f(op.size());
    for (Eigen::Index j = 0; j < op.size(); ++j)
        f(j) = g(op.eigenvalues()(j), op.is_kernel(j));
    return {op.space(), op.eigenvectors() * f.asDiagonal() * op.eigenvectors().transpose()};
}

// ---------------------------------------------------------------------------------
// States

/// Pointwise fibre norms squared, ||f(x)||_H^2.
inline std::vector<double> pointwise_norms2(const MeasureSpace& space, const VectorXd& f) {
    if (f.size() != space.dimension())
        throw std::invalid_argument("state has dimension " + std::to_string(f.size()) + ", space has " +
                                    std::to_string(space.dimension()));
    std::vector<double> out(space.points());
    const int h = space.fiber_dim;
    for (std::size_t x = 0; x < out.size(); ++x)
        out[x] = f.segment(static_cast<Eigen::Index>(x) * h, h).squaredNorm();
    return out;
}

inline double l2_norm2(const MeasureSpace& space, const VectorXd& f) {
    const auto n = pointwise_norms2(space, f);
    CompensatedSum s;
    for (std::size_t x = 0; x < n.size(); ++x)
        s += n[x] * space.weights[x];
    return s.value();
}

inline double l1_norm(const MeasureSpace& space, const VectorXd& f) {
    const auto n = pointwise_norms2(space, f);
    CompensatedSum s;
    for (std::size_t x = 0; x < n.size(); ++x)
        s += std::sqrt(n[x]) * space.weights[x];
    return s.value();
}

inline double lp_norm(const MeasureSpace& space, const VectorXd& f, double p) {
    const auto n = pointwise_norms2(space, f);
    CompensatedSum s;
    for (std::size_t x = 0; x < n.size(); ++x)
        s += std::pow(n[x], p / 2.0) * space.weights[x];
    return std::pow(s.value(), 1.0 / p);
}

/// Coefficients <psi_j, f> in the weighted inner product.
inline VectorXd spectral_coefficients(const SpectralOperator& op, const VectorXd& f) {
    if (f.size() != op.size())
        throw std::invalid_argument("state dimension does not match the operator");
    return op.eigenvectors().transpose() * (op.space().coordinate_weights().asDiagonal() * f);
}

/// E(f) = <A f, f> = sum_j lambda_j <psi_j, f>^2.
inline double energy(const SpectralOperator& op, const VectorXd& f) {
    const VectorXd c = spectral_coefficients(op, f);
    CompensatedSum s;
    for (Eigen::Index j = 0; j < op.size(); ++j)
        s += op.eigenvalues()(j) * c(j) * c(j);
    return s.value();
}

struct Projected {
    VectorXd state;
    double residual; ///< relative L2 size of the removed kernel component
};

/// Removes the kernel component of f.
inline Projected project_to_range(const SpectralOperator& op, const VectorXd& f) {
    const VectorXd c = spectral_coefficients(op, f);
    VectorXd removed = VectorXd::Zero(f.size());
    for (Eigen::Index j = 0; j < op.size(); ++j)
        if (op.is_kernel(j))
            removed += c(j) * op.eigenvectors().col(j);
    const double n0 = std::sqrt(l2_norm2(op.space(), f));
    const double nr = std::sqrt(l2_norm2(op.space(), removed));
    return {f - removed, n0 > 0.0 ? nr / n0 : 0.0};
}

/// Positive operator rho on the weighted space, stored in symmetric form
/// R = W^{1/2} rho W^{-1/2} (an ordinary PSD matrix).
class DensityState {
public:
    DensityState() = default;

    static DensityState from_symmetric(const MeasureSpace& space, const MatrixXd& r) {
        if (r.rows() != space.dimension() || r.cols() != space.dimension())
            throw std::invalid_argument("density state: matrix size does not match the space");
        if (!r.allFinite())
            throw std::invalid_argument("density state: non-finite entries");
        const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
        if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw std::invalid_argument("density state: not self-adjoint");
        DensityState s;
        s.space_ = space;
        s.r_ = 0.5 * (r + r.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(s.r_, Eigen::EigenvaluesOnly);
        const double top = es.eigenvalues().size() ? es.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
        if (es.eigenvalues().size() && es.eigenvalues()(0) < -1e-12 * std::max(top, 1e-300) && es.eigenvalues()(0) < -1e-14)
            throw std::domain_error("density state: not positive semidefinite");
        return s;
    }

    /// From a kernel in kernel convention.
    static DensityState from_kernel(const KernelMatrix& k) {
        const VectorXd sw = k.space.coordinate_weights().cwiseSqrt();
        return from_symmetric(k.space, sw.asDiagonal() * k.entries * sw.asDiagonal());
    }

    /// rho = sum_i p_i |f_i><f_i| (weighted inner product).
    static DensityState from_states(const MeasureSpace& space, const std::vector<VectorXd>& states,
                                    const std::vector<double>& probabilities = {}) {
        if (!probabilities.empty() && probabilities.size() != states.size())
            throw std::invalid_argument("density state: one probability per state");
        const VectorXd sw = space.coordinate_weights().cwiseSqrt();
        MatrixXd r = MatrixXd::Zero(space.dimension(), space.dimension());
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (states[i].size() != space.dimension())
                throw std::invalid_argument("density state: state dimension mismatch");
            const double p = probabilities.empty() ? 1.0 : probabilities[i];
            if (!(p >= 0.0))
                throw std::invalid_argument("density state: probabilities must be nonnegative");
            const VectorXd v = sw.asDiagonal() * states[i];
            r += p * v * v.transpose();
        }
        return from_symmetric(space, r);
    }

    const MeasureSpace& space() const noexcept { return space_; }
    const MatrixXd& symmetric() const noexcept { return r_; }

    KernelMatrix kernel() const {
        const VectorXd isw = space_.coordinate_weights().cwiseSqrt().cwiseInverse();
        return {space_, isw.asDiagonal() * r_ * isw.asDiagonal()};
    }

    double trace() const { return r_.trace(); }

    /// ||rho||_{2,2}
    double operator_norm() const {
        if (r_.size() == 0)
            return 0.0;
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(r_, Eigen::EigenvaluesOnly);
        return std::max(0.0, es.eigenvalues()(es.eigenvalues().size() - 1));
    }

    /// D nu_rho(x): sum_a R(xa, xa) / mu(x).
    std::vector<double> density() const {
        std::vector<double> d(space_.points());
        const int h = space_.fiber_dim;
        for (std::size_t x = 0; x < d.size(); ++x) {
            double s = 0.0;
            for (int a = 0; a < h; ++a) {
                const auto i = static_cast<Eigen::Index>(x) * h + a;
                s += r_(i, i);
            }
            d[x] = std::max(0.0, s / space_.weights[x]);
        }
        return d;
    }

    double region_measure(const std::vector<int>& omega) const {
        const auto d = density();
        CompensatedSum s;
        for (int x : omega)
            s += d.at(static_cast<std::size_t>(x)) * space_.weights[static_cast<std::size_t>(x)];
        return s.value();
    }

    /// Size of the part of rho living outside omega, relative to ||rho||.
    double support_residual(const std::vector<int>& omega) const {
        std::vector<bool> inside(static_cast<std::size_t>(space_.dimension()), false);
        for (auto i : region_indices(space_, omega))
            inside[static_cast<std::size_t>(i)] = true;
        double outside = 0.0;
        for (Eigen::Index i = 0; i < r_.rows(); ++i)
            for (Eigen::Index j = 0; j < r_.cols(); ++j)
                if (!inside[static_cast<std::size_t>(i)] || !inside[static_cast<std::size_t>(j)])
                    outside = std::max(outside, std::abs(r_(i, j)));
        const double scale = r_.cwiseAbs().maxCoeff();
        return scale > 0.0 ? outside / scale : 0.0;
    }

    std::string digest() const {
        Fnv1a h;
        h.matrix(r_);
        return h.hex();
    }

    DensityState scaled(double c) const {
        DensityState s = *this;
        s.r_ *= c;
        return s;
    }

private:
    MeasureSpace space_;
    MatrixXd r_;
};

inline void check_same_space(const SpectralOperator& op, const DensityState& rho) {
    if (op.space() != rho.space())
        throw std::invalid_argument("state and operator live on different spaces");
}

/// E(rho) = tau(rho^{1/2} A rho^{1/2}) = sum_j lambda_j <psi_j, rho psi_j>.
inline double rho_energy(const SpectralOperator& op, const DensityState& rho) {
    check_same_space(op, rho);
    const MatrixXd& u = op.symmetric_eigenvectors();
    CompensatedSum s;
    for (Eigen::Index j = 0; j < op.size(); ++j) {
        const double lam = op.eigenvalues()(j);
        if (lam == 0.0)
            continue;
        s += lam * u.col(j).dot(rho.symmetric() * u.col(j));
    }
    return std::max(0.0, s.value());
}

/// <A>_rho = E(rho) / tau(rho).
inline double rho_expectation(const SpectralOperator& op, const DensityState& rho) {
    const double t = rho.trace();
    if (!(t > 0.0))
        throw std::domain_error("rho_expectation: state has zero trace");
    return rho_energy(op, rho) / t;
}

/// Symmetric PSD square root.
inline MatrixXd psd_sqrt(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
    const VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// ||rho^{1/2} A rho^{1/2}||_{2,2}.
inline double sandwich_norm(const SpectralOperator& op, const DensityState& rho) {
    check_same_space(op, rho);
    const MatrixXd root = psd_sqrt(rho.symmetric());
    MatrixXd m = root * op.symmetric_matrix() * root;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues()(es.eigenvalues().size() - 1));
}

struct ProjectedState {
    DensityState state;
    double residual; ///< relative Frobenius size of the removed part
};

/// Compresses rho to (ker A)^perp.
inline ProjectedState project_to_range(const SpectralOperator& op, const DensityState& rho) {
    check_same_space(op, rho);
    MatrixXd p = MatrixXd::Identity(op.size(), op.size());
    for (Eigen::Index j = 0; j < op.size(); ++j)
        if (op.is_kernel(j))
            p -= op.symmetric_eigenvectors().col(j) * op.symmetric_eigenvectors().col(j).transpose();
    const MatrixXd r = p * rho.symmetric() * p;
    const double n0 = rho.symmetric().norm();
    const double res = n0 > 0.0 ? (rho.symmetric() - r).norm() / n0 : 0.0;
    return {DensityState::from_symmetric(op.space(), 0.5 * (r + r.transpose())), res};
}

/// Size of the kernel component of rho relative to rho.
inline double kernel_residual(const SpectralOperator& op, const DensityState& rho) {
    return project_to_range(op, rho).residual;
}

// ---------------------------------------------------------------------------------
// Decay profiles

/// Which norm of the spectral projector (or heat operator) a profile records.
struct ProfileFlavor {
    enum class Kind { ultra, density, pointwise, region };
    Kind kind = Kind::ultra;
    int point = -1;
    std::vector<int> region;

    static ProfileFlavor ultra() { return {Kind::ultra, -1, {}}; }
    static ProfileFlavor density() { return {Kind::density, -1, {}}; }
    static ProfileFlavor pointwise(int x) { return {Kind::pointwise, x, {}}; }
    static ProfileFlavor over(std::vector<int> omega) { return {Kind::region, -1, std::move(omega)}; }

    std::string name() const {
        switch (kind) {
        case Kind::ultra: return "ultra";
        case Kind::density: return "density";
        case Kind::pointwise: return "pointwise:" + std::to_string(point);
        case Kind::region: {
            std::string s = "region:";
            for (std::size_t i = 0; i < region.size(); ++i)
                s += (i ? "," : "") + std::to_string(region[i]);
            return s;
        }
        }
        return "";
    }
};

namespace detail {

/// Accumulates diagonal blocks sum_j c_j psi_j(x) psi_j(x)^T mode by mode.
class DiagonalAccumulator {
public:
    explicit DiagonalAccumulator(const SpectralOperator& op)
        : op_(op), h_(op.space().fiber_dim), blocks_(op.space().points(), MatrixXd::Zero(h_, h_)) {}

    void add(Eigen::Index j, double c = 1.0) {
        const auto& psi = op_.eigenvectors();
        for (std::size_t x = 0; x < blocks_.size(); ++x) {
            const auto seg = psi.col(j).segment(static_cast<Eigen::Index>(x) * h_, h_);
            blocks_[x].noalias() += c * seg * seg.transpose();
        }
    }

    double trace(std::size_t x) const { return std::max(0.0, blocks_[x].trace()); }

    double top(std::size_t x) const {
        if (h_ == 1)
            return std::max(0.0, blocks_[x](0, 0));
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(blocks_[x], Eigen::EigenvaluesOnly);
        return std::max(0.0, es.eigenvalues()(h_ - 1));
    }

    double value(const ProfileFlavor& flavor) const {
        const auto& w = op_.space().weights;
        switch (flavor.kind) {
        case ProfileFlavor::Kind::ultra: {
            double m = 0.0;
            for (std::size_t x = 0; x < blocks_.size(); ++x)
                m = std::max(m, top(x));
            return m;
        }
        case ProfileFlavor::Kind::density: {
            double m = 0.0;
            for (std::size_t x = 0; x < blocks_.size(); ++x)
                m = std::max(m, trace(x));
            return m;
        }
        case ProfileFlavor::Kind::pointwise:
            return trace(static_cast<std::size_t>(flavor.point));
        case ProfileFlavor::Kind::region: {
            CompensatedSum s;
            for (int x : flavor.region)
                s += trace(static_cast<std::size_t>(x)) * w[static_cast<std::size_t>(x)];
            return s.value();
        }
        }
        return 0.0;
    }

    std::vector<double> traces() const {
        std::vector<double> d(blocks_.size());
        for (std::size_t x = 0; x < d.size(); ++x)
            d[x] = trace(x);
        return d;
    }

private:
    const SpectralOperator& op_;
    int h_;
    std::vector<MatrixXd> blocks_;
};

inline void check_flavor(const SpectralOperator& op, const ProfileFlavor& flavor) {
    if (flavor.kind == ProfileFlavor::Kind::pointwise &&
        (flavor.point < 0 || static_cast<std::size_t>(flavor.point) >= op.space().points()))
        throw std::invalid_argument("pointwise flavor: point out of range");
    if (flavor.kind == ProfileFlavor::Kind::region)
        check_region(op.space(), flavor.region);
}

} // namespace detail

/// Step profile lambda -> (flavor norm of the spectral projector on ]0, lambda] or [0, lambda]),
/// with breakpoints at the distinct positive eigenvalues.
inline MonotoneProfile decay_profile(const SpectralOperator& op, const ProfileFlavor& flavor, Interval interval) {
    detail::check_flavor(op, flavor);
    detail::DiagonalAccumulator acc(op);
    if (interval == Interval::closed)
        for (Eigen::Index j = 0; j < op.size(); ++j)
            if (op.is_kernel(j))
                acc.add(j);
    const double v0 = acc.value(flavor);
    std::vector<Sample> samples;
    for (const auto& c : op.clusters()) {
        for (Eigen::Index j = c.first; j < c.last; ++j)
            acc.add(j);
        samples.push_back({c.position, acc.value(flavor)});
    }
    return MonotoneProfile::step_cumulative(samples, v0);
}

/// Pointwise profiles F_x for every point, in one pass.
inline std::vector<MonotoneProfile> pointwise_profiles(const SpectralOperator& op, Interval interval) {
    detail::DiagonalAccumulator acc(op);
    if (interval == Interval::closed)
        for (Eigen::Index j = 0; j < op.size(); ++j)
            if (op.is_kernel(j))
                acc.add(j);
    const std::size_t n = op.space().points();
    const auto base = acc.traces();
    std::vector<std::vector<Sample>> samples(n);
    for (const auto& c : op.clusters()) {
        for (Eigen::Index j = c.first; j < c.last; ++j)
            acc.add(j);
        const auto t = acc.traces();
        for (std::size_t x = 0; x < n; ++x)
            samples[x].push_back({c.position, t[x]});
    }
    std::vector<MonotoneProfile> out;
    out.reserve(n);
    for (std::size_t x = 0; x < n; ++x)
        out.push_back(MonotoneProfile::step_cumulative(samples[x], base[x]));
    return out;
}

/// Density vectors of every spectral projector, one per cluster (plus the kernel first).
/// Used to detect operators whose projectors all have constant density.
inline bool has_constant_densities(const SpectralOperator& op, double tol = 1e-10) {
    detail::DiagonalAccumulator acc(op);
    auto constant = [&](const std::vector<double>& d) {
        const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
        return *hi - *lo <= tol * std::max(1.0, *hi);
    };
    for (Eigen::Index j = 0; j < op.size(); ++j)
        if (op.is_kernel(j))
            acc.add(j);
    if (!constant(acc.traces()))
        return false;
    for (const auto& c : op.clusters()) {
        detail::DiagonalAccumulator single(op);
        for (Eigen::Index j = c.first; j < c.last; ++j)
            single.add(j);
        if (!constant(single.traces()))
            return false;
    }
    return true;
}

/// Exact heat decay function t -> flavor norm of exp(-tA) (on (ker A)^perp when
/// exclude_kernel). The returned closure keeps its own copy of the spectral data.
inline std::function<double(double)> heat_function(const SpectralOperator& op, const ProfileFlavor& flavor,
                                                   bool exclude_kernel = true) {
    detail::check_flavor(op, flavor);
    std::vector<Eigen::Index> modes;
    for (Eigen::Index j = 0; j < op.size(); ++j)
        if (!(exclude_kernel && op.is_kernel(j)))
            modes.push_back(j);
    const int h = op.space().fiber_dim;
    const std::size_t n = op.space().points();
    const auto m = static_cast<Eigen::Index>(modes.size());
    VectorXd lambda(m);
    MatrixXd psi(op.size(), m);
    for (Eigen::Index i = 0; i < m; ++i) {
        lambda(i) = op.eigenvalues()(modes[static_cast<std::size_t>(i)]);
        psi.col(i) = op.eigenvectors().col(modes[static_cast<std::size_t>(i)]);
    }
    // Squared entries give every fibre trace at once: traces = sq * exp(-t lambda).
    MatrixXd sq = MatrixXd::Zero(static_cast<Eigen::Index>(n), m);
    for (std::size_t x = 0; x < n; ++x)
        for (int a = 0; a < h; ++a)
            sq.row(static_cast<Eigen::Index>(x)) += psi.row(static_cast<Eigen::Index>(x) * h + a).cwiseAbs2();
    std::vector<double> w = op.space().weights;

    return [=](double t) -> double {
        const VectorXd e = (-t * lambda.array()).exp().matrix();
        if (flavor.kind == ProfileFlavor::Kind::ultra && h > 1) {
            double best = 0.0;
            for (std::size_t x = 0; x < n; ++x) {
                const auto px = psi.middleRows(static_cast<Eigen::Index>(x) * h, h);
                const MatrixXd block = px * e.asDiagonal() * px.transpose();
                Eigen::SelfAdjointEigenSolver<MatrixXd> es(block, Eigen::EigenvaluesOnly);
                best = std::max(best, es.eigenvalues()(h - 1));
            }
            return std::max(0.0, best);
        }
        const VectorXd traces = sq * e;
        switch (flavor.kind) {
        case ProfileFlavor::Kind::ultra:
        case ProfileFlavor::Kind::density:
            return n ? std::max(0.0, traces.maxCoeff()) : 0.0;
        case ProfileFlavor::Kind::pointwise:
            return traces(flavor.point);
        case ProfileFlavor::Kind::region: {
            CompensatedSum s;
            for (int x : flavor.region)
                s += traces(x) * w[static_cast<std::size_t>(x)];
            return s.value();
        }
        }
        return 0.0;
    };
}

/// Time grid used to tabulate max-type heat profiles: 0 followed by a geometric grid over
/// [1e-3 / lambda_max, 10 / lambda_min].
inline std::vector<double> heat_time_grid(const SpectralOperator& op, int per_decade = 64) {
    const double lmin = op.lambda_min();
    const double lmax = op.lambda_max();
    std::vector<double> g{0.0};
    if (!(lmin > 0.0))
        return g;
    const double lo = 1e-3 / lmax;
    const double hi = 10.0 / lmin;
    for (double t : decade_grid(lo, std::max(hi, lo * 10.0), per_decade))
        g.push_back(t);
    return g;
}

/// L(t): the flavor norm of exp(-tA) on (ker A)^perp (or the full exp(-tA)).
///
/// Pointwise and region flavors are exact sums of exponentials. Ultra and density
/// flavors take a maximum over points, so they are tabulated exactly on heat_time_grid
/// with tail rate lambda_min.
inline DecayProfile heat_decay(const SpectralOperator& op, const ProfileFlavor& flavor, bool exclude_kernel = true,
                               int per_decade = 64) {
    detail::check_flavor(op, flavor);
    const auto& psi = op.eigenvectors();
    const int h = op.space().fiber_dim;
    if (flavor.kind == ProfileFlavor::Kind::pointwise || flavor.kind == ProfileFlavor::Kind::region) {
        std::vector<ExponentialTerm> terms;
        for (Eigen::Index j = 0; j < op.size(); ++j) {
            if (exclude_kernel && op.is_kernel(j))
                continue;
            double c = 0.0;
            if (flavor.kind == ProfileFlavor::Kind::pointwise) {
                c = psi.col(j).segment(static_cast<Eigen::Index>(flavor.point) * h, h).squaredNorm();
            } else {
                for (int x : flavor.region)
                    c += psi.col(j).segment(static_cast<Eigen::Index>(x) * h, h).squaredNorm() *
                         op.space().weights[static_cast<std::size_t>(x)];
            }
            terms.push_back({c, op.eigenvalues()(j)});
        }
        return DecayProfile::exponential_sum(terms);
    }
    if (!(op.lambda_min() > 0.0)) {
        if (!exclude_kernel && op.kernel_dimension() > 0)
            throw std::domain_error("heat_decay: kernel part does not decay");
        return DecayProfile::exponential_sum({});
    }
    if (!exclude_kernel && op.kernel_dimension() > 0)
        throw std::domain_error("heat_decay: max-type profile with kernel part does not decay");
    const auto fn = heat_function(op, flavor, exclude_kernel);
    std::vector<Sample> samples;
    double prev = infinity;
    for (double t : heat_time_grid(op, per_decade)) {
        const double v = std::min(prev, fn(t));
        samples.push_back({t, v});
        prev = v;
    }
    return DecayProfile::tabulated(samples, op.lambda_min());
}

/// M(t) = integral of L over [t, inf) for the heat decay profile of the given flavor.
/// Max-type flavors integrate the exact L (not its tabulation) on `grid`, which defaults to
/// heat_time_grid.
inline DecayProfile heat_decay_integral(const SpectralOperator& op, const ProfileFlavor& flavor,
                                        std::vector<double> grid = {}, double rel_tol = 1e-12) {
    detail::check_flavor(op, flavor);
    if (flavor.kind == ProfileFlavor::Kind::pointwise || flavor.kind == ProfileFlavor::Kind::region)
        return m_transform(heat_decay(op, flavor, true));
    if (!(op.lambda_min() > 0.0))
        return DecayProfile::exponential_sum({});
    if (grid.empty())
        grid = heat_time_grid(op);
    return integrate_decay(heat_function(op, flavor, true), grid, op.lambda_min(), rel_tol);
}

// ---------------------------------------------------------------------------------
// Dirichlet counting

/// Orthonormal basis (columns) of the coordinate vectors supported on omega, in symmetric
/// coordinates; with exclude_kernel, also orthogonal to ker A.
inline MatrixXd dirichlet_basis(const SpectralOperator& op, const std::vector<int>& omega, bool exclude_kernel) {
    check_region(op.space(), omega);
    const auto idx = region_indices(op.space(), omega);
    const auto m = static_cast<Eigen::Index>(idx.size());
    if (!exclude_kernel || op.kernel_dimension() == 0)
        return MatrixXd::Identity(m, m);
    MatrixXd c(op.kernel_dimension(), m);
    Eigen::Index r = 0;
    for (Eigen::Index j = 0; j < op.size(); ++j) {
        if (!op.is_kernel(j))
            continue;
        for (Eigen::Index i = 0; i < m; ++i)
            c(r, i) = op.symmetric_eigenvectors()(idx[static_cast<std::size_t>(i)], j);
        ++r;
    }
    Eigen::JacobiSVD<MatrixXd> svd(c, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-10)
            ++rank;
    return svd.matrixV().rightCols(m - rank);
}

/// Eigenvalues of A's quadratic form restricted to states supported in omega, against the
/// weighted mass. With exclude_kernel the states are also required to be orthogonal to ker A.
inline std::vector<double> dirichlet_spectrum(const SpectralOperator& op, const std::vector<int>& omega,
                                              bool exclude_kernel = false) {
    const auto idx = region_indices(op.space(), omega);
    const MatrixXd z = dirichlet_basis(op, omega, exclude_kernel);
    if (z.cols() == 0)
        return {};
    const MatrixXd s = op.symmetric_matrix();
    MatrixXd sub(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < idx.size(); ++j)
            sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s(idx[i], idx[j]);
    MatrixXd q = z.transpose() * sub * z;
    q = 0.5 * (q + q.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(q, Eigen::EigenvaluesOnly);
    std::vector<double> out(static_cast<std::size_t>(es.eigenvalues().size()));
    const double threshold = op.kernel_threshold() * op.norm();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = es.eigenvalues()(static_cast<Eigen::Index>(i));
        out[i] = std::abs(v) <= threshold ? 0.0 : std::max(0.0, v);
    }
    return out;
}

/// Number of Dirichlet eigenvalues of omega in [0, lambda].
inline int dirichlet_counting(const SpectralOperator& op, const std::vector<int>& omega, double lambda,
                              bool exclude_kernel = false) {
    if (!(lambda >= 0.0))
        throw std::invalid_argument("dirichlet_counting: lambda must be nonnegative");
    int count = 0;
    for (double v : dirichlet_spectrum(op, omega, exclude_kernel))
        if (within_threshold(v, lambda))
            ++count;
    return count;
}

/// Dirichlet counting function of omega as a step profile.
inline MonotoneProfile dirichlet_profile(const SpectralOperator& op, const std::vector<int>& omega,
                                         bool exclude_kernel = false) {
    const auto spec = dirichlet_spectrum(op, omega, exclude_kernel);
    double v0 = 0.0;
    std::vector<Sample> samples;
    std::size_t i = 0;
    while (i < spec.size() && spec[i] == 0.0) {
        v0 += 1.0;
        ++i;
    }
    double count = v0;
    while (i < spec.size()) {
        const double first = spec[i];
        while (i < spec.size() && within_threshold(spec[i], first)) {
            count += 1.0;
            ++i;
        }
        samples.push_back({first, count});
    }
    return MonotoneProfile::step_cumulative(samples, v0);
}

} // namespace specdens
