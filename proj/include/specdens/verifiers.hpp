#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "operators.hpp"
#include "profile_io.hpp"
#include "quadrature.hpp"

namespace specdens {

/// Where a report came from: the instance fingerprints and the parameters of the check.
struct Witness {
    std::string operator_digest;
    std::string state_digest;
    std::string interval; ///< "half_open", "closed", or empty when the check has no flavor
    json parameters = json::object();
};

/// Both sides of one inequality lhs <= rhs for one instance.
struct InequalityReport {
    std::string id;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;          ///< rhs - lhs
    double relative_margin = 0.0; ///< margin / max(|lhs|, |rhs|)
    bool pass = false;
    Witness witness;
    double exclusions = 0.0; ///< measure of points whose integrand was +inf and left out
    std::uint64_t seed = 0;
};

struct VerifyOptions {
    double tol = 1e-9; ///< pass iff margin >= -tol * max(1, |rhs|)
    std::uint64_t seed = 0;
    std::string config_digest;
};

/// States closer than this (relative) to the kernel or to a region are treated as exact.
inline constexpr double state_tolerance = 1e-9;

namespace detail {

inline double margin_of(double lhs, double rhs) {
    if (lhs == rhs)
        return 0.0;
    return rhs - lhs;
}

inline double relative_margin_of(double lhs, double rhs, double margin) {
    if (!std::isfinite(lhs) || !std::isfinite(rhs))
        return margin > 0.0 ? 1.0 : (margin < 0.0 ? -1.0 : 0.0);
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    return scale > 0.0 ? margin / scale : 0.0;
}

/// Margin in units of the pass threshold scale, used to pick the worst case of a sweep.
inline double normalized_margin(double lhs, double rhs) {
    const double m = margin_of(lhs, rhs);
    if (std::isnan(m))
        return -infinity;
    return std::isfinite(rhs) ? m / std::max(1.0, std::abs(rhs)) : m;
}

inline InequalityReport make_report(std::string id, double lhs, double rhs, Witness witness, const VerifyOptions& opt,
                                    double exclusions = 0.0) {
    InequalityReport r;
    r.id = std::move(id);
    r.lhs = lhs;
    r.rhs = rhs;
    r.margin = margin_of(lhs, rhs);
    r.relative_margin = relative_margin_of(lhs, rhs, r.margin);
    const double scale = std::isfinite(rhs) ? std::max(1.0, std::abs(rhs)) : infinity;
    r.pass = r.margin >= -opt.tol * scale;
    r.witness = std::move(witness);
    if (!opt.config_digest.empty())
        r.witness.parameters["config_digest"] = opt.config_digest;
    r.exclusions = exclusions;
    r.seed = opt.seed;
    return r;
}

inline std::string vector_digest(const VectorXd& f) {
    Fnv1a h;
    h.matrix(MatrixXd(f));
    return h.hex();
}

inline std::string profile_digest(const MonotoneProfile& p) {
    Fnv1a h;
    h.text(to_json(p).dump());
    return h.hex();
}

/// Keeps the case with the smallest normalized margin over a sweep.
struct WorstCase {
    double lhs = 0.0;
    double rhs = 0.0;
    double score = infinity;
    json at = json::object();
    int cases = 0;

    void offer(double l, double r, json where) {
        ++cases;
        const double s = normalized_margin(l, r);
        if (cases == 1 || s < score) {
            lhs = l;
            rhs = r;
            score = s;
            at = std::move(where);
        }
    }
};

inline InequalityReport worst_report(std::string id, const WorstCase& w, Witness witness, const VerifyOptions& opt) {
    for (auto it = w.at.begin(); it != w.at.end(); ++it)
        witness.parameters[it.key()] = it.value();
    witness.parameters["cases"] = w.cases;
    return make_report(std::move(id), w.lhs, w.rhs, std::move(witness), opt);
}

inline void require_nonzero(const MeasureSpace& space, const VectorXd& f) {
    if (f.size() != space.dimension())
        throw std::invalid_argument("state dimension does not match the operator");
    if (!f.allFinite())
        throw std::invalid_argument("state has non-finite entries");
    if (!(l2_norm2(space, f) > 0.0))
        throw std::invalid_argument("state must be nonzero");
}

inline void require_nonzero(const DensityState& rho) {
    if (!(rho.trace() > 0.0))
        throw std::invalid_argument("density state must be nonzero");
}

/// Removes the kernel part of f; fails when nothing is left.
inline Projected kernel_free(const SpectralOperator& op, const VectorXd& f) {
    require_nonzero(op.space(), f);
    auto p = project_to_range(op, f);
    if (p.residual >= 1.0 - 1e-12 || !(l2_norm2(op.space(), p.state) > 0.0))
        throw std::domain_error("state lies in ker A");
    return p;
}

inline ProjectedState kernel_free(const SpectralOperator& op, const DensityState& rho) {
    check_same_space(op, rho);
    require_nonzero(rho);
    auto p = project_to_range(op, rho);
    if (!(p.state.trace() > 1e-12 * rho.trace()))
        throw std::domain_error("density state lies in ker A");
    return p;
}

inline void require_kernel_free(const SpectralOperator& op, const VectorXd& f) {
    if (project_to_range(op, f).residual > state_tolerance)
        throw std::domain_error("state has a kernel component; the half_open flavor needs f orthogonal to ker A");
}

inline void require_kernel_free(const SpectralOperator& op, const DensityState& rho) {
    if (kernel_residual(op, rho) > state_tolerance)
        throw std::domain_error("density state has a kernel component; the half_open flavor needs rho = 0 on ker A");
}

inline void require_support(const MeasureSpace& space, const VectorXd& f, const std::vector<int>& omega) {
    check_region(space, omega);
    std::vector<bool> inside(space.points(), false);
    for (int x : omega)
        inside[static_cast<std::size_t>(x)] = true;
    const auto n = pointwise_norms2(space, f);
    const double top = *std::max_element(n.begin(), n.end());
    for (std::size_t x = 0; x < n.size(); ++x)
        if (!inside[x] && n[x] > state_tolerance * state_tolerance * top)
            throw std::invalid_argument("state is not supported in the region (point " + std::to_string(x) + ")");
}

inline void require_support(const DensityState& rho, const std::vector<int>& omega) {
    check_region(rho.space(), omega);
    if (rho.support_residual(omega) > state_tolerance)
        throw std::invalid_argument("density state is not supported in the region");
}

inline Witness witness(const SpectralOperator& op, std::string state, std::optional<Interval> interval = {}) {
    Witness w;
    w.operator_digest = op.digest();
    w.state_digest = std::move(state);
    if (interval)
        w.interval = to_string(*interval);
    return w;
}

inline json region_json(const std::vector<int>& omega) { return json(omega); }

/// Distinct values of a sorted spectrum (clusters under the tie rule).
inline std::vector<double> distinct_levels(const std::vector<double>& spectrum) {
    std::vector<double> out;
    for (double v : spectrum)
        if (out.empty() || !within_threshold(v, out.back()))
            out.push_back(v);
    return out;
}

inline int count_upto(const std::vector<double>& spectrum, double lambda) {
    int c = 0;
    for (double v : spectrum)
        if (within_threshold(v, lambda))
            ++c;
    return c;
}

/// Diagonal masses below 1e-12 of the trace are rounding noise (e.g. at vertices the
/// range of A does not reach) and are set to zero, as is any negative rounding.
inline double clean_mass(double mass, double trace) { return mass > 1e-12 * trace ? mass : 0.0; }

inline std::vector<double> clean_density(const SpectralOperator& op, const DensityState& rho) {
    auto d = rho.density();
    const double tr = rho.trace();
    for (std::size_t x = 0; x < d.size(); ++x)
        if (clean_mass(d[x] * op.space().weights[x], tr) == 0.0)
            d[x] = 0.0;
    return d;
}

} // namespace detail

// ---------------------------------------------------------------------------------
// Pure-state Sobolev inequalities

/// Orlicz-Sobolev inequality with H(y) = y G^{-1}(y), G built from the ultracontractive
/// spectral profile on ]0, lambda]. f is projected to (ker A)^perp first.
inline InequalityReport verify_h_sobolev(const SpectralOperator& op, const VectorXd& f, const VerifyOptions& opt = {}) {
    const auto p = detail::kernel_free(op, f);
    const double e = energy(op, p.state);
    if (!(e > 0.0))
        throw std::domain_error("state has zero energy");
    const auto g = g_transform(decay_profile(op, ProfileFlavor::ultra(), Interval::half_open));
    const auto n2 = pointwise_norms2(op.space(), p.state);
    CompensatedSum lhs;
    for (std::size_t x = 0; x < n2.size(); ++x)
        lhs += weighted(op.space().weights[x], h_of(g, n2[x] / (4.0 * e)));
    auto w = detail::witness(op, detail::vector_digest(f), Interval::half_open);
    w.parameters["projection_residual"] = p.residual;
    return detail::make_report("h-sobolev", lhs.value(), 1.0, std::move(w), opt);
}

/// Heat version: N(y) = y / M^{-1}(y) with M the integrated ultracontractive heat decay.
/// Points where N is +inf are left out and their measure is recorded as exclusions.
inline InequalityReport verify_n_sobolev(const SpectralOperator& op, const VectorXd& f, const VerifyOptions& opt = {}) {
    const auto p = detail::kernel_free(op, f);
    const double e = energy(op, p.state);
    if (!(e > 0.0))
        throw std::domain_error("state has zero energy");
    const auto m = heat_decay_integral(op, ProfileFlavor::ultra());
    const auto n2 = pointwise_norms2(op.space(), p.state);
    CompensatedSum lhs;
    CompensatedSum excluded;
    for (std::size_t x = 0; x < n2.size(); ++x) {
        const double y = n2[x] / (4.0 * e);
        if (y == 0.0)
            continue;
        const double v = n_of(m, y);
        if (v == infinity)
            excluded += op.space().weights[x];
        else
            lhs += v * op.space().weights[x];
    }
    auto w = detail::witness(op, detail::vector_digest(f), Interval::half_open);
    w.parameters["projection_residual"] = p.residual;
    return detail::make_report("n-sobolev", lhs.value(), std::log(2.0), std::move(w), opt, excluded.value());
}

/// Integral of (1 - e^{-u})^2 / u^2 over (0, inf), whose exact value is 2 ln 2.
inline double heat_sobolev_integral(double rel_tol = 1e-13) {
    return integrate_half_line(
        [](double u) {
            const double a = -std::expm1(-u);
            return a * a / (u * u);
        },
        -40.0, 40.0, rel_tol);
}

// ---------------------------------------------------------------------------------
// Mixed-state inequalities

/// Mixed-state Sobolev inequality with G built from the density profile on ]0, lambda].
/// rho is compressed to (ker A)^perp; the removed fraction is reported.
inline InequalityReport verify_rho_sobolev(const SpectralOperator& op, const DensityState& rho,
                                           const VerifyOptions& opt = {}) {
    const auto p = detail::kernel_free(op, rho);
    const double s = sandwich_norm(op, p.state);
    if (!(s > 0.0))
        throw std::domain_error("density state has zero energy");
    const auto g = g_transform(decay_profile(op, ProfileFlavor::density(), Interval::half_open));
    const auto d = detail::clean_density(op, p.state);
    CompensatedSum lhs;
    for (std::size_t x = 0; x < d.size(); ++x)
        lhs += weighted(d[x] * op.space().weights[x], right_inverse_increasing(g, d[x] / (4.0 * s)));
    auto w = detail::witness(op, rho.digest(), Interval::half_open);
    w.parameters["projection_residual"] = p.residual;
    w.parameters["sandwich_norm"] = s;
    return detail::make_report("rho-sobolev", lhs.value(), 4.0 * rho_energy(op, p.state), std::move(w), opt);
}

namespace detail {

/// rho as used by the flavor: compressed to (ker A)^perp for half_open, unchanged for closed.
inline ProjectedState flavored_state(const SpectralOperator& op, const DensityState& rho, Interval interval) {
    if (interval == Interval::half_open)
        return kernel_free(op, rho);
    check_same_space(op, rho);
    require_nonzero(rho);
    return {rho, 0.0};
}

} // namespace detail

/// Integral Moser inequality with pointwise profiles F_x. The closed flavor completes
/// F_x^{-1} by 0 below F_x(0), which cuts off small densities.
inline InequalityReport verify_rho_moser_integral(const SpectralOperator& op, const DensityState& rho, Interval interval,
                                                  const VerifyOptions& opt = {}) {
    const auto p = detail::flavored_state(op, rho, interval);
    const double n = p.state.operator_norm();
    const auto fx = pointwise_profiles(op, interval);
    const auto d = detail::clean_density(op, p.state);
    CompensatedSum lhs;
    for (std::size_t x = 0; x < d.size(); ++x)
        lhs += weighted(d[x] * op.space().weights[x], right_inverse_increasing(fx[x], d[x] / (4.0 * n)));
    auto w = detail::witness(op, rho.digest(), interval);
    w.parameters["projection_residual"] = p.residual;
    return detail::make_report("rho-moser-integral", lhs.value(), 4.0 * rho_energy(op, p.state), std::move(w), opt);
}

/// Discrete Moser inequality over a partition, with region profiles F_i = nu_{Pi}(part i).
inline InequalityReport verify_rho_moser_partition(const SpectralOperator& op, const DensityState& rho,
                                                   const std::vector<std::vector<int>>& parts, Interval interval,
                                                   const VerifyOptions& opt = {}) {
    check_partition(op.space(), parts);
    const auto p = detail::flavored_state(op, rho, interval);
    const double n = p.state.operator_norm();
    CompensatedSum lhs;
    for (const auto& part : parts) {
        const auto f = decay_profile(op, ProfileFlavor::over(part), interval);
        const double nu = detail::clean_mass(p.state.region_measure(part), p.state.trace());
        lhs += weighted(nu, right_inverse_increasing(f, nu / (4.0 * n)));
    }
    auto w = detail::witness(op, rho.digest(), interval);
    w.parameters["projection_residual"] = p.residual;
    w.parameters["parts"] = parts.size();
    return detail::make_report("rho-moser-partition", lhs.value(), 4.0 * rho_energy(op, p.state), std::move(w), opt);
}

/// Faber-Krahn inequality for a state supported in omega, as the pair
/// tau/(4||rho||) <= F_omega(4<A>) and F_omega(4<A>) <= mu(omega) F(4<A>).
inline std::vector<InequalityReport> verify_faber_krahn_mixed(const SpectralOperator& op, const DensityState& rho,
                                                              const std::vector<int>& omega, Interval interval,
                                                              const VerifyOptions& opt = {}) {
    check_same_space(op, rho);
    detail::require_nonzero(rho);
    detail::require_support(rho, omega);
    if (interval == Interval::half_open)
        detail::require_kernel_free(op, rho);
    const double tau = rho.trace();
    const double n = rho.operator_norm();
    const double a = rho_expectation(op, rho);
    const auto f_omega = decay_profile(op, ProfileFlavor::over(omega), interval);
    const auto f = decay_profile(op, ProfileFlavor::density(), interval);
    const double mid = f_omega(4.0 * a);
    auto w = detail::witness(op, rho.digest(), interval);
    w.parameters["region"] = detail::region_json(omega);
    w.parameters["expectation"] = a;
    std::vector<InequalityReport> out;
    out.push_back(detail::make_report("faber-krahn-mixed-left", tau / (4.0 * n), mid, w, opt));
    out.push_back(
        detail::make_report("faber-krahn-mixed-right", mid, op.space().measure(omega) * f(4.0 * a), std::move(w), opt));
    return out;
}

/// Counting function of the Dirichlet spectrum of omega against 4 mu(omega) F(4 lambda), at
/// every Dirichlet eigenvalue. The half_open flavor counts states orthogonal to ker A.
inline InequalityReport verify_faber_krahn_dirichlet(const SpectralOperator& op, const std::vector<int>& omega,
                                                     Interval interval, const VerifyOptions& opt = {}) {
    const bool exclude = interval == Interval::half_open;
    const auto spec = dirichlet_spectrum(op, omega, exclude);
    const auto f = decay_profile(op, ProfileFlavor::density(), interval);
    const double mu = op.space().measure(omega);
    detail::WorstCase worst;
    for (double lambda : detail::distinct_levels(spec))
        worst.offer(detail::count_upto(spec, lambda), 4.0 * mu * f(4.0 * lambda), {{"lambda", lambda}});
    if (worst.cases == 0)
        worst.offer(0.0, 4.0 * mu * f(0.0), {{"lambda", 0.0}});
    auto w = detail::witness(op, "", interval);
    w.parameters["region"] = detail::region_json(omega);
    return detail::worst_report("faber-krahn-dirichlet", worst, std::move(w), opt);
}

/// Balanced Faber-Krahn pair (1 - eps)^2 F_dim(lambda) <= F_omega(lambda / eps^2) <= mu(omega) F(lambda / eps^2).
inline std::vector<InequalityReport> verify_balanced_faber_krahn(const SpectralOperator& op,
                                                                 const std::vector<int>& omega, double eps,
                                                                 Interval interval, const VerifyOptions& opt = {}) {
    if (!(eps > 0.0 && eps < 1.0))
        throw std::invalid_argument("balanced Faber-Krahn: eps must lie in (0, 1)");
    const bool exclude = interval == Interval::half_open;
    const auto spec = dirichlet_spectrum(op, omega, exclude);
    const auto f_omega = decay_profile(op, ProfileFlavor::over(omega), interval);
    const auto f = decay_profile(op, ProfileFlavor::density(), interval);
    const double mu = op.space().measure(omega);
    const double k = (1.0 - eps) * (1.0 - eps);
    detail::WorstCase left;
    detail::WorstCase right;
    auto levels = detail::distinct_levels(spec);
    if (levels.empty())
        levels.push_back(0.0);
    for (double lambda : levels) {
        const double at = lambda / (eps * eps);
        const double mid = f_omega(at);
        left.offer(k * detail::count_upto(spec, lambda), mid, {{"lambda", lambda}});
        right.offer(mid, mu * f(at), {{"lambda", lambda}});
    }
    auto w = detail::witness(op, "", interval);
    w.parameters["region"] = detail::region_json(omega);
    w.parameters["eps"] = eps;
    std::vector<InequalityReport> out;
    out.push_back(detail::worst_report("balanced-faber-krahn-left", left, w, opt));
    out.push_back(detail::worst_report("balanced-faber-krahn-right", right, std::move(w), opt));
    return out;
}

// ---------------------------------------------------------------------------------
// Moser, Nash and Faber-Krahn for a single function

enum class PureInequality { moser_l2, moser_l1, nash, faber_krahn_pure };

inline const char* to_string(PureInequality p) {
    switch (p) {
    case PureInequality::moser_l2: return "moser-l2";
    case PureInequality::moser_l1: return "moser-l1";
    case PureInequality::nash: return "nash";
    case PureInequality::faber_krahn_pure: return "faber-krahn-pure";
    }
    return "";
}

inline PureInequality pure_inequality_from_string(const std::string& s) {
    for (auto p : {PureInequality::moser_l2, PureInequality::moser_l1, PureInequality::nash,
                   PureInequality::faber_krahn_pure})
        if (s == to_string(p))
            return p;
    throw std::invalid_argument("unknown inequality '" + s + "' (expected moser-l2, moser-l1, nash or faber-krahn-pure)");
}

/// Moser (L2 and L1 levels), Nash and pure Faber-Krahn inequalities with the
/// ultracontractive profile of the given flavor. The half_open flavor requires f orthogonal
/// to ker A; faber_krahn_pure requires f supported in omega.
inline InequalityReport verify_pure_moser_nash(const SpectralOperator& op, const VectorXd& f, PureInequality which,
                                               Interval interval, const VerifyOptions& opt = {},
                                               const std::vector<int>& omega = {}) {
    detail::require_nonzero(op.space(), f);
    if (interval == Interval::half_open)
        detail::require_kernel_free(op, f);
    const auto& space = op.space();
    const auto fp = decay_profile(op, ProfileFlavor::ultra(), interval);
    const double e = energy(op, f);
    const double l2 = l2_norm2(space, f);
    const double l1 = l1_norm(space, f);
    const auto n2 = pointwise_norms2(space, f);
    auto w = detail::witness(op, detail::vector_digest(f), interval);
    double lhs = 0.0;
    double rhs = 0.0;
    switch (which) {
    case PureInequality::moser_l2:
    case PureInequality::moser_l1: {
        CompensatedSum s;
        for (std::size_t x = 0; x < n2.size(); ++x) {
            const double level =
                which == PureInequality::moser_l2 ? n2[x] / (4.0 * l2) : std::sqrt(n2[x]) / (2.0 * l1);
            s += weighted(n2[x] * space.weights[x], right_inverse_increasing(fp, level));
        }
        lhs = s.value();
        rhs = 4.0 * e;
        break;
    }
    case PureInequality::nash:
        lhs = weighted(l2, right_inverse_increasing(fp, l2 / (4.0 * l1 * l1)));
        rhs = 8.0 * e;
        break;
    case PureInequality::faber_krahn_pure:
        if (omega.empty())
            throw std::invalid_argument("faber-krahn-pure needs a region");
        detail::require_support(space, f, omega);
        lhs = 1.0;
        rhs = 4.0 * space.measure(omega) * fp(8.0 * e / l2);
        w.parameters["region"] = detail::region_json(omega);
        break;
    }
    return detail::make_report(to_string(which), lhs, rhs, std::move(w), opt);
}

// ---------------------------------------------------------------------------------
// Polynomial decay

/// Constants attached to a polynomial bound F(lambda) <= C lambda^alpha, alpha > 1.
struct PolynomialConstants {
    double c = 0.0;
    double alpha = 0.0;
    double p = 0.0;  ///< 2 alpha / (alpha - 1)
    double c1 = 0.0; ///< C alpha / (alpha - 1), the constant of G
    double c2 = 0.0; ///< 4^{alpha/(alpha-1)} C1^{1/(alpha-1)}
    double c3 = 0.0; ///< 4^alpha alpha C / (alpha - 1)
};

inline PolynomialConstants polynomial_constants(double c, double alpha) {
    if (!(c > 0.0) || !std::isfinite(c))
        throw std::invalid_argument("polynomial constants: C must be positive");
    if (!(alpha > 1.0) || !std::isfinite(alpha))
        throw std::invalid_argument("polynomial constants: alpha must exceed 1");
    PolynomialConstants k;
    k.c = c;
    k.alpha = alpha;
    k.p = 2.0 * alpha / (alpha - 1.0);
    k.c1 = c * alpha / (alpha - 1.0);
    k.c2 = std::pow(4.0, alpha / (alpha - 1.0)) * std::pow(k.c1, 1.0 / (alpha - 1.0));
    k.c3 = std::pow(4.0, alpha) * alpha * c / (alpha - 1.0);
    return k;
}

/// ||f||_p <= 2 C1^{1/(2 alpha)} E(f)^{1/2} for f orthogonal to ker A, once (C, alpha)
/// is checked to dominate the ultracontractive profile.
inline InequalityReport verify_lp_sobolev(const SpectralOperator& op, const VectorXd& f, double c, double alpha,
                                          const VerifyOptions& opt = {}) {
    const auto k = polynomial_constants(c, alpha);
    if (!dominated_by_power(decay_profile(op, ProfileFlavor::ultra(), Interval::half_open), c, alpha))
        throw std::domain_error("(C, alpha) does not dominate the spectral profile");
    const auto p = detail::kernel_free(op, f);
    const double e = energy(op, p.state);
    auto w = detail::witness(op, detail::vector_digest(f), Interval::half_open);
    w.parameters["C"] = c;
    w.parameters["alpha"] = alpha;
    w.parameters["p"] = k.p;
    w.parameters["projection_residual"] = p.residual;
    return detail::make_report("lp-sobolev", lp_norm(op.space(), p.state, k.p),
                               2.0 * std::pow(k.c1, 1.0 / (2.0 * alpha)) * std::sqrt(std::max(0.0, e)), std::move(w),
                               opt);
}

/// Consequences of a polynomial density bound for the span V of the given states (projected
/// to (ker A)^perp and orthonormalized): the integral bound for an orthonormal basis of V,
/// the dimension bound dim V / mu(omega) <= C3 lambda^alpha with omega the support of V and
/// lambda the top Rayleigh quotient on V, and the counting bound over the Dirichlet
/// spectrum of omega.
inline std::vector<InequalityReport> polynomial_consequences(double c, double alpha, const SpectralOperator& op,
                                                             const std::vector<VectorXd>& states,
                                                             const VerifyOptions& opt = {}) {
    const auto k = polynomial_constants(c, alpha);
    if (!dominated_by_power(decay_profile(op, ProfileFlavor::density(), Interval::half_open), c, alpha))
        throw std::domain_error("(C, alpha) does not dominate the spectral density profile");
    if (states.empty())
        throw std::invalid_argument("polynomial consequences need at least one state");
    const auto& space = op.space();
    const VectorXd sw = space.coordinate_weights().cwiseSqrt();
    MatrixXd v(space.dimension(), static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) {
        detail::require_nonzero(space, states[i]);
        v.col(static_cast<Eigen::Index>(i)) = sw.asDiagonal() * project_to_range(op, states[i]).state;
    }
    Eigen::JacobiSVD<MatrixXd> svd(v, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-10 * sv(0))
            ++rank;
    if (rank == 0 || !(sv(0) > 0.0))
        throw std::domain_error("states lie in ker A");
    const MatrixXd q = svd.matrixU().leftCols(rank);
    const auto rho = DensityState::from_symmetric(space, q * q.transpose());
    const double lambda = sandwich_norm(op, rho);
    const auto d = rho.density();

    const double power = alpha / (alpha - 1.0);
    CompensatedSum integral;
    for (std::size_t x = 0; x < d.size(); ++x)
        integral += std::pow(d[x], power) * space.weights[x];

    const double top = *std::max_element(d.begin(), d.end());
    std::vector<int> omega;
    for (std::size_t x = 0; x < d.size(); ++x)
        if (d[x] > 1e-12 * top)
            omega.push_back(static_cast<int>(x));
    const double mu = space.measure(omega);

    Witness w = detail::witness(op, rho.digest(), Interval::half_open);
    w.parameters["C"] = c;
    w.parameters["alpha"] = alpha;
    w.parameters["dimension"] = rank;
    w.parameters["lambda"] = lambda;
    std::vector<InequalityReport> out;
    out.push_back(detail::make_report("orthonormal-family", integral.value(),
                                      k.c2 * std::pow(lambda, 1.0 / (alpha - 1.0)) * rho_energy(op, rho), w, opt));
    w.parameters["region"] = detail::region_json(omega);
    out.push_back(detail::make_report("dirichlet-polynomial", static_cast<double>(rank) / mu,
                                      k.c3 * std::pow(lambda, alpha), w, opt));

    const auto spec = dirichlet_spectrum(op, omega, true);
    detail::WorstCase worst;
    for (double l : detail::distinct_levels(spec))
        worst.offer(detail::count_upto(spec, l), mu * k.c3 * std::pow(l, alpha), {{"level", l}});
    out.push_back(detail::worst_report("repartition-polynomial", worst, std::move(w), opt));
    return out;
}

// ---------------------------------------------------------------------------------
// Heat against spectral profiles

/// L(t) <= Laplace(dF)(t) and M(t) <= Laplace(dG)(t) on the heat time grid, for the
/// ultracontractive flavor. When every spectral projector has constant density the reverse
/// bounds Laplace(dF) <= h L and G(y) <= h e M(1/y) are checked as well.
inline std::vector<InequalityReport> compare_heat_spectral(const SpectralOperator& op, const VerifyOptions& opt = {}) {
    if (!(op.lambda_min() > 0.0))
        throw std::domain_error("heat comparison needs a nonzero operator");
    const auto flavor = ProfileFlavor::ultra();
    const auto f = decay_profile(op, flavor, Interval::half_open);
    const auto g = g_transform(f);
    const auto l = heat_function(op, flavor, true);
    const auto m = heat_decay_integral(op, flavor);
    const double h = op.space().fiber_dim;
    const bool invariant = has_constant_densities(op);

    detail::WorstCase heat;
    detail::WorstCase integral;
    detail::WorstCase heat_reverse;
    detail::WorstCase integral_reverse;
    for (const auto& s : m.samples()) {
        const double t = s.at;
        const double lt = l(t);
        const double lf = laplace_stieltjes(f, t);
        heat.offer(lt, lf, {{"t", t}});
        integral.offer(s.value, laplace_stieltjes(g, t), {{"t", t}});
        if (invariant) {
            heat_reverse.offer(lf, h * lt, {{"t", t}});
            if (t > 0.0)
                integral_reverse.offer(g(1.0 / t), h * std::exp(1.0) * s.value, {{"y", 1.0 / t}});
        }
    }
    auto w = detail::witness(op, "", Interval::half_open);
    std::vector<InequalityReport> out;
    out.push_back(detail::worst_report("heat-vs-spectral", heat, w, opt));
    out.push_back(detail::worst_report("heat-integral-vs-spectral", integral, w, opt));
    if (invariant) {
        out.push_back(detail::worst_report("reverse-heat-vs-spectral", heat_reverse, w, opt));
        out.push_back(detail::worst_report("reverse-heat-integral", integral_reverse, std::move(w), opt));
    }
    return out;
}

// ---------------------------------------------------------------------------------
// From Sobolev to Faber-Krahn

/// tau(rho) <= 8 mu(omega) ||rho^{1/2} A rho^{1/2}|| G(8 <A>) for rho supported in omega
/// and vanishing on ker A, with G from the density profile.
inline InequalityReport verify_sobolev_to_fk(const SpectralOperator& op, const DensityState& rho,
                                             const std::vector<int>& omega, const VerifyOptions& opt = {}) {
    check_same_space(op, rho);
    detail::require_nonzero(rho);
    detail::require_support(rho, omega);
    detail::require_kernel_free(op, rho);
    const auto g = g_transform(decay_profile(op, ProfileFlavor::density(), Interval::half_open));
    const double s = sandwich_norm(op, rho);
    const double a = rho_expectation(op, rho);
    auto w = detail::witness(op, rho.digest(), Interval::half_open);
    w.parameters["region"] = detail::region_json(omega);
    w.parameters["expectation"] = a;
    return detail::make_report("sobolev-faber-krahn", rho.trace(), 8.0 * op.space().measure(omega) * s * g(8.0 * a),
                               std::move(w), opt);
}

/// Counting function of the Dirichlet spectrum of omega (states orthogonal to ker A)
/// against 8 mu(omega) lambda G(8 lambda).
inline InequalityReport verify_sobolev_fk_dirichlet(const SpectralOperator& op, const std::vector<int>& omega,
                                                    const VerifyOptions& opt = {}) {
    const auto spec = dirichlet_spectrum(op, omega, true);
    const auto g = g_transform(decay_profile(op, ProfileFlavor::density(), Interval::half_open));
    const double mu = op.space().measure(omega);
    detail::WorstCase worst;
    for (double lambda : detail::distinct_levels(spec))
        worst.offer(detail::count_upto(spec, lambda), weighted(8.0 * mu * lambda, g(8.0 * lambda)),
                    {{"lambda", lambda}});
    if (worst.cases == 0)
        worst.offer(0.0, 0.0, {{"lambda", 0.0}});
    auto w = detail::witness(op, "", Interval::half_open);
    w.parameters["region"] = detail::region_json(omega);
    return detail::worst_report("sobolev-faber-krahn-dirichlet", worst, std::move(w), opt);
}

/// F(lambda) <= lambda G(lambda) at every breakpoint of a step profile (or on a log grid for
/// a power profile).
inline InequalityReport verify_lambda_g(const MonotoneProfile& f, const VerifyOptions& opt = {}) {
    const auto g = g_transform(f);
    std::vector<double> at = f.is_power() ? log_grid(1e-6, 1e6, 49) : f.positions();
    detail::WorstCase worst;
    for (double l : at)
        worst.offer(f(l), weighted(l, g(l)), {{"lambda", l}});
    if (worst.cases == 0)
        worst.offer(0.0, 0.0, {{"lambda", 0.0}});
    Witness w;
    w.state_digest = detail::profile_digest(f);
    return detail::worst_report("lambda-g-vs-f", worst, std::move(w), opt);
}

inline InequalityReport verify_lambda_g(const SpectralOperator& op, const VerifyOptions& opt = {}) {
    auto r = verify_lambda_g(decay_profile(op, ProfileFlavor::density(), Interval::half_open), opt);
    r.witness.operator_digest = op.digest();
    r.witness.interval = to_string(Interval::half_open);
    return r;
}

/// Per part: F_omega^{-1}(nu(omega) / 8||rho||) nu(omega) <= 2 * integral over omega of
/// F_x^{-1}(D nu(x) / 4||rho||) d nu. Reports the worst part.
inline InequalityReport verify_integral_dominates_discrete(const SpectralOperator& op, const DensityState& rho,
                                                           const std::vector<std::vector<int>>& parts,
                                                           Interval interval, const VerifyOptions& opt = {}) {
    check_partition(op.space(), parts);
    const auto p = detail::flavored_state(op, rho, interval);
    const double n = p.state.operator_norm();
    const auto fx = pointwise_profiles(op, interval);
    const auto d = detail::clean_density(op, p.state);
    detail::WorstCase worst;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto f = decay_profile(op, ProfileFlavor::over(parts[i]), interval);
        const double nu = detail::clean_mass(p.state.region_measure(parts[i]), p.state.trace());
        CompensatedSum integral;
        for (int x : parts[i]) {
            const auto ux = static_cast<std::size_t>(x);
            integral += weighted(d[ux] * op.space().weights[ux], right_inverse_increasing(fx[ux], d[ux] / (4.0 * n)));
        }
        worst.offer(weighted(nu, right_inverse_increasing(f, nu / (8.0 * n))), 2.0 * integral.value(),
                    {{"part", i}});
    }
    auto w = detail::witness(op, rho.digest(), interval);
    w.parameters["projection_residual"] = p.residual;
    return detail::worst_report("integral-dominates-discrete", worst, std::move(w), opt);
}

// ---------------------------------------------------------------------------------
// Profile-level properties

/// Young-type inequality s t <= s F(s) + t F^{-1}(t).
inline InequalityReport verify_young(const MonotoneProfile& f, double s, double t, const VerifyOptions& opt = {}) {
    if (!(s >= 0.0) || !(t >= 0.0))
        throw std::invalid_argument("young: s and t must be nonnegative");
    Witness w;
    w.state_digest = detail::profile_digest(f);
    w.parameters["s"] = number_json(s);
    w.parameters["t"] = number_json(t);
    return detail::make_report("young", weighted(s, t), weighted(s, f(s)) + weighted(t, right_inverse_increasing(f, t)),
                               std::move(w), opt);
}

/// Largest eps (to rel. precision 1e-12) for which check_doubling passes, or 0 if none does.
inline double largest_doubling_epsilon(const MonotoneProfile& f, double lambda_max, int grid) {
    double lo = 0.0;
    double hi = 1.0;
    if (!check_doubling(f, 1e-15, lambda_max, grid))
        return 0.0;
    while (check_doubling(f, hi, lambda_max, grid)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12)
            return infinity;
    }
    while (hi - lo > 1e-12 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (check_doubling(f, mid, lambda_max, grid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

} // namespace specdens
