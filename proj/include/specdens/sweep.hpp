#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "families.hpp"
#include "operators.hpp"
#include "verifiers.hpp"

namespace specdens {

/// Names accepted by the check selector, in the order reports are emitted.
inline const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names{
        "h-sobolev",        "n-sobolev",        "rho-sobolev",
        "rho-moser-integral", "rho-moser-partition", "integral-dominates-discrete",
        "faber-krahn-mixed", "faber-krahn-dirichlet", "balanced-faber-krahn",
        "moser-l2",         "moser-l1",         "nash",
        "faber-krahn-pure", "heat-spectral",    "sobolev-faber-krahn",
        "sobolev-faber-krahn-dirichlet", "lambda-g-vs-f", "lp-sobolev",
        "polynomial-consequences"};
    return names;
}

/// Parses a comma separated selection; "all" (or empty) selects every check.
inline std::set<std::string> parse_checks(const std::string& text) {
    std::set<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty())
            continue;
        if (item == "all") {
            out.insert(check_names().begin(), check_names().end());
            continue;
        }
        if (std::find(check_names().begin(), check_names().end(), item) == check_names().end())
            throw std::invalid_argument("unknown check '" + item + "'");
        out.insert(item);
    }
    if (out.empty())
        out.insert(check_names().begin(), check_names().end());
    return out;
}

/// Seeded generator for instance i of a run: independent of thread scheduling.
inline std::mt19937_64 instance_rng(std::uint64_t seed, std::uint64_t i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    return std::mt19937_64(seq);
}

/// Random operator: a weighted Erdos-Renyi graph Laplacian (n in [4, 40], random vertex
/// measure half the time) or, one time in five, a random positive block operator with h in {1, 2, 3}.
inline OperatorInput random_operator(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (std::uniform_int_distribution<int>(0, 4)(rng) == 4) {
        const int n = std::uniform_int_distribution<int>(2, 8)(rng);
        const int h = std::uniform_int_distribution<int>(1, 3)(rng);
        std::vector<double> w(static_cast<std::size_t>(n));
        for (auto& v : w)
            v = 0.5 + 1.5 * unit(rng);
        MeasureSpace space(w, h);
        MatrixXd a = random_block_operator(space, rng);
        return {"random block n=" + std::to_string(n) + " h=" + std::to_string(h), a, space};
    }
    const int n = std::uniform_int_distribution<int>(4, 40)(rng);
    const double p = 0.15 + 0.45 * unit(rng);
    auto edges = erdos_renyi(n, p, rng, 0.5, 2.0);
    if (edges.empty())
        edges.push_back({0, 1, 1.0});
    std::vector<double> w;
    if (unit(rng) < 0.5) {
        w.resize(static_cast<std::size_t>(n));
        for (auto& v : w)
            v = 0.5 + 1.5 * unit(rng);
    }
    MeasureSpace space = w.empty() ? MeasureSpace::counting(static_cast<std::size_t>(n)) : MeasureSpace(w, 1);
    return {"erdos-renyi n=" + std::to_string(n), graph_laplacian(static_cast<std::size_t>(n), edges, w), space};
}

/// Random states drawn for one trial on a fixed operator.
struct TrialStates {
    VectorXd f;
    DensityState rho;
    std::vector<int> omega;
    std::vector<std::vector<int>> parts;
    VectorXd f_omega;
    DensityState rho_omega;
    std::optional<VectorXd> f_omega_free; ///< supported in omega and orthogonal to ker A
    std::optional<DensityState> rho_omega_free;
    double eps = 0.5;
    double alpha = 2.0;
};

namespace detail {

inline VectorXd gaussian_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = g(rng);
    return v;
}

inline std::vector<int> random_region(std::size_t n, std::mt19937_64& rng) {
    std::vector<int> pts(n);
    std::iota(pts.begin(), pts.end(), 0);
    std::shuffle(pts.begin(), pts.end(), rng);
    const auto k = std::uniform_int_distribution<std::size_t>(1, std::max<std::size_t>(1, n / 2))(rng);
    std::vector<int> out(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<std::vector<int>> random_partition(std::size_t n, std::mt19937_64& rng) {
    std::vector<int> pts(n);
    std::iota(pts.begin(), pts.end(), 0);
    std::shuffle(pts.begin(), pts.end(), rng);
    const auto k = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(n, 5))(rng);
    std::vector<std::vector<int>> parts(k);
    for (std::size_t i = 0; i < n; ++i)
        parts[i < k ? i : std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)].push_back(pts[i]);
    for (auto& p : parts)
        std::sort(p.begin(), p.end());
    std::sort(parts.begin(), parts.end());
    return parts;
}

/// Random mixed state sum p_i |f_i><f_i| with f_i drawn by `draw`.
template <class Draw>
DensityState random_mixture(const MeasureSpace& space, std::mt19937_64& rng, int max_rank, Draw&& draw) {
    const int r = std::uniform_int_distribution<int>(1, std::max(1, max_rank))(rng);
    std::uniform_real_distribution<double> prob(0.1, 1.0);
    std::vector<VectorXd> states;
    std::vector<double> probs;
    for (int i = 0; i < r; ++i) {
        states.push_back(draw());
        probs.push_back(prob(rng));
    }
    return DensityState::from_states(space, states, probs);
}

} // namespace detail

/// Draws a generic state, a generic mixed state, a region with states supported in it, and a
/// partition. A nonempty `omega` / `parts` replaces the random choice.
inline TrialStates random_states(const SpectralOperator& op, std::mt19937_64& rng, std::vector<int> omega = {},
                                 std::vector<std::vector<int>> parts = {}) {
    const auto& space = op.space();
    const Eigen::Index dim = space.dimension();
    const int max_rank = static_cast<int>(std::min<Eigen::Index>(4, dim));
    TrialStates s;
    s.f = detail::gaussian_vector(dim, rng);
    s.rho = detail::random_mixture(space, rng, max_rank, [&] { return detail::gaussian_vector(dim, rng); });
    s.omega = omega.empty() ? detail::random_region(space.points(), rng) : std::move(omega);
    s.parts = parts.empty() ? detail::random_partition(space.points(), rng) : std::move(parts);
    check_region(space, s.omega);
    check_partition(space, s.parts);

    const auto idx = region_indices(space, s.omega);
    const VectorXd isw = space.coordinate_weights().cwiseSqrt().cwiseInverse();
    auto on_region = [&] {
        VectorXd v = VectorXd::Zero(dim);
        const VectorXd g = detail::gaussian_vector(static_cast<Eigen::Index>(idx.size()), rng);
        for (std::size_t i = 0; i < idx.size(); ++i)
            v(idx[i]) = g(static_cast<Eigen::Index>(i));
        return v;
    };
    s.f_omega = on_region();
    s.rho_omega = detail::random_mixture(space, rng, max_rank, on_region);

    const MatrixXd z = dirichlet_basis(op, s.omega, true);
    if (z.cols() > 0) {
        auto free_state = [&] {
            const VectorXd c = z * detail::gaussian_vector(z.cols(), rng);
            VectorXd v = VectorXd::Zero(dim);
            for (std::size_t i = 0; i < idx.size(); ++i)
                v(idx[i]) = c(static_cast<Eigen::Index>(i)) * isw(idx[i]);
            return v;
        };
        s.f_omega_free = free_state();
        s.rho_omega_free = detail::random_mixture(
            space, rng, static_cast<int>(std::min<Eigen::Index>(max_rank, z.cols())), free_state);
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    s.eps = 0.1 + 0.8 * unit(rng);
    s.alpha = 1.25 + 2.0 * unit(rng);
    return s;
}

/// Runs the selected checks on one (operator, states) pair. `intervals` lists the flavors
/// to use where a check has two.
inline std::vector<InequalityReport> run_checks(const SpectralOperator& op, const TrialStates& s,
                                                const std::set<std::string>& checks,
                                                const std::vector<Interval>& intervals, const VerifyOptions& opt) {
    std::vector<InequalityReport> out;
    auto want = [&](const char* name) { return checks.count(name) > 0; };
    auto add = [&](InequalityReport r) { out.push_back(std::move(r)); };
    auto add_all = [&](std::vector<InequalityReport> rs) {
        for (auto& r : rs)
            out.push_back(std::move(r));
    };

    if (want("h-sobolev"))
        add(verify_h_sobolev(op, s.f, opt));
    if (want("n-sobolev"))
        add(verify_n_sobolev(op, s.f, opt));
    if (want("rho-sobolev"))
        add(verify_rho_sobolev(op, s.rho, opt));
    for (auto iv : intervals) {
        if (want("rho-moser-integral"))
            add(verify_rho_moser_integral(op, s.rho, iv, opt));
        if (want("rho-moser-partition"))
            add(verify_rho_moser_partition(op, s.rho, s.parts, iv, opt));
        if (want("integral-dominates-discrete"))
            add(verify_integral_dominates_discrete(op, s.rho, s.parts, iv, opt));
    }
    for (auto iv : intervals) {
        if (want("faber-krahn-mixed")) {
            if (iv == Interval::closed)
                add_all(verify_faber_krahn_mixed(op, s.rho_omega, s.omega, iv, opt));
            else if (s.rho_omega_free)
                add_all(verify_faber_krahn_mixed(op, *s.rho_omega_free, s.omega, iv, opt));
        }
        if (want("faber-krahn-dirichlet"))
            add(verify_faber_krahn_dirichlet(op, s.omega, iv, opt));
        if (want("balanced-faber-krahn"))
            add_all(verify_balanced_faber_krahn(op, s.omega, s.eps, iv, opt));
    }
    for (auto iv : intervals) {
        const VectorXd f = iv == Interval::half_open ? project_to_range(op, s.f).state : s.f;
        for (auto which : {PureInequality::moser_l2, PureInequality::moser_l1, PureInequality::nash})
            if (want(to_string(which)) && l2_norm2(op.space(), f) > 0.0)
                add(verify_pure_moser_nash(op, f, which, iv, opt));
        if (want("faber-krahn-pure")) {
            if (iv == Interval::closed)
                add(verify_pure_moser_nash(op, s.f_omega, PureInequality::faber_krahn_pure, iv, opt, s.omega));
            else if (s.f_omega_free)
                add(verify_pure_moser_nash(op, *s.f_omega_free, PureInequality::faber_krahn_pure, iv, opt, s.omega));
        }
    }
    if (want("heat-spectral"))
        add_all(compare_heat_spectral(op, opt));
    if (want("sobolev-faber-krahn") && s.rho_omega_free)
        add(verify_sobolev_to_fk(op, *s.rho_omega_free, s.omega, opt));
    if (want("sobolev-faber-krahn-dirichlet"))
        add(verify_sobolev_fk_dirichlet(op, s.omega, opt));
    if (want("lambda-g-vs-f"))
        add(verify_lambda_g(op, opt));
    if (want("lp-sobolev")) {
        const double c = dominating_constant(decay_profile(op, ProfileFlavor::ultra(), Interval::half_open), s.alpha);
        add(verify_lp_sobolev(op, s.f, c, s.alpha, opt));
    }
    if (want("polynomial-consequences")) {
        const double c =
            dominating_constant(decay_profile(op, ProfileFlavor::density(), Interval::half_open), s.alpha);
        add_all(polynomial_consequences(c, s.alpha, op, {s.f, s.rho_omega_free ? *s.f_omega_free : s.f_omega}, opt));
    }
    return out;
}

struct SweepOptions {
    std::uint64_t seed = 1;
    int count = 1000;
    int threads = 1;
    std::set<std::string> checks;     ///< empty selects every check
    std::vector<Interval> intervals{Interval::half_open, Interval::closed};
    VerifyOptions verify;
};

/// Calls job(i) for i in [0, count) on `threads` workers. Results must be written to
/// per-index slots so the outcome does not depend on scheduling.
template <class Job>
void parallel_for(int count, int threads, Job&& job) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i)
            job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++)
                job(i);
        });
    for (auto& th : pool)
        th.join();
}

namespace detail {

inline InequalityReport error_report(const std::string& what, const VerifyOptions& opt) {
    Witness w;
    w.parameters["message"] = what;
    auto r = make_report("error", 1.0, 0.0, std::move(w), opt);
    r.margin = -infinity;
    r.relative_margin = -1.0;
    r.pass = false;
    return r;
}

inline void tag(std::vector<InequalityReport>& rs, const char* key, std::uint64_t value) {
    for (auto& r : rs)
        r.witness.parameters[key] = value;
}

} // namespace detail

/// Runs the checks on `count` independently seeded random operators. Reports come back in
/// instance order whatever the thread count; an exception inside an instance becomes a
/// failing "error" report.
inline std::vector<InequalityReport> run_sweep(const SweepOptions& o) {
    const auto checks = o.checks.empty() ? parse_checks("all") : o.checks;
    std::vector<std::vector<InequalityReport>> slots(static_cast<std::size_t>(std::max(0, o.count)));
    parallel_for(o.count, o.threads, [&](int i) {
        auto& slot = slots[static_cast<std::size_t>(i)];
        try {
            auto rng = instance_rng(o.seed, static_cast<std::uint64_t>(i));
            const auto input = random_operator(rng);
            const auto op = diagonalize(input.matrix, input.space);
            const auto states = random_states(op, rng);
            slot = run_checks(op, states, checks, o.intervals, o.verify);
        } catch (const std::exception& e) {
            slot = {detail::error_report(e.what(), o.verify)};
        }
        detail::tag(slot, "instance", static_cast<std::uint64_t>(i));
    });
    std::vector<InequalityReport> out;
    for (auto& s : slots)
        for (auto& r : s)
            out.push_back(std::move(r));
    return out;
}

/// Runs the checks on a fixed operator with `trials` independently seeded random states.
inline std::vector<InequalityReport> run_trials(const SpectralOperator& op, int trials, const SweepOptions& o,
                                                const std::vector<int>& omega = {},
                                                const std::vector<std::vector<int>>& parts = {}) {
    const auto checks = o.checks.empty() ? parse_checks("all") : o.checks;
    std::vector<std::vector<InequalityReport>> slots(static_cast<std::size_t>(std::max(0, trials)));
    parallel_for(trials, o.threads, [&](int i) {
        auto& slot = slots[static_cast<std::size_t>(i)];
        try {
            auto rng = instance_rng(o.seed, static_cast<std::uint64_t>(i));
            const auto states = random_states(op, rng, omega, parts);
            slot = run_checks(op, states, checks, o.intervals, o.verify);
        } catch (const std::exception& e) {
            slot = {detail::error_report(e.what(), o.verify)};
        }
        detail::tag(slot, "trial", static_cast<std::uint64_t>(i));
    });
    std::vector<InequalityReport> out;
    for (auto& s : slots)
        for (auto& r : s)
            out.push_back(std::move(r));
    return out;
}

} // namespace specdens
