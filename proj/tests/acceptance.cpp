// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "specdens/cohomology.hpp"
#include "specdens/families.hpp"
#include "specdens/invariant.hpp"
#include "specdens/report_io.hpp"
#include "specdens/sweep.hpp"
#include "specdens/verifiers.hpp"

using namespace specdens;
namespace fs = std::filesystem;

namespace {

std::string data(const std::string& name) {
    const char* dir = std::getenv("SPECDENS_DATA");
    return std::string(dir ? dir : "data") + "/" + name;
}

// Collects named comparisons for one criterion.
struct Tally {
    int checks = 0;
    int failed = 0;
    double worst = 0.0;
    std::string first_failure;

    void near(const std::string& what, double got, double want, double tol) {
        ++checks;
        const double err = std::abs(got - want);
        worst = std::max(worst, err);
        if (!(err <= tol))
            fail(what + ": got " + format_number(got) + ", want " + format_number(want));
    }
    void truth(const std::string& what, bool ok) {
        ++checks;
        if (!ok)
            fail(what);
    }
    void fail(const std::string& what) {
        ++failed;
        if (first_failure.empty())
            first_failure = what;
    }
    bool ok() const { return failed == 0 && checks > 0; }
};

struct Outcome {
    bool pass;
    std::string detail;
};

Outcome from(const Tally& t, const std::string& detail) {
    if (t.ok())
        return {true, detail};
    return {false, std::to_string(t.failed) + "/" + std::to_string(t.checks) + " failed; first: " + t.first_failure};
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

SpectralOperator graph_op(std::size_t n, const std::vector<Edge>& e) {
    return diagonalize(graph_laplacian(n, e), MeasureSpace::counting(n));
}

VectorXd vec(std::initializer_list<double> v) {
    VectorXd f(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        f(i++) = x;
    return f;
}

// ---------------------------------------------------------------------------------

Outcome hand_examples() {
    const double tol = 1e-12;
    Tally t;
    const auto k2 = graph_op(2, complete_edges(2));
    const auto c4 = graph_op(4, cycle_edges(4));
    const auto& sp = k2.space();

    t.near("K2 eigenvalue 0", k2.eigenvalues()(0), 0.0, tol);
    t.near("K2 eigenvalue 1", k2.eigenvalues()(1), 2.0, tol);
    const double c4_eigs[] = {0.0, 2.0, 2.0, 4.0};
    for (int i = 0; i < 4; ++i)
        t.near("C4 eigenvalue", c4.eigenvalues()(i), c4_eigs[i], tol);

    const auto p2 = projector(k2, Interval::half_open, 2.0);
    t.near("K2 projector (a,a)", p2.entries(0, 0), 0.5, tol);
    t.near("K2 projector (a,b)", p2.entries(0, 1), -0.5, tol);
    t.near("K2 projector below 2", projector(k2, Interval::half_open, 1.9).entries.cwiseAbs().maxCoeff(), 0.0, tol);
    const auto p0 = projector(k2, Interval::closed, 0.0);
    t.near("K2 kernel projector", p0.entries(0, 1), 0.5, tol);
    const auto h1 = heat(k2, 1.0, true);
    t.near("K2 heat t=1 (a,a)", h1.entries(0, 0), std::exp(-2.0) / 2.0, tol);
    t.near("K2 heat t=1 (a,b)", h1.entries(0, 1), -std::exp(-2.0) / 2.0, tol);
    t.near("K2 heat t=0", (heat(k2, 0.0, true).entries - projector(k2, Interval::half_open, infinity).entries)
                              .cwiseAbs()
                              .maxCoeff(),
           0.0, tol);
    t.near("K2 ultra norm", ultra_norm(p2), 0.5, tol);
    t.near("C4 ultra norm", ultra_norm(projector(c4, Interval::half_open, 2.0)), 0.5, tol);
    for (double d : density_vector(p2))
        t.near("K2 density", d, 0.5, tol);
    for (double d : density_vector(projector(c4, Interval::half_open, 2.0)))
        t.near("C4 density", d, 0.5, tol);

    const auto fc4 = decay_profile(c4, ProfileFlavor::density(), Interval::half_open);
    t.truth("C4 F has two breakpoints", fc4.positions().size() == 2);
    t.near("C4 F breakpoint 2", fc4.positions().at(0), 2.0, tol);
    t.near("C4 F breakpoint 4", fc4.positions().at(1), 4.0, tol);
    t.near("C4 F(2)", fc4(2.0), 0.5, tol);
    t.near("C4 F(4)", fc4(4.0), 0.75, tol);
    const auto fk2 = decay_profile(k2, ProfileFlavor::ultra(), Interval::half_open);
    t.near("K2 F_ultra(2)", fk2(2.0), 0.5, tol);
    t.near("K2 F_ultra(1.9)", fk2(1.9), 0.0, tol);
    const auto fa = decay_profile(k2, ProfileFlavor::over({0}), Interval::half_open);
    t.near("K2 F_a(2)", fa(2.0), 0.5, tol);
    t.near("K2 F_a(1.9)", fa(1.9), 0.0, tol);
    const auto gk2 = g_transform(fk2);
    t.near("K2 G breakpoint", gk2.positions().at(0), 2.0, tol);
    t.near("K2 G(2)", gk2(2.0), 0.25, tol);
    const auto gc4 = g_transform(fc4);
    t.near("C4 G(2)", gc4(2.0), 0.25, tol);
    t.near("C4 G(4)", gc4(4.0), 0.3125, tol);

    const VectorXd f = vec({1, -1});
    t.near("K2 energy", energy(k2, f), 4.0, tol);
    const auto pure = DensityState::from_states(sp, {f / std::sqrt(2.0)});
    t.near("K2 rho energy", rho_energy(k2, pure), 2.0, tol);
    t.near("K2 expectation", rho_expectation(k2, pure), 2.0, tol);
    t.near("K2 sandwich norm", sandwich_norm(k2, pure), 2.0, tol);
    t.near("C4 Dirichlet one vertex", dirichlet_counting(c4, {0}, 2.0), 1.0, 0.0);
    const auto ds = dirichlet_spectrum(c4, {0, 1});
    t.near("C4 Dirichlet edge low", ds.at(0), 1.0, tol);
    t.near("C4 Dirichlet edge high", ds.at(1), 3.0, tol);
    t.near("C4 Dirichlet count 1", dirichlet_counting(c4, {0, 1}, 1.0), 1.0, 0.0);
    t.near("C4 Dirichlet count 3", dirichlet_counting(c4, {0, 1}, 3.0), 2.0, 0.0);

    auto report = [&](const std::string& what, const InequalityReport& r, double lhs, double rhs) {
        t.near(what + " lhs", r.lhs, lhs, tol);
        t.near(what + " rhs", r.rhs, rhs, tol);
        t.truth(what + " passes", r.pass);
    };
    report("h-sobolev K2", verify_h_sobolev(k2, f), 0.25, 1.0);
    report("h-sobolev C4", verify_h_sobolev(c4, vec({1, 0, -1, 0})), 0.25, 1.0);
    report("rho-sobolev K2", verify_rho_sobolev(k2, pure), 2.0, 8.0);
    report("rho-moser K2", verify_rho_moser_integral(k2, pure, Interval::half_open), 2.0, 8.0);
    const auto constants = DensityState::from_states(sp, {vec({1, 1}) / std::sqrt(2.0)});
    report("rho-moser K2 cutoff", verify_rho_moser_integral(k2, constants, Interval::closed), 0.0, 0.0);
    report("faber-krahn C4", verify_faber_krahn_dirichlet(c4, {0}, Interval::closed), 1.0, 4.0);
    const auto delta = DensityState::from_states(sp, {vec({1, 0})});
    const auto mixed = verify_faber_krahn_mixed(k2, delta, {0}, Interval::closed);
    report("faber-krahn mixed left", mixed.at(0), 0.25, 1.0);
    report("faber-krahn mixed right", mixed.at(1), 1.0, 1.0);
    report("nash K2", verify_pure_moser_nash(k2, f, PureInequality::nash, Interval::half_open), 4.0, 32.0);
    report("faber-krahn pure K2",
           verify_pure_moser_nash(k2, vec({1, 0}), PureInequality::faber_krahn_pure, Interval::closed, {}, {0}), 1.0,
           4.0);
    report("lp-sobolev C4", verify_lp_sobolev(c4, vec({1, 0, -1, 0}), 0.125, 2.0), std::pow(2.0, 0.25),
           4.0 * std::pow(0.25, 0.25));
    report("sobolev-faber-krahn K2", verify_sobolev_to_fk(k2, pure, {0, 1}), 1.0, 8.0);
    const auto l = heat_decay(k2, ProfileFlavor::density(), true);
    for (double s : {0.0, 0.5, 1.0, 3.0}) {
        t.near("K2 L(t)", l(s), 0.5 * std::exp(-2.0 * s), tol);
        t.near("K2 Laplace of dF", laplace_stieltjes(fk2, s), 0.5 * std::exp(-2.0 * s), tol);
    }
    const auto n = verify_n_sobolev(k2, f);
    t.near("n-sobolev K2 lhs", n.lhs, 2.0 * (1.0 / 16.0) / (std::log(4.0) / 2.0), tol);
    t.truth("n-sobolev K2 rhs is ln 2", n.rhs == std::log(2.0));
    return from(t, std::to_string(t.checks) + " values, max error " + sci(t.worst));
}

Outcome log_constants() {
    Tally t;
    t.near("heat integral", heat_sobolev_integral(), 2.0 * std::log(2.0), 1e-8);
    const auto k2 = graph_op(2, complete_edges(2));
    t.truth("n-sobolev rhs is ln 2", verify_n_sobolev(k2, vec({1, -1})).rhs == std::log(2.0));
    return from(t, "integral error " + sci(t.worst));
}

Outcome rn_constants() {
    Tally t;
    const double d3 = sobolev_constant_rn(3);
    t.near("D3", d3, std::cbrt(4.0 * M_PI) / M_PI, 1e-12);
    const double n = 1e4;
    const double dn = sobolev_constant_rn(10000) * std::sqrt(n * M_PI / (2.0 * std::exp(1.0)));
    const double en = moser_constant_rn(10000) * n * M_PI / (2.0 * std::exp(1.0));
    t.truth("D_n rate", dn >= 0.98 && dn <= 1.02);
    t.truth("E_n rate", en >= 0.98 && en <= 1.02);
    return from(t, "D3=" + format_number(d3) + ", D_n scaled " + format_number(dn) + ", E_n scaled " +
                       format_number(en));
}

std::vector<InequalityReport> sweep_with_threads(int threads) {
    SweepOptions o;
    o.seed = 20240101;
    o.count = 1000;
    o.threads = threads;
    o.verify.seed = o.seed;
    return run_sweep(o);
}

Outcome soundness(const std::vector<InequalityReport>& reports) {
    int failed = 0;
    std::string first;
    std::set<std::string> ids;
    for (const auto& r : reports) {
        ids.insert(r.id);
        if (!r.pass && failed++ == 0)
            first = report_line(r);
    }
    if (failed > 0)
        return {false, std::to_string(failed) + " failing reports; first: " + first};
    return {true, std::to_string(reports.size()) + " reports over " + std::to_string(ids.size()) +
                      " inequality ids, 1000 instances, zero failures"};
}

Outcome sandwich() {
    Tally t;
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int h = 1 + trial % 3;
        const int n = std::uniform_int_distribution<int>(2, 8)(rng);
        std::vector<double> w(static_cast<std::size_t>(n));
        for (auto& x : w)
            x = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
        const MeasureSpace space(w, h);
        const auto op = diagonalize(random_block_operator(space, rng), space);
        for (auto iv : {Interval::half_open, Interval::closed}) {
            const auto fu = decay_profile(op, ProfileFlavor::ultra(), iv);
            const auto fd = decay_profile(op, ProfileFlavor::density(), iv);
            std::vector<double> at = fu.positions();
            at.insert(at.end(), fd.positions().begin(), fd.positions().end());
            at.push_back(0.0);
            for (double lambda : at) {
                const double u = fu(lambda), d = fd(lambda);
                t.truth("ultra <= density", u <= d * (1.0 + 1e-12) + 1e-14);
                t.truth("density <= h ultra", d <= h * u * (1.0 + 1e-12) + 1e-14);
            }
        }
    }
    return from(t, std::to_string(t.checks) + " inequalities at breakpoints, 200 operators");
}

Outcome group_equalities() {
    Tally t;
    std::mt19937_64 rng(9);
    for (int n : {4, 16, 64}) {
        // Circulant graph with random symmetric offset weights.
        std::vector<Edge> edges;
        std::vector<double> c(static_cast<std::size_t>(n / 2 + 1));
        for (auto& x : c)
            x = std::uniform_real_distribution<double>(0.2, 1.5)(rng);
        for (int x = 0; x < n; ++x)
            for (int k = 1; k <= n / 2; ++k) {
                const int y = (x + k) % n;
                if (2 * k == n && x >= n / 2)
                    continue;
                edges.push_back({x, y, c[static_cast<std::size_t>(k)]});
            }
        const auto op = graph_op(static_cast<std::size_t>(n), edges);
        const auto f = decay_profile(op, ProfileFlavor::density(), Interval::half_open);
        for (std::size_t i = 0; i < f.positions().size(); ++i) {
            const double lambda = f.positions()[i];
            const auto dv = density_vector(projector(op, Interval::half_open, lambda));
            // Equalities hold to the report threshold; eigenvector error grows as close levels approach.
            for (double d : dv)
                t.near("constant density N=" + std::to_string(n), d, dv[0], 1e-9);
            int dim = 0;
            for (Eigen::Index j = 0; j < op.size(); ++j)
                if (!op.is_kernel(j) && within_threshold(op.eigenvalues()(j), lambda))
                    ++dim;
            t.near("F = dim/N at N=" + std::to_string(n), f(lambda), static_cast<double>(dim) / n, 1e-9);
        }
        // Exact max-over-points heat norm, then the tabulated profile at its own nodes.
        const auto exact = heat_function(op, ProfileFlavor::density(), true);
        for (double s : log_grid(1e-3, 1e2, 40))
            t.near("L = Laplace(dF) at N=" + std::to_string(n), exact(s), laplace_stieltjes(f, s), 1e-10);
        const auto l = heat_decay(op, ProfileFlavor::density(), true);
        for (double s : heat_time_grid(op))
            t.near("tabulated L at N=" + std::to_string(n), l(s), laplace_stieltjes(f, s), 1e-10);
    }
    return from(t, std::to_string(t.checks) + " comparisons, max deviation " + sci(t.worst));
}

Outcome lattice_asymptotics() {
    Tally t;
    std::string fits;
    TorusCountOptions opt;
    opt.resolution = 32;
    opt.refine = 0.1;
    for (int d : {1, 2, 3}) {
        const auto sp = symbol_density_profile(lattice_laplacian_symbol(d), log_grid(1e-3, 1e-1, 32), opt);
        const double e = ns_exponent_fit(sp.profile, 1e-3, 1e-1).exponent;
        t.truth("d=" + std::to_string(d) + " slope " + format_number(e), std::abs(e - d / 2.0) <= 0.05 * d / 2.0);
        fits += (fits.empty() ? "" : ", ") + std::string("d=") + std::to_string(d) + ": " + format_number(e);
    }
    return from(t, "slopes " + fits);
}

Outcome cohomology_oracle() {
    Tally t;
    const auto line = load_complex(data("line.cplx"));
    TorusCountOptions opt;
    opt.resolution = 4096;
    std::vector<double> grid;
    for (int i = 0; i <= 389; ++i)
        grid.push_back(0.01 + 0.01 * i);
    const auto f = floquet_density_profile(line, 0, grid, opt);
    for (double lambda : grid)
        t.near("arccos oracle", f.profile(lambda), std::acos(1.0 - lambda / 2.0) / M_PI, 1e-3);
    const double worst = t.worst;
    const auto fit = ns_exponent_fit(floquet_density_profile(line, 0, log_grid(1e-3, 1e-1, 32), opt).profile, 1e-3, 1e-1);
    t.truth("line exponent " + format_number(fit.exponent), std::abs(fit.exponent - 0.5) <= 0.02);
    t.truth("alpha=1 not applicable", !sobolev_exponent(1.0).has_value());
    t.truth("alpha=4 gives p=4", sobolev_exponent(4.0) == 4.0);
    return from(t, "max deviation " + sci(worst) + ", exponent " + format_number(fit.exponent));
}

Outcome power_bound() {
    Tally t;
    std::string eps_text;
    for (double a : {1.5, 2.0, 3.0}) {
        const auto f = MonotoneProfile::power(1.0, a);
        const auto g = g_transform(f);
        const double eps = largest_doubling_epsilon(f, 1.0, 64);
        t.truth("doubling holds at eps", eps > 0.0 && check_doubling(f, eps, 1.0, 64));
        for (double lambda : log_grid(1e-3, 1e3, 13)) {
            const double ratio = lambda * g(lambda) / f(lambda);
            t.near("lambda G / F at alpha=" + format_number(a), ratio, a / (a - 1.0), 1e-12 * a / (a - 1.0));
            t.truth("bound 2 + 1/eps", ratio <= 2.0 + 1.0 / eps);
        }
        eps_text += (eps_text.empty() ? "" : ", ") + std::string("eps(") + format_number(a) + ")=" + sci(eps);
    }
    return from(t, eps_text);
}

Outcome young() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) { return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * u(rng)); };
    int failed = 0;
    std::string first;
    for (int trial = 0; trial < 100000; ++trial) {
        MonotoneProfile f;
        if (trial % 4 == 0) {
            f = MonotoneProfile::power(log_uniform(1e-2, 1e2), log_uniform(0.3, 4.0));
        } else {
            const int k = 1 + static_cast<int>(u(rng) * 8);
            std::vector<double> pos;
            for (int i = 0; i < k; ++i)
                pos.push_back(log_uniform(1e-3, 1e3));
            std::sort(pos.begin(), pos.end());
            pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
            std::vector<Breakpoint> b;
            for (double p : pos)
                b.push_back({p, log_uniform(1e-3, 1e3)});
            f = MonotoneProfile::step(b, trial % 4 == 1 ? log_uniform(1e-3, 1.0) : 0.0);
        }
        const auto r = verify_young(f, log_uniform(1e-4, 1e4), log_uniform(1e-4, 1e4));
        if (!r.pass && failed++ == 0)
            first = report_line(r);
    }
    if (failed > 0)
        return {false, std::to_string(failed) + " violations; first: " + first};
    return {true, "100000 triples, zero violations"};
}

Outcome determinism(const std::vector<InequalityReport>& one) {
    const auto dir = fs::temp_directory_path() / "specdens_acceptance";
    fs::create_directories(dir);
    auto write = [&](int threads, const std::vector<InequalityReport>& rs) {
        const auto path = dir / ("sweep_threads_" + std::to_string(threads) + ".jsonl");
        std::ofstream f(path, std::ios::binary);
        write_jsonl(f, rs);
        return path;
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    };
    const auto p1 = write(1, one);
    const auto p4 = write(4, sweep_with_threads(4));
    const auto p8 = write(8, sweep_with_threads(8));
    const auto a = slurp(p1), b = slurp(p4), c = slurp(p8);
    if (a != b || a != c)
        return {false, "report files differ between thread counts"};
    return {true, "1, 4 and 8 threads: " + std::to_string(a.size()) + " identical bytes"};
}

} // namespace

int main() {
    bool all = true;
    auto line = [&](int id, const std::string& name, const std::function<Outcome()>& run) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        all = all && o.pass;
        char time[32];
        std::snprintf(time, sizeof time, "%.1fs", secs);
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << "  " << name << ": " << o.detail << " ("
                  << time << ")" << std::endl;
    };

    std::vector<InequalityReport> sweep;
    line(1, "hand examples", hand_examples);
    line(2, "log constants", log_constants);
    line(3, "Euclidean constants", rn_constants);
    line(4, "soundness sweep", [&] {
        sweep = sweep_with_threads(1);
        return soundness(sweep);
    });
    line(5, "ultra/density sandwich", sandwich);
    line(6, "group equalities", group_equalities);
    line(7, "lattice asymptotics", lattice_asymptotics);
    line(8, "cohomology oracle", cohomology_oracle);
    line(9, "power profile bound", power_bound);
    line(10, "Young property", young);
    line(11, "determinism", [&] { return determinism(sweep); });
    return all ? 0 : 1;
}
