#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cohomology.hpp"
#include "families.hpp"
#include "invariant.hpp"
#include "profile_io.hpp"
#include "report_io.hpp"
#include "sweep.hpp"

namespace specdens::cli {

/// Thrown for bad flags, config entries and unreadable inputs; maps to exit code 2.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Resolved settings of one run. Every field has a config-file key of the same name.
struct RunConfig {
    std::string command;
    std::string input;
    std::vector<std::string> inputs;
    std::string family;
    std::string flavor = "density";
    std::string interval;
    std::uint64_t seed = 1;
    int trials = -1;
    std::string out;
    std::string summary;
    double tol = 1e-9;
    double kappa = 1e-10;
    std::string checks = "all";
    int threads = 1;
    std::string omega;
    std::string parts;
    int degree = 0;
    int resolution = 0;
    double refine = -1.0;
    double window_lo = 1e-3;
    double window_hi = 1e-1;
    double alpha = 0.0;
    double constant = 0.0;
    int truncation = 16;
    bool tables = false;

    /// One "key=value" line per setting, in a fixed order.
    std::string canonical() const {
        std::ostringstream o;
        o << "command=" << command << "\ninput=" << input << "\ninputs=";
        for (std::size_t i = 0; i < inputs.size(); ++i)
            o << (i ? "," : "") << inputs[i];
        o << "\nfamily=" << family << "\nflavor=" << flavor << "\ninterval=" << interval << "\nseed=" << seed
          << "\ntrials=" << trials << "\ntol=" << format_number(tol) << "\nkappa=" << format_number(kappa)
          << "\nchecks=" << checks << "\nomega=" << omega << "\nparts=" << parts << "\ndegree=" << degree
          << "\nresolution=" << resolution << "\nrefine=" << format_number(refine)
          << "\nwindow_lo=" << format_number(window_lo) << "\nwindow_hi=" << format_number(window_hi)
          << "\nalpha=" << format_number(alpha) << "\nC=" << format_number(constant)
          << "\ntruncation=" << truncation << "\ntables=" << tables << "\n";
        return o.str();
    }

    /// Digest of the settings that determine the results (output paths and the thread
    /// count are excluded).
    std::string digest() const {
        Fnv1a h;
        h.text(canonical());
        return h.hex();
    }

    void validate() const {
        if (!(tol > 0.0) || !(kappa > 0.0))
            throw UsageError("tolerances must be positive");
        if (threads < 1)
            throw UsageError("threads must be at least 1");
        if (!(window_lo > 0.0) || !(window_hi > window_lo))
            throw UsageError("fit window needs 0 < window_lo < window_hi");
        if (truncation < 1)
            throw UsageError("truncation must be positive");
    }
};

// ---------------------------------------------------------------------------------
// Small parsers

/// Vertex lists such as "0-7", "1,4,9" or "0-3,8".
inline std::vector<int> parse_region(const std::string& text) {
    std::vector<int> out;
    std::string item;
    std::istringstream in(text);
    auto number = [&](const std::string& t) {
        std::size_t pos = 0;
        int v = -1;
        try {
            v = std::stoi(t, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != t.size() || v < 0)
            throw UsageError("region '" + text + "': '" + t + "' is not a vertex index");
        return v;
    };
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (item.empty())
            continue;
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            out.push_back(number(item));
            continue;
        }
        const int a = number(item.substr(0, dash));
        const int b = number(item.substr(dash + 1));
        if (b < a)
            throw UsageError("region '" + text + "': empty range " + item);
        for (int v = a; v <= b; ++v)
            out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Partitions as regions separated by ';', e.g. "0-3;4-7".
inline std::vector<std::vector<int>> parse_parts(const std::string& text) {
    std::vector<std::vector<int>> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ';'))
        if (item.find_first_not_of(' ') != std::string::npos)
            out.push_back(parse_region(item));
    return out;
}

inline ProfileFlavor parse_flavor(const std::string& text) {
    if (text == "ultra")
        return ProfileFlavor::ultra();
    if (text == "density")
        return ProfileFlavor::density();
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    if (colon != std::string::npos && head == "pointwise") {
        const auto v = parse_region(text.substr(colon + 1));
        if (v.size() != 1)
            throw UsageError("flavor '" + text + "': pointwise needs one vertex");
        return ProfileFlavor::pointwise(v[0]);
    }
    if (colon != std::string::npos && head == "region")
        return ProfileFlavor::over(parse_region(text.substr(colon + 1)));
    throw UsageError("unknown flavor '" + text + "' (expected ultra, density, pointwise:x or region:list)");
}

inline std::vector<Interval> parse_intervals(const std::string& text) {
    if (text == "both")
        return {Interval::half_open, Interval::closed};
    try {
        return {interval_from_string(text)};
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string(e.what()) + " or both");
    }
}

/// "key = value" lines; '#' starts a comment. Keys are the long flag names.
inline std::map<std::string, std::string> read_config(std::istream& in, const std::string& name) {
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = line.substr(0, line.find('#'));
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(name + ":" + std::to_string(lineno) + ": expected 'key = value'");
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        const auto key = trim(line.substr(0, eq));
        if (key.empty())
            throw UsageError(name + ":" + std::to_string(lineno) + ": empty key");
        if (out.count(key))
            throw UsageError(name + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

// ---------------------------------------------------------------------------------
// Outputs

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + path);
    f << text;
}

/// Writes to the --out path, or to `out` when no path is set.
inline void emit(const RunConfig& c, std::ostream& out, const std::string& text) {
    if (c.out.empty())
        out << text;
    else
        write_text(c.out, text);
}

inline std::string jsonl(const std::vector<InequalityReport>& reports) {
    std::ostringstream o;
    write_jsonl(o, reports);
    return o.str();
}

// ---------------------------------------------------------------------------------
// Operator sources

namespace detail {

inline OperatorInput load_operator(const RunConfig& c) {
    if (!c.family.empty() && !c.input.empty())
        throw UsageError("give either --family or --input, not both");
    if (!c.input.empty())
        return read_operator_file(c.input);
    if (!c.family.empty())
        return family_operator(c.family);
    throw UsageError("an operator is needed: --family or --input");
}

// "lattice_laplacian d=2" style family names for symbols and R^n.
inline bool symbol_family(const std::string& family, std::string& name, int& arg) {
    std::string s = family;
    for (char& ch : s)
        if (ch == ':' || ch == '=')
            ch = ' ';
    std::istringstream in(s);
    std::string key;
    in >> name;
    if (name != "lattice_laplacian" && name != "bilaplacian" && name != "rn_laplacian")
        return false;
    std::vector<std::string> rest;
    while (in >> key)
        rest.push_back(key);
    if (rest.empty() || rest.size() > 2)
        throw UsageError("family '" + family + "': expected '" + name + " d=<dimension>'");
    try {
        std::size_t pos = 0;
        arg = std::stoi(rest.back(), &pos);
        if (pos != rest.back().size())
            throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw UsageError("family '" + family + "': dimension is not an integer");
    }
    if (arg < 1 || (name != "rn_laplacian" && arg > 3))
        throw UsageError("family '" + family + "': dimension out of range");
    return true;
}

inline double symbol_top(const TorusSymbol& sym) {
    TorusCountOptions o;
    o.resolution = 16;
    // Largest eigenvalue sampled on a coarse grid, with a margin.
    double top = 0.0;
    std::vector<double> xi(static_cast<std::size_t>(sym.dimension));
    std::vector<int> idx(static_cast<std::size_t>(sym.dimension), 0);
    while (true) {
        for (std::size_t i = 0; i < xi.size(); ++i)
            xi[i] = 2.0 * M_PI * idx[i] / o.resolution;
        for (double e : sym.eigenvalues_at(xi))
            top = std::max(top, e);
        int axis = sym.dimension - 1;
        while (axis >= 0 && ++idx[static_cast<std::size_t>(axis)] == o.resolution)
            idx[static_cast<std::size_t>(axis--)] = 0;
        if (axis < 0)
            break;
    }
    return 1.05 * top;
}

inline TorusCountOptions count_options(const RunConfig& c, int d) {
    TorusCountOptions o;
    o.resolution = c.resolution > 0 ? c.resolution : (d == 1 ? 4096 : 32);
    o.refine = c.refine >= 0.0 ? c.refine : (d == 1 ? 0.0 : 0.1);
    o.kappa = c.kappa;
    return o;
}

inline std::vector<double> symbol_grid(const RunConfig& c, double top) {
    std::vector<double> lin;
    for (int i = 1; i <= 64; ++i)
        lin.push_back(top * i / 64.0);
    return merge_grids(log_grid(c.window_lo, c.window_hi, 32), lin);
}

inline json fit_json(const ExponentFit& f) {
    return {{"exponent", f.exponent}, {"intercept", f.intercept}, {"residual", f.residual}, {"lo", f.lo}, {"hi", f.hi}};
}

} // namespace detail

// ---------------------------------------------------------------------------------
// Subcommands

/// Spectral profile F with its transforms. Without --out, prints F as CSV; with --out,
/// writes a JSON file holding every output plus CSV siblings.
inline int cmd_profile(const RunConfig& c, std::ostream& out) {
    json j;
    j["config_digest"] = c.digest();
    std::map<std::string, std::string> csv;
    std::string name;
    int arg = 0;
    if (!c.family.empty() && detail::symbol_family(c.family, name, arg)) {
        j["source"] = c.family;
        MonotoneProfile f;
        if (name == "rn_laplacian") {
            f = rn_laplacian_profile(arg);
            csv["F"] = to_csv(f, log_grid(c.window_lo, c.window_hi, 32));
        } else {
            const auto sym = name == "bilaplacian" ? discrete_bilaplacian_symbol(arg) : lattice_laplacian_symbol(arg);
            const auto opt = detail::count_options(c, arg);
            const auto sp = symbol_density_profile(sym, detail::symbol_grid(c, detail::symbol_top(sym)), opt);
            f = sp.profile;
            j["error_estimate"] = sp.error_estimate;
            j["resolution"] = sp.resolution;
            j["refine"] = opt.refine;
            j["exponent_fit"] = detail::fit_json(ns_exponent_fit(f, c.window_lo, c.window_hi));
            csv["F"] = to_csv(f);
        }
        j["F"] = to_json(f);
        const auto g = g_transform(f);
        j["G"] = to_json(g);
        csv["G"] = to_csv(g, g.is_power() ? log_grid(c.window_lo, c.window_hi, 32) : std::vector<double>{});
    } else {
        const auto input = detail::load_operator(c);
        const auto op = diagonalize(input.matrix, input.space, c.kappa);
        const auto flavor = parse_flavor(c.flavor);
        const auto iv = c.interval.empty() ? Interval::half_open : parse_intervals(c.interval).at(0);
        if (c.interval == "both")
            throw UsageError("profile needs a single interval flavor");
        const bool exclude = iv == Interval::half_open;
        j["source"] = input.description;
        j["operator_digest"] = op.digest();
        j["flavor"] = flavor.name();
        j["interval"] = to_string(iv);
        const auto f = decay_profile(op, flavor, iv);
        const auto g = g_transform(f);
        const auto l = heat_decay(op, flavor, exclude);
        j["F"] = to_json(f);
        j["G"] = to_json(g);
        j["L"] = to_json(l);
        csv["F"] = to_csv(f);
        csv["G"] = to_csv(g);
        const auto times = heat_time_grid(op);
        csv["L"] = to_csv(l, l.kind() == DecayProfile::Kind::tabulated ? std::vector<double>{} : times);
        if (exclude) {
            const auto m = heat_decay_integral(op, flavor);
            j["M"] = to_json(m);
            csv["M"] = to_csv(m, m.kind() == DecayProfile::Kind::tabulated ? std::vector<double>{} : times);
            if (c.tables) {
                std::ostringstream t;
                t << "y,H,N\n";
                json rows = json::array();
                for (double y : decade_grid(1e-3, 1e3, 8)) {
                    const double hv = h_of(g, y);
                    const double nv = n_of(m, y);
                    t << format_number(y) << ',' << format_number(hv) << ',' << format_number(nv) << '\n';
                    rows.push_back({number_json(y), number_json(hv), number_json(nv)});
                }
                csv["tables"] = t.str();
                j["tables"] = rows;
            }
        } else if (c.tables) {
            throw UsageError("H/N tables need the half_open flavor");
        }
    }
    if (c.out.empty()) {
        out << csv["F"];
        return 0;
    }
    std::string stem = c.out;
    if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json")
        stem.resize(stem.size() - 5);
    write_text(stem + ".json", j.dump(2) + "\n");
    for (const auto& [key, text] : csv)
        write_text(stem + "_" + key + ".csv", text);
    return 0;
}

/// Seeded verification sweep. "--family random" draws a fresh operator per instance;
/// otherwise the operator is fixed and the states vary per trial.
inline int cmd_verify(const RunConfig& c, std::ostream& out) {
    SweepOptions o;
    o.seed = c.seed;
    o.threads = c.threads;
    try {
        o.checks = parse_checks(c.checks);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    o.intervals = parse_intervals(c.interval.empty() ? "both" : c.interval);
    o.verify.tol = c.tol;
    o.verify.seed = c.seed;
    o.verify.config_digest = c.digest();
    std::vector<InequalityReport> reports;
    if (c.family == "random") {
        o.count = c.trials >= 0 ? c.trials : 1000;
        reports = run_sweep(o);
    } else {
        const auto input = detail::load_operator(c);
        const auto op = diagonalize(input.matrix, input.space, c.kappa);
        const auto omega = c.omega.empty() ? std::vector<int>{} : parse_region(c.omega);
        const auto parts = c.parts.empty() ? std::vector<std::vector<int>>{} : parse_parts(c.parts);
        for (int x : omega)
            if (static_cast<std::size_t>(x) >= op.space().points())
                throw UsageError("omega: vertex " + std::to_string(x) + " is outside the space");
        if (!parts.empty())
            check_partition(op.space(), parts);
        reports = run_trials(op, c.trials >= 0 ? c.trials : 100, o, omega, parts);
    }
    emit(c, out, jsonl(reports));
    if (!c.summary.empty())
        write_text(c.summary, csv_summary(reports));
    return all_pass(reports) ? 0 : 1;
}

/// Spectral density of a complex: Floquet profile, exponent fit and the Sobolev verdict for
/// periodic complexes; Betti numbers and the finite profile otherwise. With --trials the
/// cochain Sobolev inequality is checked as well.
inline int cmd_cohomology(const RunConfig& c, std::ostream& out) {
    if (c.input.empty())
        throw UsageError("cohomology needs a complex file: --input");
    const auto pcx = load_complex(c.input);
    const int k = c.degree;
    if (pcx.count(k) == 0 || pcx.count(k + 1) == 0)
        throw UsageError("complex needs simplices in degrees " + std::to_string(k) + " and " + std::to_string(k + 1));
    VerifyOptions vo;
    vo.tol = c.tol;
    vo.seed = c.seed;
    vo.config_digest = c.digest();
    json j;
    j["config_digest"] = c.digest();
    j["complex"] = c.input;
    j["degree"] = k;
    j["lattice_dim"] = pcx.lattice_dim();
    json counts = json::array();
    for (int d = 0; d <= pcx.top_degree(); ++d)
        counts.push_back(pcx.count(d));
    j["simplices"] = counts;
    std::vector<InequalityReport> reports;
    double alpha = c.alpha;
    if (pcx.lattice_dim() > 0) {
        const auto sym = floquet_symbol(pcx, k);
        const auto opt = detail::count_options(c, pcx.lattice_dim());
        const auto sp = floquet_density_profile(pcx, k, detail::symbol_grid(c, detail::symbol_top(sym)), opt);
        j["F"] = to_json(sp.profile);
        j["error_estimate"] = sp.error_estimate;
        j["resolution"] = sp.resolution;
        j["refine"] = opt.refine;
        j["spectral_gap"] = sp.profile(c.window_lo) == 0.0;
        if (sp.profile(c.window_lo) > 0.0) {
            const auto fit = ns_exponent_fit(sp.profile, c.window_lo, c.window_hi);
            j["exponent_fit"] = detail::fit_json(fit);
            if (!(alpha > 0.0))
                alpha = 2.0 * fit.exponent;
        }
        if (c.trials > 0 && sobolev_exponent(alpha))
            reports.push_back(verify_cochain_sobolev(pcx, k, c.truncation, c.constant, alpha, c.trials, vo));
    } else {
        const auto cx = pcx.finite();
        json betti = json::array();
        for (int d = 0; d <= cx.top_degree(); ++d)
            betti.push_back(harmonic_dim(cx, d));
        j["harmonic_dims"] = betti;
        const auto op = up_laplacian(cx, k, c.kappa);
        j["F"] = to_json(decay_profile(op, parse_flavor(c.flavor), Interval::half_open));
        if (c.trials > 0 && sobolev_exponent(alpha))
            reports.push_back(verify_cochain_sobolev(cx, k, c.constant, alpha, c.trials, vo));
    }
    if (alpha > 0.0) {
        j["alpha"] = alpha;
        const auto p = sobolev_exponent(alpha);
        j["sobolev_p"] = p ? json(*p) : json(nullptr);
        j["verdict"] = sobolev_verdict(alpha);
    }
    json rs = json::array();
    for (const auto& r : reports)
        rs.push_back(to_json(r));
    j["reports"] = rs;
    emit(c, out, j.dump(2) + "\n");
    return all_pass(reports) ? 0 : 1;
}

/// Union of JSONL report files, sorted and de-duplicated.
inline int cmd_report_merge(const RunConfig& c, std::ostream& out) {
    std::vector<std::string> files = c.inputs;
    if (!c.input.empty())
        files.insert(files.begin(), c.input);
    if (files.empty())
        throw UsageError("report-merge needs at least one report file");
    std::vector<std::vector<InequalityReport>> sets;
    for (const auto& path : files) {
        std::ifstream f(path);
        if (!f)
            throw UsageError("cannot open report file " + path);
        try {
            sets.push_back(read_jsonl(f, path));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    std::vector<InequalityReport> merged;
    try {
        merged = merge_reports(sets);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    emit(c, out, jsonl(merged));
    if (!c.summary.empty())
        write_text(c.summary, csv_summary(merged));
    return all_pass(merged) ? 0 : 1;
}

// ---------------------------------------------------------------------------------
// Entry point

/// Parses arguments, applies the config file under the flags and runs the subcommand.
/// Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Spectral density profiles and the inequalities built on them."};
    app.require_subcommand(1);
    app.fallthrough();
    RunConfig c;
    std::string config_path;

    // Flag name, config key and target for every setting.
    app.add_option("--config", config_path, "key = value settings file; flags override it");
    std::map<std::string, CLI::Option*> opts;
    auto opt = [&](const std::string& key, auto& target, const std::string& help) {
        opts[key] = app.add_option("--" + key, target, help);
    };
    opt("input", c.input, "operator file (edge list or dense JSON), complex file or report file");
    opt("family", c.family, "named operator: cycle N, path N, complete N, torus N^d, random, lattice_laplacian d=D, "
                            "bilaplacian d=D, rn_laplacian n=N");
    opt("flavor", c.flavor, "profile flavor: ultra, density, pointwise:x, region:list");
    opt("interval", c.interval, "projector flavor: half_open, closed or both");
    opt("seed", c.seed, "random seed");
    opt("trials", c.trials, "random instances or trials");
    opt("out", c.out, "output path (stdout when absent)");
    opt("summary", c.summary, "CSV summary path for report sets");
    opt("tol", c.tol, "absolute pass tolerance, scaled by max(1, |rhs|)");
    opt("kappa", c.kappa, "kernel threshold relative to the operator norm");
    opt("checks", c.checks, "comma-separated check names or 'all'");
    opt("threads", c.threads, "worker threads");
    opt("omega", c.omega, "region, e.g. 0-7 or 1,3,5");
    opt("parts", c.parts, "partition, e.g. 0-3;4-7");
    opt("degree", c.degree, "cochain degree k");
    opt("resolution", c.resolution, "torus cells per axis (0 picks a default)");
    opt("refine", c.refine, "torus refinement spread (negative picks a default)");
    opt("window_lo", c.window_lo, "lower end of the exponent fit window");
    opt("window_hi", c.window_hi, "upper end of the exponent fit window");
    opt("alpha", c.alpha, "profile exponent alpha for the cochain Sobolev check (0 uses the fit)");
    opt("C", c.constant, "profile constant (0 uses the smallest dominating one)");
    opt("truncation", c.truncation, "periodic truncation size for cochain checks");
    opts["tables"] = app.add_flag("--tables", c.tables, "also write H/N tables on a log grid");

    app.add_subcommand("profile", "spectral profile F and its transforms");
    app.add_subcommand("verify", "seeded inequality checks, one JSON report per line");
    app.add_subcommand("cohomology", "spectral density of a simplicial complex");
    auto* merge = app.add_subcommand("report-merge", "merge JSONL report files");
    merge->add_option("files", c.inputs, "report files");

    try {
        app.parse(argc, argv);
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f)
                throw UsageError("cannot open config file " + config_path);
            for (const auto& [key, value] : read_config(f, config_path)) {
                const auto it = opts.find(key);
                if (it == opts.end())
                    throw UsageError(config_path + ": unknown key '" + key + "'");
                if (it->second->count() > 0)
                    continue;
                if (key == "tables") {
                    if (value != "true" && value != "false" && value != "1" && value != "0")
                        throw UsageError(config_path + ": tables must be true or false");
                    c.tables = value == "true" || value == "1";
                    continue;
                }
                try {
                    it->second->add_result(value);
                    it->second->run_callback();
                } catch (const CLI::Error& e) {
                    throw UsageError(config_path + ": " + key + ": " + e.what());
                }
            }
        }
        c.command = app.get_subcommands().front()->get_name();
        c.validate();
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (c.command == "profile")
            return cmd_profile(c, out);
        if (c.command == "verify")
            return cmd_verify(c, out);
        if (c.command == "cohomology")
            return cmd_cohomology(c, out);
        return cmd_report_merge(c, out);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace specdens::cli
