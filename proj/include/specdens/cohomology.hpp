#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invariant.hpp"
#include "operators.hpp"
#include "verifiers.hpp"

namespace specdens {

using Simplex = std::vector<int>;

// ---------------------------------------------------------------------------------
// Finite complexes

/// Simplices by degree as sorted vertex tuples; degree k holds (k+1)-tuples.
class SimplicialComplex {
public:
    SimplicialComplex() = default;

    /// The listed simplices must already contain all of their faces.
    static SimplicialComplex from_simplices(std::vector<Simplex> list) { return build(std::move(list), false); }

    /// The listed simplices together with all of their faces.
    static SimplicialComplex closure(std::vector<Simplex> list) { return build(std::move(list), true); }

    int top_degree() const noexcept { return static_cast<int>(cells_.size()) - 1; }

    std::size_t count(int k) const {
        return k >= 0 && k <= top_degree() ? cells_[static_cast<std::size_t>(k)].size() : 0;
    }

    const std::vector<Simplex>& simplices(int k) const {
        if (k < 0 || k > top_degree())
            throw std::out_of_range("complex has no simplices of degree " + std::to_string(k));
        return cells_[static_cast<std::size_t>(k)];
    }

    /// Index of a sorted simplex within its degree, or -1.
    int index_of(const Simplex& s) const {
        const int k = static_cast<int>(s.size()) - 1;
        if (k < 0 || k > top_degree())
            return -1;
        const auto& v = cells_[static_cast<std::size_t>(k)];
        const auto it = std::lower_bound(v.begin(), v.end(), s);
        return it != v.end() && *it == s ? static_cast<int>(it - v.begin()) : -1;
    }

private:
    static SimplicialComplex build(std::vector<Simplex> list, bool close) {
        std::vector<std::vector<Simplex>> by_degree;
        auto add = [&](Simplex s) {
            const auto k = s.size() - 1;
            if (by_degree.size() <= k)
                by_degree.resize(k + 1);
            by_degree[k].push_back(std::move(s));
        };
        for (auto& s : list) {
            if (s.empty())
                throw std::invalid_argument("complex: empty simplex");
            std::sort(s.begin(), s.end());
            if (std::adjacent_find(s.begin(), s.end()) != s.end())
                throw std::invalid_argument("complex: simplex with a repeated vertex");
            if (s.front() < 0)
                throw std::invalid_argument("complex: vertices must be nonnegative");
            if (close) {
                const std::size_t m = s.size();
                for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
                    Simplex face;
                    for (std::size_t i = 0; i < m; ++i)
                        if (mask >> i & 1u)
                            face.push_back(s[i]);
                    add(std::move(face));
                }
            } else {
                add(s);
            }
        }
        SimplicialComplex cx;
        for (auto& v : by_degree) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        while (!by_degree.empty() && by_degree.back().empty())
            by_degree.pop_back();
        cx.cells_ = std::move(by_degree);
        // Vertices of higher simplices count as listed 0-simplices.
        if (!cx.cells_.empty()) {
            auto& vertices = cx.cells_[0];
            for (std::size_t k = 1; k < cx.cells_.size(); ++k)
                for (const auto& s : cx.cells_[k])
                    for (int v : s)
                        vertices.push_back({v});
            std::sort(vertices.begin(), vertices.end());
            vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
        }
        for (std::size_t k = 2; k < cx.cells_.size(); ++k)
            for (const auto& s : cx.cells_[k])
                for (std::size_t i = 0; i < s.size(); ++i) {
                    Simplex face = s;
                    face.erase(face.begin() + static_cast<std::ptrdiff_t>(i));
                    if (cx.index_of(face) < 0)
                        throw std::invalid_argument("complex: face " + to_string(face) + " of " + to_string(s) +
                                                    " is missing");
                }
        return cx;
    }

    static std::string to_string(const Simplex& s) {
        std::string out = "(";
        for (std::size_t i = 0; i < s.size(); ++i)
            out += (i ? " " : "") + std::to_string(s[i]);
        return out + ")";
    }

    std::vector<std::vector<Simplex>> cells_;
};

/// d_k: rows are (k+1)-simplices, columns k-simplices, entry (-1)^i for the face that omits
/// the i-th vertex. Zero rows when the complex stops at degree k.
inline Eigen::MatrixXi coboundary(const SimplicialComplex& cx, int k) {
    const auto rows = static_cast<Eigen::Index>(cx.count(k + 1));
    const auto cols = static_cast<Eigen::Index>(cx.count(k));
    if (k < 0 || cols == 0)
        throw std::invalid_argument("coboundary: complex has no simplices of degree " + std::to_string(k));
    Eigen::MatrixXi d = Eigen::MatrixXi::Zero(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& s = cx.simplices(k + 1)[static_cast<std::size_t>(r)];
        for (std::size_t i = 0; i < s.size(); ++i) {
            Simplex face = s;
            face.erase(face.begin() + static_cast<std::ptrdiff_t>(i));
            d(r, cx.index_of(face)) = i % 2 == 0 ? 1 : -1;
        }
    }
    return d;
}

/// Checks d_{k+1} d_k = 0 exactly for every k.
inline void check_coboundaries(const SimplicialComplex& cx) {
    for (int k = 0; k + 2 <= cx.top_degree(); ++k)
        if ((coboundary(cx, k + 1) * coboundary(cx, k)).cwiseAbs().maxCoeff() != 0)
            throw std::logic_error("coboundary: d_" + std::to_string(k + 1) + " d_" + std::to_string(k) + " != 0");
}

/// A = d_k^T d_k on k-cochains with the counting measure; kernel modes are flagged.
inline SpectralOperator up_laplacian(const SimplicialComplex& cx, int k, double kappa = 1e-10) {
    if (cx.count(k) == 0 || cx.count(k + 1) == 0)
        throw std::invalid_argument("up_laplacian: degrees " + std::to_string(k) + " and " + std::to_string(k + 1) +
                                    " must be present");
    check_coboundaries(cx);
    const MatrixXd d = coboundary(cx, k).cast<double>();
    return diagonalize(d.transpose() * d, MeasureSpace::counting(cx.count(k)), kappa);
}

/// dim(ker d_k ∩ ker d_{k-1}^T), from the null space of the Hodge Laplacian.
inline int harmonic_dim(const SimplicialComplex& cx, int k) {
    const auto n = static_cast<Eigen::Index>(cx.count(k));
    if (n == 0)
        throw std::invalid_argument("harmonic_dim: complex has no simplices of degree " + std::to_string(k));
    check_coboundaries(cx);
    const MatrixXd up = coboundary(cx, k).cast<double>();
    MatrixXd l = up.transpose() * up;
    if (k > 0) {
        const MatrixXd down = coboundary(cx, k - 1).cast<double>();
        l += down * down.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(l, Eigen::EigenvaluesOnly);
    const double cut = 1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    return static_cast<int>((es.eigenvalues().array() <= cut).count());
}

// ---------------------------------------------------------------------------------
// Z^d-periodic complexes

/// A vertex of the cover: a fundamental-domain vertex translated by a lattice vector.
struct LiftedVertex {
    int base = 0;
    std::vector<int> shift;

    friend bool operator<(const LiftedVertex& a, const LiftedVertex& b) {
        return a.base != b.base ? a.base < b.base : a.shift < b.shift;
    }
    friend bool operator==(const LiftedVertex& a, const LiftedVertex& b) {
        return a.base == b.base && a.shift == b.shift;
    }
};

using LiftedSimplex = std::vector<LiftedVertex>;

/// Incidence of the quotient coboundary: d(xi)[row, col] += sign * exp(i xi . shift).
struct TwistedEntry {
    int row = 0;
    int col = 0;
    int sign = 0;
    std::vector<int> shift;
};

struct TwistedCoboundary {
    int rows = 0;
    int cols = 0;
    int lattice_dim = 0;
    std::vector<TwistedEntry> entries;

    Eigen::MatrixXcd at(const double* xi) const {
        Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(rows, cols);
        for (const auto& e : entries) {
            double phase = 0.0;
            for (int i = 0; i < lattice_dim; ++i)
                phase += xi[i] * e.shift[static_cast<std::size_t>(i)];
            d(e.row, e.col) += static_cast<double>(e.sign) * std::polar(1.0, phase);
        }
        return d;
    }
};

/// Finite fundamental domain plus Z^d translations. Each orbit of simplices is stored once,
/// translated so that its first vertex has shift zero; vertex order is (base, shift).
class PeriodicComplex {
public:
    PeriodicComplex() = default;

    /// Builds the quotient from lifted simplices; every face must be present up to translation.
    PeriodicComplex(int lattice_dim, std::vector<LiftedSimplex> list) : d_(lattice_dim) {
        if (lattice_dim < 0)
            throw std::invalid_argument("periodic complex: negative lattice dimension");
        for (auto& s : list) {
            if (s.empty())
                throw std::invalid_argument("periodic complex: empty simplex");
            for (const auto& v : s)
                if (static_cast<int>(v.shift.size()) != d_)
                    throw std::invalid_argument("periodic complex: lattice vector has the wrong dimension");
            auto c = canonical(std::move(s)).first;
            if (std::adjacent_find(c.begin(), c.end()) != c.end())
                throw std::invalid_argument("periodic complex: simplex with a repeated vertex");
            const auto k = c.size() - 1;
            if (cells_.size() <= k)
                cells_.resize(k + 1);
            cells_[k].push_back(std::move(c));
        }
        for (auto& v : cells_) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        if (!cells_.empty()) {
            auto& vertices = cells_[0];
            for (std::size_t k = 1; k < cells_.size(); ++k)
                for (const auto& s : cells_[k])
                    for (const auto& v : s)
                        vertices.push_back({{v.base, std::vector<int>(static_cast<std::size_t>(d_), 0)}});
            std::sort(vertices.begin(), vertices.end());
            vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
        }
        for (int k = 0; k + 1 <= top_degree(); ++k)
            coboundaries_.push_back(build_coboundary(k));
        check_coboundaries();
    }

    int lattice_dim() const noexcept { return d_; }
    int top_degree() const noexcept { return static_cast<int>(cells_.size()) - 1; }

    std::size_t count(int k) const {
        return k >= 0 && k <= top_degree() ? cells_[static_cast<std::size_t>(k)].size() : 0;
    }

    const std::vector<LiftedSimplex>& simplices(int k) const {
        if (k < 0 || k > top_degree())
            throw std::out_of_range("complex has no simplices of degree " + std::to_string(k));
        return cells_[static_cast<std::size_t>(k)];
    }

    /// d_k with lattice phases; empty rows when the complex stops at degree k.
    TwistedCoboundary coboundary(int k) const {
        if (k < 0 || count(k) == 0)
            throw std::invalid_argument("coboundary: complex has no simplices of degree " + std::to_string(k));
        if (k >= static_cast<int>(coboundaries_.size()))
            return {0, static_cast<int>(count(k)), d_, {}};
        return coboundaries_[static_cast<std::size_t>(k)];
    }

    /// The finite complex when there is no lattice, with vertices labelled by base index.
    SimplicialComplex finite() const {
        if (d_ != 0)
            throw std::invalid_argument("complex is periodic; use a truncation");
        std::vector<Simplex> list;
        for (const auto& degree : cells_)
            for (const auto& s : degree) {
                Simplex t;
                for (const auto& v : s)
                    t.push_back(v.base);
                list.push_back(std::move(t));
            }
        return SimplicialComplex::from_simplices(std::move(list));
    }

private:
    // Sorted and translated so the first vertex has shift zero; returns the translation removed.
    static std::pair<LiftedSimplex, std::vector<int>> canonical(LiftedSimplex s) {
        std::sort(s.begin(), s.end());
        std::vector<int> t = s.front().shift;
        for (auto& v : s)
            for (std::size_t i = 0; i < t.size(); ++i)
                v.shift[i] -= t[i];
        return {std::move(s), std::move(t)};
    }

    int index_of(int k, const LiftedSimplex& s) const {
        const auto& v = cells_[static_cast<std::size_t>(k)];
        const auto it = std::lower_bound(v.begin(), v.end(), s);
        return it != v.end() && *it == s ? static_cast<int>(it - v.begin()) : -1;
    }

    TwistedCoboundary build_coboundary(int k) const {
        TwistedCoboundary d{static_cast<int>(count(k + 1)), static_cast<int>(count(k)), d_, {}};
        for (int r = 0; r < d.rows; ++r) {
            const auto& s = cells_[static_cast<std::size_t>(k + 1)][static_cast<std::size_t>(r)];
            for (std::size_t i = 0; i < s.size(); ++i) {
                LiftedSimplex face = s;
                face.erase(face.begin() + static_cast<std::ptrdiff_t>(i));
                auto [c, t] = canonical(std::move(face));
                const int col = index_of(k, c);
                if (col < 0)
                    throw std::invalid_argument("periodic complex: a face of a degree-" + std::to_string(k + 1) +
                                                " simplex is missing");
                d.entries.push_back({r, col, i % 2 == 0 ? 1 : -1, std::move(t)});
            }
        }
        return d;
    }

    // d_{k+1}(xi) d_k(xi) = 0 for all xi: for each entry, the coefficient of every lattice
    // character must cancel, which is an exact integer check.
    void check_coboundaries() const {
        for (std::size_t k = 0; k + 1 < coboundaries_.size(); ++k) {
            std::map<std::tuple<int, int, std::vector<int>>, int> sum;
            const auto& a = coboundaries_[k + 1];
            const auto& b = coboundaries_[k];
            for (const auto& x : a.entries)
                for (const auto& y : b.entries) {
                    if (y.row != x.col)
                        continue;
                    std::vector<int> t = x.shift;
                    for (std::size_t i = 0; i < t.size(); ++i)
                        t[i] += y.shift[i];
                    sum[{x.row, y.col, t}] += x.sign * y.sign;
                }
            for (const auto& [key, v] : sum)
                if (v != 0)
                    throw std::logic_error("twisted coboundary: d_" + std::to_string(k + 1) + " d_" +
                                           std::to_string(k) + " != 0");
        }
    }

    int d_ = 0;
    std::vector<std::vector<LiftedSimplex>> cells_;
    std::vector<TwistedCoboundary> coboundaries_;
};

/// Real coboundary of the periodic truncation to (Z/N)^d: cochain index is
/// simplex + count * cell, cells enumerated with the last axis fastest.
inline MatrixXd truncated_coboundary(const PeriodicComplex& pcx, int k, int n) {
    if (n < 1)
        throw std::invalid_argument("truncation size must be positive");
    const auto tw = pcx.coboundary(k);
    const int d = pcx.lattice_dim();
    long cells = 1;
    for (int i = 0; i < d; ++i)
        cells *= n;
    MatrixXd out = MatrixXd::Zero(tw.rows * cells, tw.cols * cells);
    std::vector<int> idx(static_cast<std::size_t>(d));
    for (long c = 0; c < cells; ++c) {
        long rest = c;
        for (int i = d - 1; i >= 0; --i) {
            idx[static_cast<std::size_t>(i)] = static_cast<int>(rest % n);
            rest /= n;
        }
        for (const auto& e : tw.entries) {
            long target = 0;
            for (int i = 0; i < d; ++i) {
                const int j = ((idx[static_cast<std::size_t>(i)] + e.shift[static_cast<std::size_t>(i)]) % n + n) % n;
                target = target * n + j;
            }
            out(e.row + tw.rows * c, e.col + tw.cols * target) += e.sign;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------------
// Complex files

namespace detail {

inline int parse_int(const std::string& tok, const std::string& where) {
    int v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw std::invalid_argument(where + ": expected an integer, got '" + tok + "'");
    return v;
}

inline std::vector<std::string> tokens(std::string line) {
    for (char& ch : line)
        if (ch == '(' || ch == ')' || ch == ',')
            ch = ' ';
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string t;
    while (in >> t)
        out.push_back(t);
    return out;
}

} // namespace detail

/// Complex file: one simplex per line as vertex integers; "dim d" sets the lattice rank and
/// "v -> w + t1 ... td" declares v as the translate of w by t. '#' starts a comment.
inline PeriodicComplex parse_complex(std::istream& in, const std::string& name = "complex") {
    int dim = 0;
    bool dim_set = false;
    std::map<int, LiftedVertex> images;
    std::vector<std::pair<int, std::vector<int>>> raw;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = name + ":" + std::to_string(lineno);
        line = line.substr(0, line.find('#'));
        for (const char* arrow : {"→", "->"}) {
            const auto at = line.find(arrow);
            if (at != std::string::npos)
                line.replace(at, std::string(arrow).size(), " -> ");
        }
        auto t = detail::tokens(line);
        if (t.empty())
            continue;
        if (t[0] == "dim") {
            if (t.size() != 2 || dim_set || !raw.empty() || !images.empty())
                throw std::invalid_argument(where + ": 'dim d' must come once, before everything else");
            dim = detail::parse_int(t[1], where);
            if (dim < 0 || dim > 3)
                throw std::invalid_argument(where + ": lattice dimension must be between 0 and 3");
            dim_set = true;
            continue;
        }
        const auto arrow = std::find(t.begin(), t.end(), "->");
        if (arrow != t.end()) {
            if (arrow - t.begin() != 1 || t.size() != static_cast<std::size_t>(4 + dim) || t[3] != "+")
                throw std::invalid_argument(where + ": expected 'v -> w + lattice vector' with " +
                                            std::to_string(dim) + " components");
            const int v = detail::parse_int(t[0], where);
            LiftedVertex img{detail::parse_int(t[2], where), {}};
            for (int i = 0; i < dim; ++i)
                img.shift.push_back(detail::parse_int(t[4 + static_cast<std::size_t>(i)], where));
            if (images.count(v))
                throw std::invalid_argument(where + ": vertex " + std::to_string(v) + " identified twice");
            images[v] = std::move(img);
            continue;
        }
        std::vector<int> s;
        for (const auto& tok : t)
            s.push_back(detail::parse_int(tok, where));
        raw.emplace_back(lineno, std::move(s));
    }
    for (const auto& [v, img] : images)
        if (images.count(img.base))
            throw std::invalid_argument(name + ": vertex " + std::to_string(v) +
                                        " is identified with a vertex that is itself a translate");
    std::vector<LiftedSimplex> list;
    for (const auto& [lineno, s] : raw) {
        LiftedSimplex lifted;
        for (int v : s) {
            if (v < 0)
                throw std::invalid_argument(name + ":" + std::to_string(lineno) + ": vertices must be nonnegative");
            const auto it = images.find(v);
            lifted.push_back(it != images.end() ? it->second
                                                : LiftedVertex{v, std::vector<int>(static_cast<std::size_t>(dim), 0)});
        }
        list.push_back(std::move(lifted));
    }
    if (list.empty())
        throw std::invalid_argument(name + ": no simplices");
    try {
        return PeriodicComplex(dim, std::move(list));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(name + ": " + e.what());
    }
}

inline PeriodicComplex load_complex(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open complex file " + path);
    return parse_complex(in, path);
}

// ---------------------------------------------------------------------------------
// Spectral density of the cover

/// The fibre field xi -> d_k(xi)^* d_k(xi) as a torus symbol.
inline TorusSymbol floquet_symbol(const PeriodicComplex& pcx, int k) {
    if (pcx.lattice_dim() < 1)
        throw std::invalid_argument("floquet: complex has no lattice directions");
    if (pcx.count(k + 1) == 0)
        throw std::invalid_argument("floquet: degree " + std::to_string(k + 1) + " must be present");
    auto d = pcx.coboundary(k);
    return matrix_symbol(
        pcx.lattice_dim(), d.cols,
        [d = std::move(d)](const double* xi) {
            const Eigen::MatrixXcd m = d.at(xi);
            return Eigen::MatrixXcd(m.adjoint() * m);
        },
        "floquet degree " + std::to_string(k));
}

/// Gamma-trace of chi(]0, lambda]) of d_k^* d_k on the cover, tabulated on the grid. Kernel
/// modes at each xi are dropped with the threshold kappa.
inline SymbolProfile floquet_density_profile(const PeriodicComplex& pcx, int k, const std::vector<double>& grid,
                                             const TorusCountOptions& opt = {}, double tolerance = infinity) {
    if (opt.resolution < 8)
        throw std::invalid_argument("floquet: resolution must be at least 8 per axis");
    return symbol_density_profile(floquet_symbol(pcx, k), grid, opt, tolerance);
}

/// Union of grids, sorted, exact duplicates removed.
inline std::vector<double> merge_grids(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// p = 2 alpha / (alpha - 2) for alpha > 2; nothing otherwise.
inline std::optional<double> sobolev_exponent(double alpha) {
    if (!(alpha > 2.0) || !std::isfinite(alpha))
        return std::nullopt;
    return 2.0 * alpha / (alpha - 2.0);
}

inline std::string sobolev_verdict(double alpha) {
    std::ostringstream out;
    out << "alpha=" << alpha;
    if (const auto p = sobolev_exponent(alpha))
        out << " > 2: p=" << *p;
    else
        out << " <= 2: not applicable";
    return out.str();
}

// ---------------------------------------------------------------------------------
// Cochain Sobolev inequality

/// ||a||_p <= 2 C1^{1/2a'} ||d a||_2 with a' = alpha/2 and p = 2 alpha/(alpha - 2), for
/// `trials` random cochains projected to (ker d)^perp. C <= 0 uses the smallest constant
/// dominating the ultracontractive profile of d^T d. Reports the worst ratio.
inline InequalityReport verify_cochain_sobolev(const MatrixXd& d, double c, double alpha, int trials,
                                               const VerifyOptions& opt = {}, json context = json::object()) {
    if (!sobolev_exponent(alpha))
        throw std::domain_error("alpha=" + format_number(alpha) + " <= 2: not applicable");
    if (trials < 1)
        throw std::invalid_argument("cochain sobolev: trials must be positive");
    const auto op = diagonalize(d.transpose() * d, MeasureSpace::counting(static_cast<std::size_t>(d.cols())));
    const double a = alpha / 2.0;
    const auto f = decay_profile(op, ProfileFlavor::ultra(), Interval::half_open);
    if (c <= 0.0)
        c = dominating_constant(f, a);
    if (!std::isfinite(c) || !dominated_by_power(f, c, a))
        throw std::domain_error("(C, alpha/2) does not dominate the spectral profile");
    if (!(c > 0.0))
        throw std::domain_error("cochain sobolev: operator has no spectrum off the kernel");
    const auto k = polynomial_constants(c, a);
    const double factor = 2.0 * std::pow(k.c1, 1.0 / (2.0 * a));
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst_lhs = 0.0, worst_rhs = 0.0, worst_ratio = -1.0;
    int worst_trial = 0;
    for (int t = 0; t < trials; ++t) {
        VectorXd x(op.size());
        for (Eigen::Index i = 0; i < x.size(); ++i)
            x(i) = g(rng);
        const auto p = project_to_range(op, x);
        const double lhs = lp_norm(op.space(), p.state, k.p);
        const double rhs = factor * (d * p.state).norm();
        const double ratio = lhs / rhs;
        if (ratio > worst_ratio) {
            worst_ratio = ratio;
            worst_lhs = lhs;
            worst_rhs = rhs;
            worst_trial = t;
        }
    }
    auto w = detail::witness(op, "", Interval::half_open);
    w.parameters = std::move(context);
    w.parameters["C"] = c;
    w.parameters["alpha"] = alpha;
    w.parameters["p"] = k.p;
    w.parameters["trials"] = trials;
    w.parameters["worst_trial"] = worst_trial;
    return detail::make_report("cochain-sobolev", worst_lhs, worst_rhs, std::move(w), opt);
}

inline InequalityReport verify_cochain_sobolev(const SimplicialComplex& cx, int k, double c, double alpha, int trials,
                                               const VerifyOptions& opt = {}) {
    check_coboundaries(cx);
    if (cx.count(k + 1) == 0)
        throw std::invalid_argument("cochain sobolev: degree " + std::to_string(k + 1) + " must be present");
    return verify_cochain_sobolev(coboundary(cx, k).cast<double>(), c, alpha, trials, opt,
                                  {{"degree", k}, {"truncation", "finite"}});
}

/// Periodic truncation of the cover to (Z/N)^d.
inline InequalityReport verify_cochain_sobolev(const PeriodicComplex& pcx, int k, int n, double c, double alpha,
                                               int trials, const VerifyOptions& opt = {}) {
    if (pcx.count(k + 1) == 0)
        throw std::invalid_argument("cochain sobolev: degree " + std::to_string(k + 1) + " must be present");
    return verify_cochain_sobolev(truncated_coboundary(pcx, k, n), c, alpha, trials, opt,
                                  {{"degree", k}, {"truncation", "periodic " + std::to_string(n)}});
}

} // namespace specdens
