#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "operators.hpp"

namespace specdens {

struct Edge {
    int u;
    int v;
    double weight = 1.0;
};

/// Graph Laplacian (A f)(x) = (1/mu(x)) sum_y w_xy (f(x) - f(y)) in matrix convention.
/// With counting measure this is D - Adj.
inline MatrixXd graph_laplacian(std::size_t n, const std::vector<Edge>& edges, const std::vector<double>& weights = {}) {
    if (!weights.empty() && weights.size() != n)
        throw std::invalid_argument("graph_laplacian: one weight per vertex");
    MatrixXd q = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& e : edges) {
        if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n || static_cast<std::size_t>(e.v) >= n)
            throw std::invalid_argument("graph_laplacian: edge endpoint out of range");
        if (!(e.weight > 0.0) || !std::isfinite(e.weight))
            throw std::invalid_argument("graph_laplacian: edge weights must be positive");
        if (e.u == e.v)
            continue;
        q(e.u, e.u) += e.weight;
        q(e.v, e.v) += e.weight;
        q(e.u, e.v) -= e.weight;
        q(e.v, e.u) -= e.weight;
    }
    if (!weights.empty())
        for (std::size_t x = 0; x < n; ++x)
            q.row(static_cast<Eigen::Index>(x)) /= weights[x];
    return q;
}

inline std::vector<Edge> cycle_edges(int n) {
    if (n < 3)
        throw std::invalid_argument("cycle needs at least 3 vertices");
    std::vector<Edge> e;
    for (int i = 0; i < n; ++i)
        e.push_back({i, (i + 1) % n, 1.0});
    return e;
}

inline std::vector<Edge> path_edges(int n) {
    if (n < 2)
        throw std::invalid_argument("path needs at least 2 vertices");
    std::vector<Edge> e;
    for (int i = 0; i + 1 < n; ++i)
        e.push_back({i, i + 1, 1.0});
    return e;
}

inline std::vector<Edge> complete_edges(int n) {
    if (n < 2)
        throw std::invalid_argument("complete graph needs at least 2 vertices");
    std::vector<Edge> e;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            e.push_back({i, j, 1.0});
    return e;
}

/// Discrete torus (Z/NZ)^d with nearest-neighbour edges. N = 2 gives single edges.
inline std::vector<Edge> torus_edges(int n, int d) {
    if (n < 2 || d < 1)
        throw std::invalid_argument("torus needs N >= 2 and d >= 1");
    int total = 1;
    for (int i = 0; i < d; ++i)
        total *= n;
    std::vector<Edge> e;
    for (int v = 0; v < total; ++v) {
        int stride = 1;
        for (int axis = 0; axis < d; ++axis) {
            const int coord = (v / stride) % n;
            const int w = v - coord * stride + ((coord + 1) % n) * stride;
            if (n > 2 || coord == 0)
                e.push_back({v, w, 1.0});
            stride *= n;
        }
    }
    return e;
}

/// A named operator together with its measure space.
struct OperatorInput {
    std::string description;
    MatrixXd matrix;
    MeasureSpace space;
};

inline OperatorInput graph_input(std::string description, std::size_t n, const std::vector<Edge>& edges) {
    return {std::move(description), graph_laplacian(n, edges), MeasureSpace::counting(n)};
}

/// Parses family names such as "cycle 4", "path 10", "complete 5", "torus 8^2"
/// (separators ' ', ':' and '=' are accepted).
inline OperatorInput family_operator(const std::string& spec) {
    std::string s = spec;
    for (char& c : s)
        if (c == ':' || c == '=')
            c = ' ';
    std::istringstream in(s);
    std::string name;
    std::string arg;
    in >> name >> arg;
    if (name.empty() || arg.empty())
        throw std::invalid_argument("family '" + spec + "': expected '<name> <size>'");
    auto parse_int = [&](const std::string& t) {
        std::size_t pos = 0;
        int v = 0;
        try {
            v = std::stoi(t, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != t.size())
            throw std::invalid_argument("family '" + spec + "': '" + t + "' is not an integer");
        return v;
    };
    if (name == "cycle") {
        const int n = parse_int(arg);
        return graph_input(spec, static_cast<std::size_t>(n), cycle_edges(n));
    }
    if (name == "path") {
        const int n = parse_int(arg);
        return graph_input(spec, static_cast<std::size_t>(n), path_edges(n));
    }
    if (name == "complete") {
        const int n = parse_int(arg);
        return graph_input(spec, static_cast<std::size_t>(n), complete_edges(n));
    }
    if (name == "torus") {
        const auto caret = arg.find('^');
        const int n = parse_int(arg.substr(0, caret));
        const int d = caret == std::string::npos ? 1 : parse_int(arg.substr(caret + 1));
        int total = 1;
        for (int i = 0; i < d; ++i)
            total *= n;
        return graph_input(spec, static_cast<std::size_t>(total), torus_edges(n, d));
    }
    throw std::invalid_argument("unknown family '" + name + "' (expected cycle, path, complete or torus)");
}

/// Edge-list file: one "u v [weight]" per line; '#' starts a comment. Vertices are
/// 0-based integers; the vertex count is 1 + the largest index.
inline OperatorInput read_edge_list(std::istream& in, const std::string& name = "edge list") {
    std::vector<Edge> edges;
    std::string line;
    int lineno = 0;
    int top = -1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::string a;
        std::string b;
        std::string w;
        if (!(ls >> a))
            continue;
        auto fail = [&](const std::string& what) {
            throw std::invalid_argument(name + ":" + std::to_string(lineno) + ": " + what);
        };
        if (!(ls >> b))
            fail("expected 'u v [weight]'");
        Edge e{};
        auto parse_int = [](const std::string& t, int& out) {
            const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
            return r.ec == std::errc() && r.ptr == t.data() + t.size();
        };
        if (!parse_int(a, e.u) || !parse_int(b, e.v))
            fail("vertex ids must be integers");
        if (ls >> w) {
            char* end = nullptr;
            e.weight = std::strtod(w.c_str(), &end);
            if (end != w.c_str() + w.size())
                fail("weight must be a number");
        }
        std::string extra;
        if (ls >> extra)
            fail("unexpected trailing field '" + extra + "'");
        if (e.u < 0 || e.v < 0)
            fail("vertex ids must be nonnegative");
        if (!(e.weight > 0.0))
            fail("weights must be positive");
        top = std::max({top, e.u, e.v});
        edges.push_back(e);
    }
    if (top < 0)
        throw std::invalid_argument(name + ": no edges");
    const auto n = static_cast<std::size_t>(top + 1);
    return {name, graph_laplacian(n, edges), MeasureSpace::counting(n)};
}

/// Dense operator JSON: {"n": points, "h": fibre dim, "weights": [...], "entries": [[...]]},
/// entries in matrix convention of size n*h.
inline OperatorInput read_dense_json(const nlohmann::json& j, const std::string& name = "dense matrix") {
    if (!j.is_object())
        throw std::invalid_argument(name + ": expected a JSON object");
    for (const char* key : {"n", "entries"})
        if (!j.contains(key))
            throw std::invalid_argument(name + ": missing key '" + key + "'");
    const int n = j.at("n").get<int>();
    const int h = j.contains("h") ? j.at("h").get<int>() : 1;
    if (n < 1 || h < 1)
        throw std::invalid_argument(name + ": n and h must be positive");
    std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    if (j.contains("weights")) {
        w = j.at("weights").get<std::vector<double>>();
        if (w.size() != static_cast<std::size_t>(n))
            throw std::invalid_argument(name + ": 'weights' must have n entries");
    }
    const auto& e = j.at("entries");
    const int dim = n * h;
    if (!e.is_array() || e.size() != static_cast<std::size_t>(dim))
        throw std::invalid_argument(name + ": 'entries' must have n*h rows");
    MatrixXd m(dim, dim);
    for (int r = 0; r < dim; ++r) {
        const auto& row = e[static_cast<std::size_t>(r)];
        if (!row.is_array() || row.size() != static_cast<std::size_t>(dim))
            throw std::invalid_argument(name + ": row " + std::to_string(r) + " must have n*h entries");
        for (int c = 0; c < dim; ++c)
            m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return {name, m, MeasureSpace(w, h)};
}

inline nlohmann::json dense_json(const MatrixXd& m, const MeasureSpace& space) {
    nlohmann::json j;
    j["n"] = space.points();
    j["h"] = space.fiber_dim;
    j["weights"] = space.weights;
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(r, c));
        rows.push_back(row);
    }
    j["entries"] = rows;
    return j;
}

/// Reads an operator file: ".json" as a dense matrix, anything else as an edge list.
inline OperatorInput read_operator_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open '" + path + "'");
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw std::invalid_argument(path + ": " + e.what());
        }
        return read_dense_json(j, path);
    }
    return read_edge_list(in, path);
}

// ---------------------------------------------------------------------------------
// Random instances

/// Erdos-Renyi graph G(n, p) with edge weights drawn from [w_lo, w_hi].
inline std::vector<Edge> erdos_renyi(int n, double p, std::mt19937_64& rng, double w_lo = 1.0, double w_hi = 1.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_real_distribution<double> weight(w_lo, w_hi);
    std::vector<Edge> e;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (coin(rng) < p)
                e.push_back({i, j, w_lo == w_hi ? w_lo : weight(rng)});
    return e;
}

/// Random positive operator with fibre dimension h: S = B^T B with B of rank < n h, and
/// A = W^{-1/2} S W^{1/2} so that A is self-adjoint for the weighted inner product.
inline MatrixXd random_block_operator(const MeasureSpace& space, std::mt19937_64& rng) {
    const auto dim = space.dimension();
    std::uniform_int_distribution<Eigen::Index> rank_dist(1, std::max<Eigen::Index>(1, dim - 1));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Eigen::Index r = rank_dist(rng);
    MatrixXd b(r, dim);
    for (Eigen::Index j = 0; j < dim; ++j)
        for (Eigen::Index i = 0; i < r; ++i)
            b(i, j) = gauss(rng);
    const MatrixXd s = b.transpose() * b;
    const VectorXd sw = space.coordinate_weights().cwiseSqrt();
    return sw.cwiseInverse().asDiagonal() * s * sw.asDiagonal();
}

} // namespace specdens
