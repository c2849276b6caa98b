#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "profiles.hpp"

namespace specdens {

using json = nlohmann::json;

/// JSON number, with infinities written as the strings "inf" / "-inf".
inline json number_json(double v) {
    if (v == infinity)
        return "inf";
    if (v == -infinity)
        return "-inf";
    if (std::isnan(v))
        return "nan";
    return v;
}

inline double number_from_json(const json& j) {
    if (j.is_number())
        return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf")
            return infinity;
        if (s == "-inf")
            return -infinity;
        if (s == "nan")
            return std::nan("");
    }
    throw std::invalid_argument("expected a number, got " + j.dump());
}

/// Shortest round-trip decimal text for a double.
inline std::string format_number(double v) {
    if (v == infinity)
        return "inf";
    if (v == -infinity)
        return "-inf";
    return json(v).dump();
}

inline json to_json(const MonotoneProfile& p) {
    json j;
    j["value_at_zero"] = p.value_at_zero();
    switch (p.kind()) {
    case MonotoneProfile::Kind::power:
        j["kind"] = "power";
        j["value_at_zero"] = 0.0;
        j["data"] = json::array({p.coefficient(), p.exponent()});
        break;
    case MonotoneProfile::Kind::step: {
        j["kind"] = "step";
        json data = json::array();
        for (const auto& b : p.breakpoints())
            data.push_back(json::array({b.position, b.increment}));
        j["data"] = data;
        break;
    }
    case MonotoneProfile::Kind::tabulated: {
        j["kind"] = "tabulated";
        json data = json::array();
        for (std::size_t i = 0; i < p.positions().size(); ++i)
            data.push_back(json::array({p.positions()[i], p.values()[i]}));
        j["data"] = data;
        break;
    }
    }
    return j;
}

inline MonotoneProfile monotone_profile_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.contains("data"))
        throw std::invalid_argument("profile JSON needs 'kind' and 'data'");
    const auto kind = j.at("kind").get<std::string>();
    const double v0 = j.contains("value_at_zero") ? number_from_json(j.at("value_at_zero")) : 0.0;
    const json& data = j.at("data");
    if (kind == "power") {
        if (!data.is_array() || data.size() != 2)
            throw std::invalid_argument("power profile data must be [coefficient, exponent]");
        return MonotoneProfile::power(number_from_json(data[0]), number_from_json(data[1]));
    }
    std::vector<std::pair<double, double>> rows;
    for (const auto& row : data) {
        if (!row.is_array() || row.size() != 2)
            throw std::invalid_argument("profile data rows must be [position, value] pairs");
        rows.emplace_back(number_from_json(row[0]), number_from_json(row[1]));
    }
    if (kind == "step") {
        std::vector<Breakpoint> b;
        for (const auto& [x, v] : rows)
            b.push_back({x, v});
        return MonotoneProfile::step(b, v0);
    }
    if (kind == "tabulated") {
        std::vector<Sample> s;
        for (const auto& [x, v] : rows)
            s.push_back({x, v});
        return MonotoneProfile::tabulated(s, v0);
    }
    throw std::invalid_argument("unknown profile kind '" + kind + "'");
}

inline json to_json(const DecayProfile& p) {
    json j;
    json data = json::array();
    if (p.kind() == DecayProfile::Kind::exponential_sum) {
        j["kind"] = "exponential_sum";
        for (const auto& t : p.terms())
            data.push_back(json::array({t.coefficient, t.rate}));
    } else {
        j["kind"] = "tabulated";
        for (const auto& s : p.samples())
            data.push_back(json::array({s.at, s.value}));
        j["tail_rate"] = p.tail_rate();
        j["tail_coefficient"] = number_json(p.tail_coefficient());
    }
    j["data"] = data;
    return j;
}

inline DecayProfile decay_profile_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.contains("data"))
        throw std::invalid_argument("decay profile JSON needs 'kind' and 'data'");
    const auto kind = j.at("kind").get<std::string>();
    std::vector<std::pair<double, double>> rows;
    for (const auto& row : j.at("data")) {
        if (!row.is_array() || row.size() != 2)
            throw std::invalid_argument("decay profile data rows must be pairs");
        rows.emplace_back(number_from_json(row[0]), number_from_json(row[1]));
    }
    if (kind == "exponential_sum") {
        std::vector<ExponentialTerm> t;
        for (const auto& [c, r] : rows)
            t.push_back({c, r});
        return DecayProfile::exponential_sum(t);
    }
    if (kind == "tabulated") {
        std::vector<Sample> s;
        for (const auto& [x, v] : rows)
            s.push_back({x, v});
        return DecayProfile::tabulated(s, j.contains("tail_rate") ? number_from_json(j.at("tail_rate")) : 0.0);
    }
    throw std::invalid_argument("unknown decay profile kind '" + kind + "'");
}

/// CSV with header "lambda,value". Step and tabulated profiles list their stored points;
/// power profiles (or any profile, when `grid` is given) are sampled on the grid.
inline std::string to_csv(const MonotoneProfile& p, const std::vector<double>& grid = {}) {
    std::ostringstream out;
    out << "lambda,value\n";
    if (grid.empty() && !p.is_power()) {
        if (p.positions().empty() || p.positions().front() > 0.0)
            out << format_number(0.0) << "," << format_number(p(0.0)) << "\n";
        for (std::size_t i = 0; i < p.positions().size(); ++i)
            out << format_number(p.positions()[i]) << "," << format_number(p.values()[i]) << "\n";
        return out.str();
    }
    if (grid.empty())
        throw std::invalid_argument("to_csv: a power profile needs a sampling grid");
    for (double x : grid)
        out << format_number(x) << "," << format_number(p(x)) << "\n";
    return out.str();
}

inline std::string to_csv(const DecayProfile& p, const std::vector<double>& grid = {}) {
    std::ostringstream out;
    out << "t,value\n";
    if (grid.empty()) {
        if (p.kind() != DecayProfile::Kind::tabulated)
            throw std::invalid_argument("to_csv: an exponential sum needs a sampling grid");
        for (const auto& s : p.samples())
            out << format_number(s.at) << "," << format_number(s.value) << "\n";
        return out.str();
    }
    for (double t : grid)
        out << format_number(t) << "," << format_number(p(t)) << "\n";
    return out.str();
}

/// Reads "lambda,value" CSV back into a tabulated profile. The row at lambda = 0, if any,
/// supplies value_at_zero.
inline MonotoneProfile monotone_profile_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("lambda,value", 0) != 0)
        throw std::invalid_argument("profile CSV must start with the header 'lambda,value'");
    std::vector<Sample> samples;
    double v0 = 0.0;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("profile CSV line " + std::to_string(lineno) + ": expected two fields");
        double x = 0.0;
        double v = 0.0;
        try {
            x = std::stod(line.substr(0, comma));
            v = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("profile CSV line " + std::to_string(lineno) + ": not a number");
        }
        if (x == 0.0 && samples.empty())
            v0 = v;
        else
            samples.push_back({x, v});
    }
    return MonotoneProfile::tabulated(samples, v0);
}

} // namespace specdens
