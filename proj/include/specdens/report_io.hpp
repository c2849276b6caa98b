#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "profile_io.hpp"
#include "verifiers.hpp"

namespace specdens {

inline json to_json(const InequalityReport& r) {
    json w;
    w["operator_digest"] = r.witness.operator_digest;
    w["state_digest"] = r.witness.state_digest;
    w["interval"] = r.witness.interval;
    w["parameters"] = r.witness.parameters;
    json j;
    j["id"] = r.id;
    j["lhs"] = number_json(r.lhs);
    j["rhs"] = number_json(r.rhs);
    j["margin"] = number_json(r.margin);
    j["relative_margin"] = number_json(r.relative_margin);
    j["pass"] = r.pass;
    j["witness"] = w;
    j["exclusions"] = number_json(r.exclusions);
    j["seed"] = r.seed;
    return j;
}

inline InequalityReport report_from_json(const json& j) {
    if (!j.is_object())
        throw std::invalid_argument("report: expected a JSON object");
    for (const char* key : {"id", "lhs", "rhs", "margin", "pass", "witness"})
        if (!j.contains(key))
            throw std::invalid_argument(std::string("report: missing key '") + key + "'");
    InequalityReport r;
    r.id = j.at("id").get<std::string>();
    r.lhs = number_from_json(j.at("lhs"));
    r.rhs = number_from_json(j.at("rhs"));
    r.margin = number_from_json(j.at("margin"));
    r.relative_margin = j.contains("relative_margin") ? number_from_json(j.at("relative_margin")) : 0.0;
    r.pass = j.at("pass").get<bool>();
    const auto& w = j.at("witness");
    if (!w.is_object())
        throw std::invalid_argument("report: 'witness' must be an object");
    r.witness.operator_digest = w.value("operator_digest", "");
    r.witness.state_digest = w.value("state_digest", "");
    r.witness.interval = w.value("interval", "");
    r.witness.parameters = w.value("parameters", json::object());
    r.exclusions = j.contains("exclusions") ? number_from_json(j.at("exclusions")) : 0.0;
    r.seed = j.value("seed", std::uint64_t{0});
    return r;
}

/// One compact JSON object per line; keys come out sorted.
inline std::string report_line(const InequalityReport& r) { return to_json(r).dump(); }

inline void write_jsonl(std::ostream& out, const std::vector<InequalityReport>& reports) {
    for (const auto& r : reports)
        out << report_line(r) << '\n';
}

inline std::vector<InequalityReport> read_jsonl(std::istream& in, const std::string& name = "reports") {
    std::vector<InequalityReport> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            out.push_back(report_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::invalid_argument(name + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

/// Identity of a report: everything except the computed sides.
inline std::string report_key(const InequalityReport& r) {
    json k;
    k["id"] = r.id;
    k["operator_digest"] = r.witness.operator_digest;
    k["state_digest"] = r.witness.state_digest;
    k["interval"] = r.witness.interval;
    k["parameters"] = r.witness.parameters;
    k["seed"] = r.seed;
    return k.dump();
}

/// Union of report sets, independent of input order: sorted by key, exact duplicates
/// collapsed. Two different reports under the same key are an error.
inline std::vector<InequalityReport> merge_reports(const std::vector<std::vector<InequalityReport>>& sets) {
    std::map<std::string, std::pair<std::string, InequalityReport>> by_key;
    for (const auto& set : sets) {
        for (const auto& r : set) {
            const auto key = report_key(r);
            const auto line = report_line(r);
            const auto it = by_key.find(key);
            if (it == by_key.end())
                by_key.emplace(key, std::make_pair(line, r));
            else if (it->second.first != line)
                throw std::invalid_argument("conflicting reports for " + r.id + " on operator " +
                                            r.witness.operator_digest);
        }
    }
    std::vector<InequalityReport> out;
    out.reserve(by_key.size());
    for (auto& [key, value] : by_key)
        out.push_back(value.second);
    return out;
}

/// Per-id summary table: counts, failures and the worst margins.
inline std::string csv_summary(const std::vector<InequalityReport>& reports) {
    struct Row {
        int count = 0;
        int failed = 0;
        double margin = infinity;
        double relative = infinity;
        double exclusions = 0.0;
    };
    std::map<std::string, Row> rows;
    for (const auto& r : reports) {
        auto& row = rows[r.id];
        ++row.count;
        if (!r.pass)
            ++row.failed;
        row.margin = std::min(row.margin, r.margin);
        row.relative = std::min(row.relative, r.relative_margin);
        row.exclusions += r.exclusions;
    }
    std::ostringstream out;
    out << "id,reports,passed,failed,min_margin,min_relative_margin,exclusions\n";
    for (const auto& [id, row] : rows)
        out << id << ',' << row.count << ',' << row.count - row.failed << ',' << row.failed << ','
            << format_number(row.margin) << ',' << format_number(row.relative) << ',' << format_number(row.exclusions)
            << '\n';
    return out.str();
}

inline bool all_pass(const std::vector<InequalityReport>& reports) {
    return std::all_of(reports.begin(), reports.end(), [](const InequalityReport& r) { return r.pass; });
}

} // namespace specdens
