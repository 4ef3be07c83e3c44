#pragma once

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stel/config.hpp"
#include "stel/errors.hpp"

namespace stel {

inline constexpr const char* kVersion = "stel 0.3.0";

// One tabular output series: fixed column order, one row per record.
struct Series {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void push(std::initializer_list<double> row) {
        if (row.size() != columns.size())
            throw ConfigError("series " + name + ": row width mismatch");
        rows.emplace_back(row);
    }
};

// A named pass/fail check with the tolerance and sample count it cites.
struct Verdict {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double tolerance = 0.0;
    long samples = 0;
    std::string detail;
};

struct ExperimentReport {
    std::string experiment;
    std::string config_echo;
    // deque so references from add_series stay valid as more series arrive
    std::deque<Series> series;
    std::vector<Verdict> verdicts;
    double wall_seconds = 0.0;

    [[nodiscard]] bool passed() const {
        for (const auto& v : verdicts)
            if (!v.pass) return false;
        return true;
    }

    Series& add_series(std::string name, std::vector<std::string> columns) {
        series.push_back(Series{std::move(name), std::move(columns), {}});
        return series.back();
    }

    void add_verdict(std::string name, bool pass, double measured, double tolerance,
                     long samples, std::string detail) {
        verdicts.push_back(Verdict{std::move(name), pass, measured, tolerance, samples,
                                   std::move(detail)});
    }

    [[nodiscard]] const Series* find_series(const std::string& name) const {
        for (const auto& s : series)
            if (s.name == name) return &s;
        return nullptr;
    }

    [[nodiscard]] const Verdict* find_verdict(const std::string& name) const {
        for (const auto& v : verdicts)
            if (v.name == name) return &v;
        return nullptr;
    }
};

namespace detail {

inline std::string csv_text(const Series& s) {
    std::string out;
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
        if (c) out += ",";
        out += s.columns[c];
    }
    out += "\n";
    for (const auto& row : s.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ",";
            out += format_double(row[c]);
        }
        out += "\n";
    }
    return out;
}

}  // namespace detail

inline nlohmann::json report_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["experiment"] = report.experiment;
    j["passed"] = report.passed();
    j["wall_seconds"] = report.wall_seconds;
    nlohmann::json cfg = nlohmann::json::object();
    std::stringstream echo(report.config_echo);
    std::string line;
    while (std::getline(echo, line)) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        cfg[line.substr(0, eq)] = line.substr(eq + 3);
    }
    j["config"] = cfg;
    j["series"] = nlohmann::json::array();
    for (const auto& s : report.series) {
        nlohmann::json entry;
        entry["name"] = s.name;
        entry["file"] = s.name + ".csv";
        entry["columns"] = s.columns;
        entry["rows"] = s.rows.size();
        j["series"].push_back(entry);
    }
    j["verdicts"] = nlohmann::json::array();
    for (const auto& v : report.verdicts) {
        nlohmann::json entry;
        entry["name"] = v.name;
        entry["pass"] = v.pass;
        entry["measured"] = v.measured;
        entry["tolerance"] = v.tolerance;
        entry["samples"] = v.samples;
        entry["detail"] = v.detail;
        j["verdicts"].push_back(entry);
    }
    return j;
}

// Writes <dir>/report.json plus one CSV per series. Series bytes depend only
// on the computed numbers, never on timing or worker count.
inline void write_report(const ExperimentReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "report.json");
        if (!out) throw ConfigError("report: cannot write to " + dir);
        out << report_json(report).dump(2) << "\n";
    }
    for (const auto& s : report.series) {
        std::ofstream out(fs::path(dir) / (s.name + ".csv"));
        if (!out) throw ConfigError("report: cannot write to " + dir);
        out << detail::csv_text(s);
    }
}

inline std::string verdict_summary(const ExperimentReport& report) {
    std::string out;
    for (const auto& v : report.verdicts) {
        out += v.pass ? "[PASS] " : "[FAIL] ";
        out += v.name + ": " + v.detail + "\n";
    }
    out += report.passed() ? "RESULT pass\n" : "RESULT fail\n";
    return out;
}

}  // namespace stel
