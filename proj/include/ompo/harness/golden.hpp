#pragma once

#include "ompo/harness/experiment.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ompo::harness {

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// |a - b| <= abs + rel * |b| per column; integer columns always compare exactly.
struct Tolerance {
    double abs = 0.0;
    double rel = 0.0;
};

struct GoldenTolerances {
    Tolerance returns{1e-6, 1e-6};
    Tolerance losses{1e-6, 1e-6};

    /// Exact on every column.
    static GoldenTolerances exact() { return {{0.0, 0.0}, {0.0, 0.0}}; }
};

struct GoldenReport {
    bool passed = true;
    std::size_t rows_compared = 0;
    std::vector<std::string> mismatches;  // "row <i> column <name>: ..."
};

struct MetricsTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

inline const std::vector<std::string>& metrics_columns() {
    static const std::vector<std::string> cols = [] {
        std::vector<std::string> c;
        std::stringstream ss(kMetricsHeader);
        std::string item;
        while (std::getline(ss, item, ',')) c.push_back(item);
        return c;
    }();
    return cols;
}

inline bool is_integer_column(const std::string& c) {
    return c == "env_step" || c == "episode" || c == "merge_events";
}

inline MetricsTable parse_metrics_csv(std::istream& in, const std::string& origin) {
    MetricsTable t;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(origin + ": empty file");
    t.columns = detail::split_list(line);
    const auto& want = metrics_columns();
    for (const auto& c : want)
        if (std::find(t.columns.begin(), t.columns.end(), c) == t.columns.end())
            throw SchemaError(origin + ": missing column '" + c + "'");
    for (const auto& c : t.columns)
        if (std::find(want.begin(), want.end(), c) == want.end())
            throw SchemaError(origin + ": unexpected column '" + c + "'");
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_list(line);
        if (cells.size() != t.columns.size())
            throw SchemaError(origin + ":" + std::to_string(n) + ": expected " + std::to_string(t.columns.size()) +
                              " fields, got " + std::to_string(cells.size()));
        for (std::size_t i = 0; i < cells.size(); ++i) {
            try {
                if (is_integer_column(t.columns[i]))
                    detail::to_uint(cells[i]);
                else
                    detail::to_double(cells[i]);
            } catch (const ConfigError&) {
                throw SchemaError(origin + ":" + std::to_string(n) + ": column '" + t.columns[i] +
                                  "' is not numeric: '" + cells[i] + "'");
            }
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

inline MetricsTable load_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    return parse_metrics_csv(in, path);
}

inline GoldenReport golden_compare(const MetricsTable& metrics, const MetricsTable& golden,
                                   const GoldenTolerances& tol = {}) {
    GoldenReport report;
    if (metrics.rows.size() != golden.rows.size()) {
        report.passed = false;
        report.mismatches.push_back("row count " + std::to_string(metrics.rows.size()) + " vs golden " +
                                    std::to_string(golden.rows.size()));
    }
    std::map<std::string, std::size_t> gcol;
    for (std::size_t i = 0; i < golden.columns.size(); ++i) gcol[golden.columns[i]] = i;
    const std::size_t n = std::min(metrics.rows.size(), golden.rows.size());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < metrics.columns.size(); ++c) {
            const auto& name = metrics.columns[c];
            const auto& a = metrics.rows[r][c];
            const auto& b = golden.rows[r][gcol.at(name)];
            std::string why;
            if (is_integer_column(name)) {
                if (detail::to_uint(a) != detail::to_uint(b)) why = a + " != " + b;
            } else {
                const double x = detail::to_double(a), y = detail::to_double(b);
                const Tolerance t = name == "return" ? tol.returns : tol.losses;
                if (!(std::abs(x - y) <= t.abs + t.rel * std::abs(y)))
                    why = a + " vs " + b + " (|diff| " + detail::fmt(std::abs(x - y)) + ")";
            }
            if (!why.empty()) {
                report.passed = false;
                report.mismatches.push_back("row " + std::to_string(r + 1) + " column " + name + ": " + why);
            }
        }
        ++report.rows_compared;
    }
    return report;
}

inline GoldenReport golden_compare(const std::string& metrics_path, const std::string& golden_path,
                                   const GoldenTolerances& tol = {}) {
    return golden_compare(load_metrics_csv(metrics_path), load_metrics_csv(golden_path), tol);
}

}  // namespace ompo::harness
