#pragma once

// CSV ingestion and output plus the schema sidecar format.
//
// CSV: RFC-4180 style, header row required, '.' decimal point, numeric cells
// only. Values are written in shortest round-trip form, so load -> write ->
// load reproduces every double bit for bit.
//
// Schema sidecar: a first line "tabsynth-schema 1" followed by one line per
// column of whitespace-separated key=value pairs:
//
//   column name=Mortgage kind=continuous log=false lower=0
//   column name=Delinquency kind=categorical:4 log=false
//
// `kind` is continuous | binary | categorical:<levels>; `lower` / `upper`
// are optional bounds on the original (un-logged) scale. Lines starting with
// '#' are comments.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dataset.hpp"

namespace tabsynth {

struct InferOptions {
    // Columns with at most this many distinct non-negative integer values are
    // inferred Categorical (unless they are 0/1 only, which is Binary).
    int max_categorical_levels = 20;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    if (quoted) throw ValidationError("line " + std::to_string(line_no) + ": unterminated quoted field");
    out.push_back(std::move(cell));
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

} // namespace detail

// Shortest decimal form that parses back to exactly `v`.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

inline ColumnKind infer_kind(const Eigen::Ref<const Vector>& col, const InferOptions& opt = {}) {
    std::set<double> distinct;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
        const double v = col[i];
        if (v != std::floor(v) || v < 0.0) return ColumnKind::continuous();
        distinct.insert(v);
        if (static_cast<int>(distinct.size()) > opt.max_categorical_levels) return ColumnKind::continuous();
    }
    if (distinct.empty()) return ColumnKind::continuous();
    if (*distinct.rbegin() <= 1.0) return ColumnKind::binary();
    return ColumnKind::categorical(static_cast<int>(*distinct.rbegin()) + 1);
}

struct CsvTable {
    std::vector<std::string> header;
    Matrix values;
};

inline CsvTable read_csv_table(std::istream& in, const std::string& origin = "<stream>") {
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.find_first_not_of(" \t\r") != std::string::npos) break;
    }
    if (line_no == 0 || line.find_first_not_of(" \t\r") == std::string::npos)
        throw ValidationError(origin + ": missing header row");
    for (auto& h : detail::split_csv_line(line, line_no)) t.header.emplace_back(detail::trim(h));

    const std::size_t p = t.header.size();
    std::vector<double> cells;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = detail::split_csv_line(line, line_no);
        if (fields.size() != p)
            throw ValidationError(origin + ": line " + std::to_string(line_no) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " + std::to_string(p));
        for (std::size_t j = 0; j < p; ++j) {
            double v = 0.0;
            if (!detail::parse_double(fields[j], v))
                throw ValidationError(origin + ": line " + std::to_string(line_no) + ", column '" + t.header[j] +
                                      "': cannot parse '" + fields[j] + "'");
            if (!std::isfinite(v))
                throw ValidationError(origin + ": line " + std::to_string(line_no) + ", column '" + t.header[j] +
                                      "': non-finite value");
            cells.push_back(v);
        }
        ++n;
    }
    t.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cells[i * p + j];
    return t;
}

inline Dataset dataset_from_table(CsvTable t, const std::optional<Schema>& schema, const InferOptions& opt = {}) {
    Schema s;
    if (schema) {
        if (schema->size() != t.header.size())
            throw ValidationError("schema lists " + std::to_string(schema->size()) + " columns but CSV has " +
                                  std::to_string(t.header.size()));
        for (std::size_t j = 0; j < t.header.size(); ++j)
            if ((*schema)[j].name != t.header[j])
                throw ValidationError("schema column " + std::to_string(j) + " is '" + (*schema)[j].name +
                                      "' but CSV header has '" + t.header[j] + "'");
        s = *schema;
    } else {
        for (std::size_t j = 0; j < t.header.size(); ++j)
            s.push_back({t.header[j], infer_kind(t.values.col(static_cast<Eigen::Index>(j)), opt), false, {}, {}});
    }
    return Dataset(std::move(s), std::move(t.values));
}

inline Dataset load_csv(const std::string& path, const std::optional<Schema>& schema = std::nullopt,
                        const InferOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return dataset_from_table(read_csv_table(in, path), schema, opt);
}

inline void write_csv(std::ostream& out, const Dataset& ds) {
    for (Eigen::Index j = 0; j < ds.cols(); ++j) out << (j ? "," : "") << detail::quote_if_needed(ds.column(j).name);
    out << '\n';
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.cols(); ++j) out << (j ? "," : "") << format_double(ds(i, j));
        out << '\n';
    }
}

inline void write_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    write_csv(out, ds);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline void write_schema(std::ostream& out, const Schema& schema) {
    out << "tabsynth-schema 1\n";
    for (const auto& c : schema) {
        if (c.name.find_first_of(" \t=\n") != std::string::npos)
            throw ValidationError("column name '" + c.name + "' cannot be stored in a schema file");
        out << "column name=" << c.name << " kind=" << to_string(c.kind) << " log=" << (c.log_transformed ? "true" : "false");
        if (c.lower_bound) out << " lower=" << format_double(*c.lower_bound);
        if (c.upper_bound) out << " upper=" << format_double(*c.upper_bound);
        out << '\n';
    }
}

inline void write_schema(const std::string& path, const Schema& schema) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    write_schema(out, schema);
}

inline Schema read_schema(std::istream& in, const std::string& origin = "<schema>") {
    std::string line;
    std::size_t line_no = 0;
    bool saw_magic = false;
    Schema schema;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = detail::trim(line);
        if (body.empty() || body.front() == '#') continue;
        std::istringstream words{std::string(body)};
        std::string head;
        words >> head;
        if (!saw_magic) {
            int version = 0;
            words >> version;
            if (head != "tabsynth-schema" || version != 1)
                throw ValidationError(origin + ": expected 'tabsynth-schema 1' header");
            saw_magic = true;
            continue;
        }
        if (head != "column") throw ValidationError(origin + ": line " + std::to_string(line_no) + ": expected 'column'");
        std::map<std::string, std::string> kv;
        for (std::string tok; words >> tok;) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ValidationError(origin + ": line " + std::to_string(line_no) + ": malformed entry '" + tok + "'");
            kv[tok.substr(0, eq)] = tok.substr(eq + 1);
        }
        ColumnSchema c;
        if (!kv.count("name") || !kv.count("kind"))
            throw ValidationError(origin + ": line " + std::to_string(line_no) + ": name and kind are required");
        c.name = kv["name"];
        c.kind = parse_kind(kv["kind"]);
        if (kv.count("log")) {
            if (kv["log"] != "true" && kv["log"] != "false")
                throw ValidationError(origin + ": line " + std::to_string(line_no) + ": log must be true or false");
            c.log_transformed = kv["log"] == "true";
        }
        for (const char* key : {"lower", "upper"}) {
            if (!kv.count(key)) continue;
            double v = 0.0;
            if (!detail::parse_double(kv[key], v))
                throw ValidationError(origin + ": line " + std::to_string(line_no) + ": bad bound '" + kv[key] + "'");
            (std::string_view(key) == "lower" ? c.lower_bound : c.upper_bound) = v;
        }
        for (const auto& [k, v] : kv)
            if (k != "name" && k != "kind" && k != "log" && k != "lower" && k != "upper")
                throw ValidationError(origin + ": line " + std::to_string(line_no) + ": unknown key '" + k + "'");
        schema.push_back(std::move(c));
    }
    if (!saw_magic) throw ValidationError(origin + ": empty schema file");
    validate_schema(schema);
    return schema;
}

inline Schema read_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return read_schema(in, path);
}

} // namespace tabsynth
