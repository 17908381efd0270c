#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"

namespace tabsynth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Kind { Continuous, Binary, Categorical };

struct ColumnKind {
    Kind tag = Kind::Continuous;
    int cardinality = 0; // only meaningful for Categorical

    static ColumnKind continuous() { return {Kind::Continuous, 0}; }
    static ColumnKind binary() { return {Kind::Binary, 2}; }
    static ColumnKind categorical(int levels) { return {Kind::Categorical, levels}; }

    bool is_discrete() const { return tag != Kind::Continuous; }
    // Number of class codes for discrete kinds.
    int levels() const { return tag == Kind::Binary ? 2 : cardinality; }

    bool admits(double v) const {
        if (!std::isfinite(v)) return false;
        switch (tag) {
        case Kind::Continuous: return true;
        case Kind::Binary: return v == 0.0 || v == 1.0;
        case Kind::Categorical: return v >= 0.0 && v < cardinality && v == std::floor(v);
        }
        return false;
    }

    friend bool operator==(const ColumnKind&, const ColumnKind&) = default;
};

inline std::string to_string(const ColumnKind& k) {
    switch (k.tag) {
    case Kind::Continuous: return "continuous";
    case Kind::Binary: return "binary";
    case Kind::Categorical: return "categorical:" + std::to_string(k.cardinality);
    }
    return "?";
}

inline ColumnKind parse_kind(std::string_view s) {
    if (s == "continuous") return ColumnKind::continuous();
    if (s == "binary") return ColumnKind::binary();
    constexpr std::string_view prefix = "categorical:";
    if (s.substr(0, prefix.size()) == prefix) {
        const std::string rest(s.substr(prefix.size()));
        std::size_t used = 0;
        int levels = 0;
        try {
            levels = std::stoi(rest, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == rest.size() && levels > 0) return ColumnKind::categorical(levels);
    }
    throw ValidationError("unknown column kind '" + std::string(s) + "'");
}

struct ColumnSchema {
    std::string name;
    ColumnKind kind;
    bool log_transformed = false;
    std::optional<double> lower_bound = std::nullopt;
    std::optional<double> upper_bound = std::nullopt;

    friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

using Schema = std::vector<ColumnSchema>;

inline void validate_schema(const Schema& schema) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& c = schema[j];
        if (c.name.empty()) throw ValidationError("column " + std::to_string(j) + " has an empty name");
        for (std::size_t i = 0; i < j; ++i)
            if (schema[i].name == c.name) throw ValidationError("duplicate column name '" + c.name + "'");
        if (c.kind.tag == Kind::Categorical && c.kind.cardinality < 1)
            throw ValidationError("column '" + c.name + "': categorical cardinality must be positive");
        if (c.log_transformed && c.kind.tag != Kind::Continuous)
            throw ValidationError("column '" + c.name + "': only continuous columns can be log transformed");
        if (c.lower_bound && c.upper_bound && *c.lower_bound > *c.upper_bound)
            throw ValidationError("column '" + c.name + "': lower bound exceeds upper bound");
    }
}

// FNV-1a over a canonical rendering of names, kinds and log flags. Bounds are
// excluded: they only drive postprocessing and may be edited after fitting.
inline std::uint64_t schema_hash(const Schema& schema) {
    std::ostringstream canon;
    for (const auto& c : schema) canon << c.name << '|' << to_string(c.kind) << '|' << c.log_transformed << ';';
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canon.str()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Column-typed numeric table. Immutable once constructed; every constructor
// path validates kinds and finiteness.
class Dataset {
public:
    Dataset() = default;

    Dataset(Schema schema, Matrix values) : schema_(std::move(schema)), values_(std::move(values)) {
        validate_schema(schema_);
        if (static_cast<Eigen::Index>(schema_.size()) != values_.cols())
            throw ValidationError("schema has " + std::to_string(schema_.size()) + " columns but data has " +
                                  std::to_string(values_.cols()));
        for (Eigen::Index j = 0; j < values_.cols(); ++j) {
            const auto& c = schema_[static_cast<std::size_t>(j)];
            for (Eigen::Index i = 0; i < values_.rows(); ++i) {
                const double v = values_(i, j);
                if (!std::isfinite(v))
                    throw ValidationError("non-finite value in row " + std::to_string(i) + ", column '" + c.name + "'");
                if (!c.kind.admits(v))
                    throw ValidationError("value " + std::to_string(v) + " in row " + std::to_string(i) +
                                          " violates kind " + to_string(c.kind) + " of column '" + c.name + "'");
            }
        }
    }

    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }
    const Schema& schema() const { return schema_; }
    const ColumnSchema& column(Eigen::Index j) const { return schema_.at(static_cast<std::size_t>(j)); }
    const Matrix& values() const { return values_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

    std::optional<Eigen::Index> find(std::string_view name) const {
        for (std::size_t j = 0; j < schema_.size(); ++j)
            if (schema_[j].name == name) return static_cast<Eigen::Index>(j);
        return std::nullopt;
    }

    Eigen::Index index_of(std::string_view name) const {
        if (auto j = find(name)) return *j;
        throw ValidationError("no column named '" + std::string(name) + "'");
    }

    Dataset with_values(Matrix values) const { return Dataset(schema_, std::move(values)); }

    Dataset select_rows(const std::vector<Eigen::Index>& rows) const {
        Matrix out(static_cast<Eigen::Index>(rows.size()), cols());
        for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = values_.row(rows[r]);
        return Dataset(schema_, std::move(out));
    }

private:
    Schema schema_;
    Matrix values_;
};

inline void require_same_schema(const Schema& a, const Schema& b, std::string_view what) {
    if (a.size() != b.size()) throw ValidationError(std::string(what) + ": column count mismatch");
    for (std::size_t j = 0; j < a.size(); ++j)
        if (a[j].name != b[j].name || a[j].kind != b[j].kind)
            throw ValidationError(std::string(what) + ": column " + std::to_string(j) + " ('" + a[j].name +
                                  "' vs '" + b[j].name + "') does not match");
}

// Population (ddof = 0) moments.
inline double mean_of(const Eigen::Ref<const Vector>& x) { return x.mean(); }

inline double stddev_of(const Eigen::Ref<const Vector>& x) {
    if (x.size() == 0) return 0.0;
    const double m = x.mean();
    return std::sqrt((x.array() - m).square().sum() / static_cast<double>(x.size()));
}

// Replaces each named column x by log(1 + x) and sets its log flag.
inline Dataset log_transform(const Dataset& ds, const std::vector<std::string>& names) {
    Schema schema = ds.schema();
    Matrix values = ds.values();
    for (const auto& name : names) {
        const auto j = ds.index_of(name);
        auto& col = schema[static_cast<std::size_t>(j)];
        if (col.kind.tag != Kind::Continuous)
            throw ValidationError("log_transform: column '" + name + "' is not continuous");
        if (col.log_transformed) throw ValidationError("log_transform: column '" + name + "' is already log scale");
        for (Eigen::Index i = 0; i < values.rows(); ++i) {
            if (values(i, j) < 0.0)
                throw ValidationError("log_transform: negative value in row " + std::to_string(i) + " of '" + name + "'");
            values(i, j) = std::log1p(values(i, j));
        }
        col.log_transformed = true;
    }
    return Dataset(std::move(schema), std::move(values));
}

// Undoes log_transform on every flagged column (expm1) and clears the flags.
inline Dataset inverse_log_transform(const Dataset& ds) {
    Schema schema = ds.schema();
    Matrix values = ds.values();
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (!schema[j].log_transformed) continue;
        values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(j)).array().expm1().matrix();
        schema[j].log_transformed = false;
    }
    return Dataset(std::move(schema), std::move(values));
}

// Names of the columns the schema marks as log scale.
inline std::vector<std::string> log_columns(const Schema& schema) {
    std::vector<std::string> out;
    for (const auto& c : schema)
        if (c.log_transformed) out.push_back(c.name);
    return out;
}

// Brings `ds` onto the log flags of `target` by applying log1p where the
// target expects log scale. Columns already on log scale where the target is
// not are rejected.
inline Dataset align_log_scale(const Dataset& ds, const Schema& target) {
    require_same_schema(ds.schema(), target, "align_log_scale");
    std::vector<std::string> to_log;
    for (std::size_t j = 0; j < target.size(); ++j) {
        const bool have = ds.schema()[j].log_transformed;
        const bool want = target[j].log_transformed;
        if (have && !want)
            throw ValidationError("column '" + target[j].name + "' is log scale but the model expects raw scale");
        if (want && !have) to_log.push_back(target[j].name);
    }
    return to_log.empty() ? ds : log_transform(ds, to_log);
}

} // namespace tabsynth
