#pragma once

// Ground-truth generators: half circles, cuboid surfaces, external point
// clouds and a simulated credit dataset driven by a shipped config file.
//
// Row generation is block-seeded: row i draws from the stream
// derive_seed(seed, {i / kBlockRows}), so blocks could be produced in
// parallel without changing the output.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "dataset.hpp"
#include "rng.hpp"

namespace tabsynth {

inline constexpr Eigen::Index kBlockRows = 1024;

struct AngleInterval {
    double lo = 0.0;
    double hi = 0.0;
};

// Points on a half circle of `radius` with Gaussian noise on both
// coordinates. When `sparse` is given, the band keeps 10% of the share it
// would hold under a uniform angle; the support is unchanged.
inline Dataset gen_half_circle(Eigen::Index n, double radius, double noise_sd, std::optional<AngleInterval> sparse,
                               std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_half_circle: n must be positive");
    if (!(radius > 0.0)) throw std::invalid_argument("gen_half_circle: radius must be positive");
    if (!(noise_sd >= 0.0)) throw std::invalid_argument("gen_half_circle: noise_sd must be non-negative");
    constexpr double pi = std::numbers::pi;
    if (sparse && !(sparse->lo >= 0.0 && sparse->lo < sparse->hi && sparse->hi <= pi))
        throw std::invalid_argument("gen_half_circle: sparse interval must satisfy 0 <= lo < hi <= pi");

    Matrix xy(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i / kBlockRows), static_cast<std::uint64_t>(i % kBlockRows)});
        double theta = 0.0;
        if (sparse) {
            const double width = sparse->hi - sparse->lo;
            const double band_share = 0.1 * width / pi;
            const double u = uniform01(rng);
            const double v = uniform01(rng);
            if (u < band_share) {
                theta = sparse->lo + v * width;
            } else {
                // uniform over [0, pi) minus the band
                const double t = v * (pi - width);
                theta = t < sparse->lo ? t : t + width;
            }
        } else {
            theta = pi * uniform01(rng);
        }
        const double ex = noise_sd > 0.0 ? noise_sd * standard_normal(rng) : 0.0;
        const double ey = noise_sd > 0.0 ? noise_sd * standard_normal(rng) : 0.0;
        xy(i, 0) = radius * std::cos(theta) + ex;
        xy(i, 1) = radius * std::sin(theta) + ey;
    }
    return Dataset({{"x", ColumnKind::continuous()}, {"y", ColumnKind::continuous()}}, std::move(xy));
}

// Uniform points on the surface of an axis-aligned box centred at the origin
// with side lengths a < b < c along x, y, z. Faces are chosen in proportion
// to their area.
inline Dataset gen_cuboid_surface(Eigen::Index n, double a, double b, double c, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_cuboid_surface: n must be positive");
    if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw std::invalid_argument("gen_cuboid_surface: dimensions must be positive");
    if (!(a < b && b < c)) throw std::invalid_argument("gen_cuboid_surface: dimensions must satisfy a < b < c");
    const double side[3] = {a, b, c};
    const double area[3] = {b * c, a * c, a * b}; // faces normal to x, y, z
    const double total = 2.0 * (area[0] + area[1] + area[2]);
    Matrix p(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i / kBlockRows), static_cast<std::uint64_t>(i % kBlockRows)});
        double u = uniform01(rng) * total;
        int face = 0;
        while (face < 5 && u >= area[face / 2]) {
            u -= area[face / 2];
            ++face;
        }
        const int axis = face / 2;
        for (int d = 0; d < 3; ++d) p(i, d) = (uniform01(rng) - 0.5) * side[d];
        p(i, axis) = (face % 2 ? 0.5 : -0.5) * side[axis];
    }
    return Dataset({{"x", ColumnKind::continuous()}, {"y", ColumnKind::continuous()}, {"z", ColumnKind::continuous()}},
                   std::move(p));
}

inline Dataset load_point_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    auto t = read_csv_table(in, path);
    if (t.header.size() != 3)
        throw ValidationError(path + ": point clouds need exactly 3 columns, found " + std::to_string(t.header.size()));
    Schema s;
    for (const auto& h : t.header) s.push_back({h, ColumnKind::continuous()});
    return dataset_from_table(std::move(t), s);
}

// ---------------------------------------------------------------------------
// Simulated credit data
// ---------------------------------------------------------------------------

enum class Generator { Linear, Quadratic, Lognormal, Poisson, GatedLognormal, Logistic, Threshold };

struct CreditColumnSpec {
    std::string name;
    Generator generator = Generator::Linear;
    double intercept = 0.0;
    double noise = 0.0;
    std::vector<std::pair<int, double>> loadings; // (source index, coefficient)
    std::vector<std::pair<int, double>> squares;  // coefficient on s_k^2
    std::vector<double> cuts;                     // Threshold: ascending cut points
    std::string gate;                             // GatedLognormal: zero when gate column == 0
    double gate_coef = 0.0;
    bool skewed = false;
    bool protected_attribute = false;
    std::optional<double> lower;
    std::optional<double> upper;
};

struct TargetTerm {
    std::string column;
    bool log1p = false;
    double center = 0.0;
    double scale = 1.0;
};

struct CreditSimSpec {
    int version = 1;
    int sources = 11;
    std::vector<CreditColumnSpec> columns;
    double target_intercept = 0.0;
    std::vector<std::pair<TargetTerm, double>> target_linear;
    std::vector<std::tuple<TargetTerm, TargetTerm, double>> target_interactions;
};

namespace detail {

inline Generator parse_generator(const std::string& s, const std::string& where) {
    static const std::map<std::string, Generator> m{
        {"linear", Generator::Linear},       {"quadratic", Generator::Quadratic},
        {"lognormal", Generator::Lognormal}, {"poisson", Generator::Poisson},
        {"gated_lognormal", Generator::GatedLognormal}, {"logistic", Generator::Logistic},
        {"threshold", Generator::Threshold}};
    const auto it = m.find(s);
    if (it == m.end()) throw ValidationError(where + ": unknown generator '" + s + "'");
    return it->second;
}

inline double parse_number(const std::string& s, const std::string& where) {
    double v = 0.0;
    if (!parse_double(s, v)) throw ValidationError("credit config: bad number '" + s + "' in " + where);
    return v;
}

inline TargetTerm parse_target_term(std::istringstream& words, const std::string& where) {
    TargetTerm t;
    std::string transform, center, scale;
    if (!(words >> t.column >> transform >> center >> scale))
        throw ValidationError("credit config: incomplete target term in " + where);
    if (transform != "none" && transform != "log1p") throw ValidationError("credit config: bad transform in " + where);
    t.log1p = transform == "log1p";
    t.center = parse_number(center, where);
    t.scale = parse_number(scale, where);
    if (!(t.scale > 0.0)) throw ValidationError("credit config: term scale must be positive in " + where);
    return t;
}

} // namespace detail

// Config format, one directive per line ('#' comments):
//
//   credit-sim <version>
//   sources <count>
//   column <name> <generator> key=value ...
//   target intercept <value>
//   target linear <column> <none|log1p> <center> <scale> <coef>
//   target interaction <col> <tf> <center> <scale> <col> <tf> <center> <scale> <coef>
//
// Column keys: intercept, noise, s<k>=coef, sq:s<k>=coef, cuts=a,b,...,
// gate=<column>, gate_coef, skewed=true|false, protected=true|false,
// lower, upper. Columns are generated and emitted in file order.
inline CreditSimSpec parse_credit_spec(std::istream& in, const std::string& origin = "<credit config>") {
    CreditSimSpec spec;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream words(line);
        std::string head;
        if (!(words >> head)) continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        if (!saw_header) {
            if (head != "credit-sim" || !(words >> spec.version) || spec.version != 1)
                throw ValidationError(where + ": expected 'credit-sim 1'");
            saw_header = true;
            continue;
        }
        if (head == "sources") {
            if (!(words >> spec.sources) || spec.sources < 1) throw ValidationError(where + ": bad source count");
        } else if (head == "column") {
            CreditColumnSpec c;
            std::string gen;
            if (!(words >> c.name >> gen)) throw ValidationError(where + ": column needs a name and generator");
            c.generator = detail::parse_generator(gen, where);
            for (std::string tok; words >> tok;) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) throw ValidationError(where + ": malformed '" + tok + "'");
                const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
                auto source_index = [&](const std::string& k) {
                    const int idx = std::stoi(k.substr(1));
                    if (idx < 0 || idx >= spec.sources) throw ValidationError(where + ": source index out of range");
                    return idx;
                };
                if (key == "intercept") c.intercept = detail::parse_number(val, where);
                else if (key == "noise") c.noise = detail::parse_number(val, where);
                else if (key == "gate") c.gate = val;
                else if (key == "gate_coef") c.gate_coef = detail::parse_number(val, where);
                else if (key == "skewed") c.skewed = val == "true";
                else if (key == "protected") c.protected_attribute = val == "true";
                else if (key == "lower") c.lower = detail::parse_number(val, where);
                else if (key == "upper") c.upper = detail::parse_number(val, where);
                else if (key == "cuts") {
                    std::stringstream ss(val);
                    for (std::string part; std::getline(ss, part, ',');) c.cuts.push_back(detail::parse_number(part, where));
                    if (!std::is_sorted(c.cuts.begin(), c.cuts.end())) throw ValidationError(where + ": cuts must ascend");
                } else if (key.size() > 1 && key[0] == 's' && std::isdigit(static_cast<unsigned char>(key[1])))
                    c.loadings.emplace_back(source_index(key), detail::parse_number(val, where));
                else if (key.rfind("sq:s", 0) == 0)
                    c.squares.emplace_back(source_index(key.substr(3)), detail::parse_number(val, where));
                else
                    throw ValidationError(where + ": unknown key '" + key + "'");
            }
            if (c.generator == Generator::Threshold && c.cuts.empty())
                throw ValidationError(where + ": threshold columns need cuts");
            if (c.generator == Generator::GatedLognormal) {
                const bool known = std::any_of(spec.columns.begin(), spec.columns.end(),
                                               [&](const CreditColumnSpec& o) { return o.name == c.gate; });
                if (!known) throw ValidationError(where + ": gate must name an earlier column");
            }
            spec.columns.push_back(std::move(c));
        } else if (head == "target") {
            std::string what;
            words >> what;
            if (what == "intercept") {
                std::string v;
                words >> v;
                spec.target_intercept = detail::parse_number(v, where);
            } else if (what == "linear") {
                auto t = detail::parse_target_term(words, where);
                std::string coef;
                words >> coef;
                spec.target_linear.emplace_back(t, detail::parse_number(coef, where));
            } else if (what == "interaction") {
                auto a = detail::parse_target_term(words, where);
                auto b = detail::parse_target_term(words, where);
                std::string coef;
                words >> coef;
                spec.target_interactions.emplace_back(a, b, detail::parse_number(coef, where));
            } else {
                throw ValidationError(where + ": unknown target directive '" + what + "'");
            }
        } else {
            throw ValidationError(where + ": unknown directive '" + head + "'");
        }
    }
    if (!saw_header) throw ValidationError(origin + ": empty credit config");
    return spec;
}

inline CreditSimSpec load_credit_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open credit config '" + path + "'");
    return parse_credit_spec(in, path);
}

struct CreditSimConfig {
    Eigen::Index n = 10000;
    std::uint64_t seed = 0;
    int latent_source_dim = 11;
    bool include_protected = true;
};

struct CreditData {
    Dataset predictors;
    Vector target;
    std::vector<std::string> skewed_columns;
};

inline CreditData gen_credit(const CreditSimSpec& spec, const CreditSimConfig& cfg) {
    if (cfg.n < 100) throw std::invalid_argument("gen_credit: n must be at least 100");
    if (cfg.latent_source_dim < 1) throw std::invalid_argument("gen_credit: latent_source_dim must be positive");
    if (cfg.latent_source_dim < spec.sources)
        throw std::invalid_argument("gen_credit: config references " + std::to_string(spec.sources) + " sources");

    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < spec.columns.size(); ++k) index[spec.columns[k].name] = k;
    auto lookup = [&](const std::string& name) {
        const auto it = index.find(name);
        if (it == index.end()) throw ValidationError("credit config: unknown column '" + name + "'");
        return it->second;
    };

    const auto p_all = spec.columns.size();
    Matrix all(cfg.n, static_cast<Eigen::Index>(p_all));
    Vector target(cfg.n);
    Vector s(cfg.latent_source_dim);
    for (Eigen::Index i = 0; i < cfg.n; ++i) {
        Rng rng = make_rng(cfg.seed, {static_cast<std::uint64_t>(i / kBlockRows), static_cast<std::uint64_t>(i % kBlockRows)});
        for (Eigen::Index k = 0; k < s.size(); ++k) s[k] = standard_normal(rng);
        for (std::size_t k = 0; k < p_all; ++k) {
            const auto& c = spec.columns[k];
            double eta = c.intercept;
            for (auto [src, coef] : c.loadings) eta += coef * s[src];
            for (auto [src, coef] : c.squares) eta += coef * s[src] * s[src];
            const double e = standard_normal(rng); // drawn for every column to keep streams aligned
            double v = 0.0;
            switch (c.generator) {
            case Generator::Linear:
            case Generator::Quadratic: v = eta + c.noise * e; break;
            case Generator::Lognormal: v = std::exp(eta + c.noise * e); break;
            case Generator::Logistic: v = 1.0 / (1.0 + std::exp(-(eta + c.noise * e))); break;
            case Generator::Poisson: {
                std::poisson_distribution<long> pois(std::exp(eta + c.noise * e));
                v = static_cast<double>(pois(rng));
                break;
            }
            case Generator::GatedLognormal: {
                const double gate = all(i, static_cast<Eigen::Index>(lookup(c.gate)));
                v = gate == 0.0 ? 0.0 : std::exp(eta + c.gate_coef * gate + c.noise * e);
                break;
            }
            case Generator::Threshold: {
                const double latent = eta + c.noise * e;
                v = static_cast<double>(std::upper_bound(c.cuts.begin(), c.cuts.end(), latent) - c.cuts.begin());
                break;
            }
            }
            all(i, static_cast<Eigen::Index>(k)) = v;
        }
        auto term = [&](const TargetTerm& t) {
            double x = all(i, static_cast<Eigen::Index>(lookup(t.column)));
            if (t.log1p) x = std::log1p(std::max(x, 0.0));
            return (x - t.center) / t.scale;
        };
        double logit = spec.target_intercept;
        for (const auto& [t, coef] : spec.target_linear) logit += coef * term(t);
        for (const auto& [a, b, coef] : spec.target_interactions) logit += coef * term(a) * term(b);
        target[i] = uniform01(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1.0 : 0.0;
    }

    Schema schema;
    std::vector<Eigen::Index> keep;
    CreditData out;
    for (std::size_t k = 0; k < p_all; ++k) {
        const auto& c = spec.columns[k];
        if (c.protected_attribute && !cfg.include_protected) continue;
        ColumnSchema col{c.name, ColumnKind::continuous(), false, c.lower, c.upper};
        if (c.generator == Generator::Threshold)
            col.kind = c.cuts.size() == 1 ? ColumnKind::binary() : ColumnKind::categorical(static_cast<int>(c.cuts.size()) + 1);
        if (col.kind.is_discrete()) col.lower_bound = col.upper_bound = std::nullopt;
        schema.push_back(col);
        keep.push_back(static_cast<Eigen::Index>(k));
        if (c.skewed) out.skewed_columns.push_back(c.name);
    }
    Matrix kept(cfg.n, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) kept.col(static_cast<Eigen::Index>(k)) = all.col(keep[k]);
    out.predictors = Dataset(std::move(schema), std::move(kept));
    out.target = std::move(target);
    return out;
}

// Sample skewness (population moments).
inline double skewness(const Eigen::Ref<const Vector>& x) {
    const double m = x.mean();
    const double m2 = (x.array() - m).square().mean();
    const double m3 = (x.array() - m).cube().mean();
    return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

} // namespace tabsynth
