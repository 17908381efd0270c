#pragma once

// JSON model bundle: schema, encoder, decoder forest, latent sampler and the
// training latents. Loading checks the format version and the schema hash.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "decoder.hpp"
#include "encoder.hpp"
#include "sampler.hpp"

namespace tabsynth {

inline constexpr int kBundleVersion = 1;

struct ModelBundle {
    EncoderModel encoder;
    DecoderForest forest;
    LatentSampler sampler;
    Matrix latents;               // training codes, for ICA sampling
    std::vector<int> assignments; // training cluster labels
};

namespace io {

using nlohmann::json;

inline json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

inline Matrix matrix_from(const json& j) {
    Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    const auto& rows = j.at("data");
    if (static_cast<Eigen::Index>(rows.size()) != m.rows()) throw ValidationError("bundle: matrix row count mismatch");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const Vector r = vector_from(rows[static_cast<std::size_t>(i)]);
        if (r.size() != m.cols()) throw ValidationError("bundle: matrix column count mismatch");
        m.row(i) = r.transpose();
    }
    return m;
}

inline json to_json(const Schema& s) {
    json out = json::array();
    for (const auto& c : s) {
        json col{{"name", c.name}, {"kind", to_string(c.kind)}, {"log", c.log_transformed}};
        if (c.lower_bound) col["lower"] = *c.lower_bound;
        if (c.upper_bound) col["upper"] = *c.upper_bound;
        out.push_back(col);
    }
    return out;
}

inline Schema schema_from(const json& j) {
    Schema s;
    for (const auto& col : j) {
        ColumnSchema c{col.at("name").get<std::string>(), parse_kind(col.at("kind").get<std::string>()),
                       col.at("log").get<bool>()};
        if (col.contains("lower")) c.lower_bound = col["lower"].get<double>();
        if (col.contains("upper")) c.upper_bound = col["upper"].get<double>();
        s.push_back(std::move(c));
    }
    validate_schema(s);
    return s;
}

inline json to_json(const BoostConfig& c) {
    return {{"loss", to_string(c.loss)}, {"max_depth", c.max_depth},   {"rounds", c.rounds},
            {"learning_rate", c.learning_rate}, {"lambda", c.lambda}, {"gamma", c.gamma}};
}

inline BoostConfig boost_config_from(const json& j) {
    BoostConfig c{parse_loss(j.at("loss").get<std::string>()), j.at("max_depth").get<int>(), j.at("rounds").get<int>(),
                  j.at("learning_rate").get<double>(), j.at("lambda").get<double>(), j.at("gamma").get<double>()};
    c.validate();
    return c;
}

// Trees are stored as parallel arrays to keep bundles compact.
inline json to_json(const BoostedModel& m) {
    json trees = json::array();
    for (const auto& t : m.trees) {
        std::vector<int> f, l, r;
        std::vector<double> thr, w;
        for (const auto& n : t.nodes) {
            f.push_back(n.feature);
            l.push_back(n.left);
            r.push_back(n.right);
            thr.push_back(n.threshold);
            w.push_back(n.weight);
        }
        trees.push_back({{"feature", f}, {"threshold", thr}, {"left", l}, {"right", r}, {"weight", w}});
    }
    return {{"config", to_json(m.config)}, {"base_score", m.base_score}, {"num_features", m.num_features}, {"trees", trees}};
}

inline BoostedModel boosted_from(const json& j) {
    BoostedModel m;
    m.config = boost_config_from(j.at("config"));
    m.base_score = j.at("base_score").get<double>();
    m.num_features = j.at("num_features").get<int>();
    for (const auto& t : j.at("trees")) {
        const auto f = t.at("feature").get<std::vector<int>>();
        const auto thr = t.at("threshold").get<std::vector<double>>();
        const auto l = t.at("left").get<std::vector<int>>();
        const auto r = t.at("right").get<std::vector<int>>();
        const auto w = t.at("weight").get<std::vector<double>>();
        const auto n = f.size();
        if (thr.size() != n || l.size() != n || r.size() != n || w.size() != n || n == 0)
            throw ValidationError("bundle: malformed tree");
        Tree tree;
        for (std::size_t k = 0; k < n; ++k) {
            TreeNode node{f[k], thr[k], l[k], r[k], w[k]};
            const int size = static_cast<int>(n);
            if (!node.is_leaf() && (node.feature >= m.num_features || node.left <= static_cast<int>(k) ||
                                    node.right <= static_cast<int>(k) || node.left >= size || node.right >= size))
                throw ValidationError("bundle: malformed tree node");
            tree.nodes.push_back(node);
        }
        m.trees.push_back(std::move(tree));
    }
    return m;
}

inline json to_json(const EncoderModel& e) {
    json clusters = json::array();
    for (const auto& c : e.clusters)
        clusters.push_back({{"means", to_json(c.means)},
                            {"scales", to_json(c.scales)},
                            {"loadings", to_json(c.loadings)},
                            {"explained_variance_ratio", to_json(c.explained_variance_ratio)},
                            {"warnings", c.warnings}});
    return {{"latent_dim", e.latent_dim},          {"sparsity", e.sparsity},
            {"cluster_means", to_json(e.cluster_means)}, {"cluster_scales", to_json(e.cluster_scales)},
            {"centroids", to_json(e.centroids)},   {"clusters", clusters}};
}

inline EncoderModel encoder_from(const json& j, const Schema& schema) {
    EncoderModel e;
    e.schema = schema;
    e.latent_dim = j.at("latent_dim").get<int>();
    e.sparsity = j.at("sparsity").get<double>();
    e.cluster_means = vector_from(j.at("cluster_means"));
    e.cluster_scales = vector_from(j.at("cluster_scales"));
    e.centroids = matrix_from(j.at("centroids"));
    const auto p = static_cast<Eigen::Index>(schema.size());
    for (const auto& c : j.at("clusters")) {
        SubspaceModel s;
        s.means = vector_from(c.at("means"));
        s.scales = vector_from(c.at("scales"));
        s.loadings = matrix_from(c.at("loadings"));
        s.explained_variance_ratio = vector_from(c.at("explained_variance_ratio"));
        s.warnings = c.at("warnings").get<std::vector<std::string>>();
        if (s.means.size() != p || s.scales.size() != p || s.loadings.rows() != p || s.loadings.cols() != e.latent_dim)
            throw ValidationError("bundle: encoder shapes do not match the schema");
        e.clusters.push_back(std::move(s));
    }
    if (e.centroids.rows() != e.k() || e.centroids.cols() != p) throw ValidationError("bundle: centroid shape mismatch");
    return e;
}

inline json to_json(const DecoderForest& f) {
    json clusters = json::array();
    for (const auto& c : f.clusters) {
        json cols = json::array();
        for (const auto& col : c.columns) {
            json models = json::array();
            for (const auto& m : col.models) models.push_back(to_json(m));
            cols.push_back({{"kind", to_string(col.kind)}, {"models", models}});
        }
        clusters.push_back({{"means", to_json(c.means)}, {"scales", to_json(c.scales)}, {"columns", cols}});
    }
    return {{"latent_dim", f.latent_dim}, {"config", to_json(f.config)}, {"clusters", clusters}};
}

inline DecoderForest forest_from(const json& j, const Schema& schema) {
    DecoderForest f;
    f.schema = schema;
    f.schema_hash = schema_hash(schema);
    f.latent_dim = j.at("latent_dim").get<int>();
    f.config = boost_config_from(j.at("config"));
    for (const auto& c : j.at("clusters")) {
        ClusterDecoder cd;
        cd.means = vector_from(c.at("means"));
        cd.scales = vector_from(c.at("scales"));
        for (const auto& col : c.at("columns")) {
            ColumnDecoder d;
            d.kind = parse_kind(col.at("kind").get<std::string>());
            for (const auto& m : col.at("models")) {
                d.models.push_back(boosted_from(m));
                if (d.models.back().num_features != f.latent_dim)
                    throw ValidationError("bundle: decoder model width does not match latent_dim");
            }
            cd.columns.push_back(std::move(d));
        }
        if (cd.columns.size() != schema.size()) throw ValidationError("bundle: decoder column count mismatch");
        f.clusters.push_back(std::move(cd));
    }
    return f;
}

inline json to_json(const LatentSampler& s) {
    json clusters = json::array();
    for (const auto& dims : s.marginals) {
        json d = json::array();
        for (const auto& m : dims) d.push_back(m.sorted_values());
        clusters.push_back(d);
    }
    return {{"weights", s.weights}, {"marginals", clusters}};
}

inline LatentSampler sampler_from(const json& j) {
    LatentSampler s;
    s.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& dims : j.at("marginals")) {
        std::vector<EmpiricalMarginal> d;
        for (const auto& m : dims) d.push_back(EmpiricalMarginal::from_sorted(m.get<std::vector<double>>()));
        s.marginals.push_back(std::move(d));
    }
    if (s.weights.size() != s.marginals.size()) throw ValidationError("bundle: sampler weight count mismatch");
    return s;
}

} // namespace io

inline nlohmann::json bundle_to_json(const ModelBundle& b) {
    using io::to_json;
    return {{"format", "tabsynth-bundle"},
            {"version", kBundleVersion},
            {"schema", to_json(b.encoder.schema)},
            {"schema_hash", schema_hash(b.encoder.schema)},
            {"encoder", to_json(b.encoder)},
            {"forest", to_json(b.forest)},
            {"sampler", to_json(b.sampler)},
            {"latents", to_json(b.latents)},
            {"assignments", b.assignments}};
}

inline ModelBundle bundle_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "tabsynth-bundle") throw ValidationError("not a model bundle");
        if (j.at("version").get<int>() != kBundleVersion)
            throw ValidationError("unsupported bundle version " + std::to_string(j.at("version").get<int>()));
        ModelBundle b;
        const Schema schema = io::schema_from(j.at("schema"));
        if (j.at("schema_hash").get<std::uint64_t>() != schema_hash(schema))
            throw ValidationError("bundle schema hash does not match its schema");
        b.encoder = io::encoder_from(j.at("encoder"), schema);
        b.forest = io::forest_from(j.at("forest"), schema);
        b.sampler = io::sampler_from(j.at("sampler"));
        b.latents = io::matrix_from(j.at("latents"));
        b.assignments = j.at("assignments").get<std::vector<int>>();
        if (b.forest.clusters.size() != b.encoder.clusters.size() || b.sampler.k() != b.encoder.k())
            throw ValidationError("bundle: cluster counts disagree");
        if (b.forest.latent_dim != b.encoder.latent_dim || b.sampler.latent_dim() != b.encoder.latent_dim ||
            b.latents.cols() != b.encoder.latent_dim)
            throw ValidationError("bundle: latent dimensions disagree");
        if (static_cast<Eigen::Index>(b.assignments.size()) != b.latents.rows())
            throw ValidationError("bundle: assignment count mismatch");
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed bundle: ") + e.what());
    }
}

inline void save_bundle(const std::string& path, const ModelBundle& b) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << bundle_to_json(b).dump() << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline ModelBundle load_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open bundle '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("bundle '" + path + "' is not valid JSON: " + e.what());
    }
    return bundle_from_json(j);
}

// Rejects data whose columns differ from the bundle's. Log flags may differ;
// encoding aligns them.
inline void check_bundle_schema(const ModelBundle& b, const Schema& data) {
    require_same_schema(data, b.encoder.schema, "bundle");
}

} // namespace tabsynth
