// tabsynth command line: simulate, fit, generate, perturb, evaluate,
// robustness, traverse.
//
// Every subcommand writes into an output directory. Inputs are loaded and
// checked first; only then is manifest.json (the fully resolved options)
// written, followed by the data files.
//
// Exit codes: 0 success, 1 usage, 2 data validation or I/O, 3 numeric
// failure or a violated robustness invariant.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tabsynth/tabsynth.hpp"

namespace fs = std::filesystem;
using namespace tabsynth;

namespace {

constexpr const char* kVersion = "1.0.0";

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvariantBreach : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Every option of `app` and its parents with its effective value.
nlohmann::json resolved_options(const CLI::App* app) {
    nlohmann::json out = nlohmann::json::object();
    for (const CLI::App* a = app; a; a = a->get_parent()) {
        for (const CLI::Option* opt : a->get_options()) {
            const std::string name = opt->get_single_name();
            if (name == "help" || name == "config" || name == "version" || out.contains(name)) continue;
            if (opt->count() > 0) {
                const auto& r = opt->results();
                out[name] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
            } else if (opt->get_items_expected_max() == 0) {
                out[name] = "false";
            } else {
                out[name] = opt->get_default_str().empty() ? nlohmann::json(nullptr) : nlohmann::json(opt->get_default_str());
            }
        }
    }
    return out;
}

std::string command_path(const CLI::App* app) {
    std::string path;
    for (const CLI::App* a = app; a && a->get_parent(); a = a->get_parent()) path = a->get_name() + (path.empty() ? "" : " " + path);
    return path;
}

void prepare_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ValidationError("cannot create output directory '" + dir.string() + "'");
}

void write_manifest(const fs::path& dir, const CLI::App* app, const nlohmann::json& extra = {}) {
    prepare_out_dir(dir);
    nlohmann::json m{{"tool", "tabsynth"}, {"version", kVersion}, {"command", command_path(app)},
                     {"options", resolved_options(app)}};
    if (!extra.is_null()) m["details"] = extra;
    std::ofstream f(dir / "manifest.json", std::ios::binary);
    if (!f) throw ValidationError("cannot write manifest in '" + dir.string() + "'");
    f << m.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_dataset(const fs::path& dir, const std::string& stem, const Dataset& ds) {
    std::ostringstream csv, schema;
    write_csv(csv, ds);
    write_schema(schema, ds.schema());
    write_text(dir / (stem + ".csv"), csv.str());
    write_text(dir / (stem + ".schema"), schema.str());
}

// CSV with an optional schema: explicit path, else a sibling .schema file,
// else inferred.
Dataset load_data(const std::string& csv, const std::string& schema_path) {
    std::optional<Schema> schema;
    if (!schema_path.empty()) {
        schema = read_schema(schema_path);
    } else {
        fs::path sibling = fs::path(csv).replace_extension(".schema");
        if (fs::exists(sibling)) schema = read_schema(sibling.string());
    }
    return load_csv(csv, schema);
}

Vector load_target(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    auto t = read_csv_table(in, path);
    if (t.header.size() != 1) throw ValidationError(path + ": target file must have exactly one column");
    return t.values.col(0);
}

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    for (std::string part; std::getline(ss, part, ',');) {
        double v = 0.0;
        if (!tabsynth::detail::parse_double(part, v)) throw UsageError(std::string("bad number in ") + what + ": '" + part + "'");
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(std::string(what) + " is empty");
    return out;
}

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string part; std::getline(ss, part, ',');)
        if (!part.empty()) out.push_back(part);
    return out;
}

// Non-negative continuous columns with sample skewness above 1.
std::vector<std::string> skewed_columns(const Dataset& ds) {
    std::vector<std::string> out;
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        const auto& c = ds.column(j);
        if (c.kind.is_discrete() || c.log_transformed) continue;
        const Vector v = ds.values().col(j);
        if (v.minCoeff() >= 0.0 && skewness(v) > 1.0) out.push_back(c.name);
    }
    return out;
}

std::vector<std::string> resolve_log_columns(const Dataset& ds, const std::string& names, bool automatic) {
    if (automatic && !names.empty()) throw UsageError("--log and --log-auto are mutually exclusive");
    auto cols = automatic ? skewed_columns(ds) : split_names(names);
    for (const auto& c : cols) {
        const auto j = ds.index_of(c);
        if (ds.column(j).kind.is_discrete()) throw ValidationError("cannot log-transform discrete column '" + c + "'");
        if (ds.values().col(j).minCoeff() < 0.0) throw ValidationError("cannot log-transform '" + c + "': negative values");
    }
    return cols;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
    std::string out = ".";
    std::uint64_t seed = 0;
    Eigen::Index n = 10000;
    // credit
    std::string sim_config = std::string(TABSYNTH_CONFIG_DIR) + "/credit_sim_v1.cfg";
    int sources = 11;
    bool no_protected = false;
    // half circle
    double radius = 3.0;
    double noise = 0.2;
    std::vector<double> sparse;
    // cuboid
    std::vector<double> dims{1.0, 2.0, 3.0};
};

void add_common_seed(CLI::App* sub, std::uint64_t& seed) {
    sub->add_option("--seed", seed, "Master random seed")->required();
}

void run_simulate_credit(const CLI::App* app, const SimulateArgs& a) {
    const auto spec = load_credit_spec(a.sim_config);
    const CreditSimConfig cfg{a.n, a.seed, a.sources, !a.no_protected};
    if (cfg.n < 100) throw UsageError("--n must be at least 100 for credit data");
    if (cfg.latent_source_dim < spec.sources) throw UsageError("--sources is smaller than the config's source count");
    write_manifest(a.out, app, {{"credit_config_version", spec.version}});
    const auto data = gen_credit(spec, cfg);
    write_dataset(a.out, "predictors", data.predictors);
    std::ostringstream t;
    t << "target\n";
    for (double v : data.target) t << format_double(v) << '\n';
    write_text(fs::path(a.out) / "target.csv", t.str());
    write_text(fs::path(a.out) / "skewed_columns.txt", join(data.skewed_columns) + "\n");
}

void run_simulate_half_circle(const CLI::App* app, const SimulateArgs& a) {
    if (a.n < 1) throw UsageError("--n must be positive");
    if (!(a.radius > 0.0)) throw UsageError("--radius must be positive");
    if (!(a.noise >= 0.0)) throw UsageError("--noise must be non-negative");
    std::optional<AngleInterval> sparse;
    if (!a.sparse.empty()) {
        if (a.sparse.size() != 2) throw UsageError("--sparse takes two angles: LO,HI");
        sparse = AngleInterval{a.sparse[0], a.sparse[1]};
        if (!(sparse->lo >= 0.0 && sparse->lo < sparse->hi && sparse->hi <= std::numbers::pi))
            throw UsageError("--sparse must satisfy 0 <= LO < HI <= pi");
    }
    write_manifest(a.out, app);
    write_dataset(a.out, "half_circle", gen_half_circle(a.n, a.radius, a.noise, sparse, a.seed));
}

void run_simulate_cuboid(const CLI::App* app, const SimulateArgs& a) {
    if (a.n < 1) throw UsageError("--n must be positive");
    if (a.dims.size() != 3) throw UsageError("--dims takes three lengths: A,B,C");
    if (!(a.dims[0] > 0 && a.dims[1] > 0 && a.dims[2] > 0)) throw UsageError("--dims must be positive");
    if (!(a.dims[0] < a.dims[1] && a.dims[1] < a.dims[2])) throw UsageError("--dims must satisfy A < B < C");
    write_manifest(a.out, app);
    write_dataset(a.out, "cuboid", gen_cuboid_surface(a.n, a.dims[0], a.dims[1], a.dims[2], a.seed));
}

// --- fit ----------------------------------------------------------------------

struct FitArgs {
    std::string data, schema, out = ".", log;
    bool log_auto = false;
    int latent_dim = 10;
    double sparsity = 0.0;
    int clusters = 1;
    int depth = 2;
    int rounds = 200;
    double learning_rate = 0.1;
    bool no_standardize = false;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

ModelBundle fit_bundle(const Dataset& ds, const FitArgs& a) {
    EncoderConfig ec{a.latent_dim, a.sparsity, a.clusters, a.seed, a.threads, !a.no_standardize};
    auto fit = fit_encoder(ds, ec);
    ModelBundle b;
    b.latents = encode(fit.encoder, ds, fit.clusters);
    DecoderConfig dc;
    dc.max_depth = a.depth;
    dc.rounds = a.rounds;
    dc.learning_rate = a.learning_rate;
    dc.threads = a.threads;
    b.forest = fit_decoder_forest(b.latents, ds, fit.encoder, fit.clusters.assignments, dc);
    b.sampler = fit_marginals(b.latents, fit.clusters.assignments, fit.clusters.k);
    b.assignments = fit.clusters.assignments;
    b.encoder = std::move(fit.encoder);
    return b;
}

void check_fit_args(const FitArgs& a, const Dataset& ds) {
    if (a.latent_dim < 1 || a.latent_dim > ds.cols()) throw UsageError("--latent-dim must lie in [1, column count]");
    if (!(a.sparsity >= 0.0)) throw UsageError("--sparsity must be non-negative");
    if (a.clusters < 1 || a.clusters > ds.rows()) throw UsageError("--clusters must lie in [1, row count]");
    BoostConfig{Loss::SquaredError, a.depth, a.rounds, a.learning_rate}.validate();
}

void run_fit(const CLI::App* app, const FitArgs& a) {
    const Dataset raw = load_data(a.data, a.schema);
    check_fit_args(a, raw);
    const auto logs = resolve_log_columns(raw, a.log, a.log_auto);
    const Dataset ds = log_transform(raw, logs);
    write_manifest(a.out, app, {{"log_columns", logs}, {"rows", ds.rows()}, {"columns", ds.cols()}});
    const auto bundle = fit_bundle(ds, a);
    save_bundle((fs::path(a.out) / "bundle.json").string(), bundle);
    std::ostringstream r;
    r << "cluster,component,explained_variance_ratio\n";
    for (std::size_t c = 0; c < bundle.encoder.clusters.size(); ++c) {
        const auto& sub = bundle.encoder.clusters[c];
        for (Eigen::Index k = 0; k < sub.explained_variance_ratio.size(); ++k)
            r << c << ',' << k << ',' << format_double(sub.explained_variance_ratio[k]) << '\n';
        for (const auto& w : sub.warnings) std::cerr << "warning: cluster " << c << ": " << w << '\n';
    }
    write_text(fs::path(a.out) / "explained_variance.csv", r.str());
}

// --- generate -------------------------------------------------------------

struct GenerateArgs {
    std::string bundle, out = ".";
    Eigen::Index count = 1000;
    std::uint64_t seed = 0;
    bool ica = false;
    bool truncate = false;
};

void run_generate(const CLI::App* app, const GenerateArgs& a) {
    if (a.count < 1) throw UsageError("--count must be positive");
    const auto b = load_bundle(a.bundle);
    if (a.ica && b.encoder.latent_dim < 2) throw UsageError("--ica needs a latent dimension of at least 2");
    write_manifest(a.out, app);
    Dataset syn;
    if (a.ica) {
        std::vector<std::string> warnings;
        const auto draw = ica_sample_latents(b.latents, b.assignments, b.sampler.weights, a.count, a.seed, &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
        syn = decode(b.forest, draw.z, &draw.assignments);
    } else {
        syn = sample_synthetic(b.sampler, b.forest, a.count, a.seed);
    }
    if (a.truncate) syn = truncate(syn);
    write_dataset(a.out, "synthetic", syn);
}

// --- perturb --------------------------------------------------------------

struct PerturbArgs {
    std::string data, schema, bundle, out = ".", strategy = "model";
    double budget = 0.05;
    int replicates = 1;
    std::uint64_t seed = 0;
    bool truncate = false;
    bool no_residual = false;
};

std::string replicate_name(const std::string& strategy, double budget, int r) {
    std::ostringstream s;
    s << "perturbed_" << strategy << "_b" << format_double(budget) << "_r" << std::setw(3) << std::setfill('0') << r
      << ".csv";
    return s.str();
}

void run_perturb(const CLI::App* app, const PerturbArgs& a) {
    const auto kind = parse_strategy(a.strategy);
    const Dataset ds = load_data(a.data, a.schema);
    PerturbationPlan plan;
    plan.replicates = a.replicates;
    plan.seed = a.seed;
    plan.truncate = a.truncate;
    std::optional<ModelBundle> bundle;
    switch (kind) {
    case StrategyKind::ModelBased:
        if (a.bundle.empty()) throw UsageError("--strategy model needs --bundle");
        bundle = load_bundle(a.bundle);
        check_bundle_schema(*bundle, ds.schema());
        plan.strategy = ModelBased{a.budget, !a.no_residual};
        break;
    case StrategyKind::Raw: plan.strategy = Raw{a.budget}; break;
    case StrategyKind::Quantile: plan.strategy = Quantile{a.budget}; break;
    }
    plan.validate();
    write_manifest(a.out, app);
    const auto outs = perturb(ds, plan, bundle ? &bundle->encoder : nullptr, bundle ? &bundle->forest : nullptr);
    const std::string tag = to_string(kind);
    for (std::size_t r = 0; r < outs.size(); ++r) {
        std::ostringstream csv;
        write_csv(csv, outs[r]);
        write_text(fs::path(a.out) / replicate_name(tag, a.budget, static_cast<int>(r)), csv.str());
    }
    std::ostringstream schema;
    write_schema(schema, ds.schema());
    write_text(fs::path(a.out) / ("perturbed_" + tag + ".schema"), schema.str());
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
    std::string reference, comparison, reference_schema, comparison_schema, out = ".";
    int bins = 10;
    int hist_bins = 40;
};

void run_evaluate(const CLI::App* app, const EvaluateArgs& a) {
    if (a.bins < 1 || a.hist_bins < 1) throw UsageError("bin counts must be positive");
    const Dataset ref = load_data(a.reference, a.reference_schema);
    const Dataset cmp = load_data(a.comparison, a.comparison_schema);
    require_same_schema(ref.schema(), cmp.schema(), "evaluate");
    write_manifest(a.out, app);

    std::ostringstream psi_csv;
    psi_csv << "column,psi,kl_ref_cmp,kl_cmp_ref,bins,policy\n";
    for (Eigen::Index j = 0; j < ref.cols(); ++j) {
        const auto& kind = ref.column(j).kind;
        const auto r = column_vector(ref, j);
        const auto edges = kind.is_discrete() ? category_edges(kind.levels()) : quantile_edges(r, a.bins);
        const auto P = binned(r, edges), Q = binned(column_vector(cmp, j), edges);
        psi_csv << ref.column(j).name << ',' << format_double(psi(P, Q)) << ',' << format_double(kl(P, Q)) << ','
                << format_double(kl(Q, P)) << ',' << edges.size() - 1 << ',' << (kind.is_discrete() ? "category" : "quantile")
                << '\n';
    }
    write_text(fs::path(a.out) / "psi.csv", psi_csv.str());

    // Histograms on the pooled range so both sources share edges.
    std::ostringstream hist;
    hist << "column,source,bin,lower,upper,mass\n";
    for (Eigen::Index j = 0; j < ref.cols(); ++j) {
        auto r = column_vector(ref, j), c = column_vector(cmp, j);
        std::vector<double> pooled = r;
        pooled.insert(pooled.end(), c.begin(), c.end());
        const auto edges = histogram(pooled, a.hist_bins).edges;
        for (const auto& [name, values] : {std::pair{"reference", &r}, std::pair{"comparison", &c}}) {
            const auto m = bin_proportions(*values, edges);
            for (std::size_t b = 0; b < m.size(); ++b)
                hist << ref.column(j).name << ',' << name << ',' << b << ',' << format_double(edges[b]) << ','
                     << format_double(edges[b + 1]) << ',' << format_double(m[b]) << '\n';
        }
    }
    write_text(fs::path(a.out) / "histograms.csv", hist.str());

    const auto cr = correlation_map(ref), cc = correlation_map(cmp);
    std::ostringstream corr;
    corr << "source,row";
    for (const auto& c : ref.schema()) corr << ',' << c.name;
    corr << '\n';
    for (const auto& [name, m] : {std::pair{"reference", &cr.r}, std::pair{"comparison", &cc.r}})
        for (Eigen::Index i = 0; i < m->rows(); ++i) {
            corr << name << ',' << ref.column(i).name;
            for (Eigen::Index k = 0; k < m->cols(); ++k) corr << ',' << format_double((*m)(i, k));
            corr << '\n';
        }
    write_text(fs::path(a.out) / "correlation.csv", corr.str());
    std::ostringstream summary;
    summary << "metric,value\ncorrelation_distance," << format_double(correlation_distance(cr.r, cc.r)) << '\n';
    write_text(fs::path(a.out) / "summary.csv", summary.str());
    for (const auto& w : cr.warnings) std::cerr << "warning: reference: " << w << '\n';
    for (const auto& w : cc.warnings) std::cerr << "warning: comparison: " << w << '\n';

    if (ref.rows() == cmp.rows()) {
        const auto eff = effective_perturbation(ref, cmp);
        std::ostringstream e;
        e << "column,effective_perturbation\n";
        for (std::size_t j = 0; j < eff.size(); ++j) e << ref.schema()[j].name << ',' << format_double(eff[j]) << '\n';
        write_text(fs::path(a.out) / "effective_perturbation.csv", e.str());
    }
}

// --- robustness ----------------------------------------------------------------

struct RobustnessArgs {
    std::string data, schema, target, out = ".", log;
    std::string budgets = "0,0.001,0.005,0.01,0.05,0.1,1";
    std::string strategies = "model,raw,quantile";
    bool log_auto = false;
    int replicates = 10;
    double train_fraction = 0.7;
    int latent_dim = 10;
    int clusters = 1;
    int depth = 2;
    int rounds = 200;
    bool truncate = false;
    bool no_residual = false;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

void run_robustness_cmd(const CLI::App* app, const RobustnessArgs& a) {
    const Dataset ds = load_data(a.data, a.schema);
    const Vector y = load_target(a.target);
    if (y.size() != ds.rows()) throw ValidationError("target has " + std::to_string(y.size()) + " rows, data has " +
                                                     std::to_string(ds.rows()));
    require_binary_target(y, "robustness");
    StudyConfig sc;
    sc.train_fraction = a.train_fraction;
    sc.split_seed = derive_seed(a.seed, {0});
    sc.log_columns = resolve_log_columns(ds, a.log, a.log_auto);
    sc.encoder = {a.latent_dim, 0.0, a.clusters, derive_seed(a.seed, {1}), a.threads, true};
    sc.decoder.max_depth = a.depth;
    sc.decoder.rounds = a.rounds;
    sc.decoder.threads = a.threads;
    sc.robustness.budgets = normalize_budgets(parse_list(a.budgets, "--budgets"));
    sc.robustness.strategies.clear();
    for (const auto& s : split_names(a.strategies)) sc.robustness.strategies.push_back(parse_strategy(s));
    if (sc.robustness.strategies.empty()) throw UsageError("--strategies is empty");
    sc.robustness.replicates = a.replicates;
    sc.robustness.seed = derive_seed(a.seed, {2});
    sc.robustness.truncate = a.truncate;
    sc.robustness.residual_correction = !a.no_residual;
    sc.robustness.threads = a.threads;
    if (a.replicates < 1) throw UsageError("--replicates must be at least 1");
    if (!(a.train_fraction > 0.0 && a.train_fraction < 1.0)) throw UsageError("--train-fraction must lie in (0, 1)");
    if (a.latent_dim < 1 || a.latent_dim > ds.cols()) throw UsageError("--latent-dim must lie in [1, column count]");
    write_manifest(a.out, app, {{"log_columns", sc.log_columns}});
    const auto result = run_study(ds, y, sc);
    emit_report(result.report, a.out);
    if (!result.report.violations.empty()) {
        std::string msg = "robustness invariants violated:";
        for (const auto& v : result.report.violations) msg += "\n  " + v;
        throw InvariantBreach(msg);
    }
}

// --- traverse ------------------------------------------------------------------

struct TraverseArgs {
    std::string bundle, out = ".";
    int dim = 0;
    int cluster = 0;
    int steps = 21;
    std::optional<double> lo, hi;
};

void run_traverse(const CLI::App* app, const TraverseArgs& a) {
    const auto b = load_bundle(a.bundle);
    if (a.dim < 0 || a.dim >= b.encoder.latent_dim) throw UsageError("--dim out of range");
    if (a.cluster < 0 || a.cluster >= b.encoder.k()) throw UsageError("--cluster out of range");
    if (a.steps < 2) throw UsageError("--steps must be at least 2");
    const auto& marg = b.sampler.marginals[static_cast<std::size_t>(a.cluster)];
    // Anchor at the per-dimension medians; default range spans twice the
    // observed range so out-of-range behaviour is visible.
    Vector anchor(b.encoder.latent_dim);
    for (int d = 0; d < b.encoder.latent_dim; ++d) anchor[d] = marg[static_cast<std::size_t>(d)].from_uniform(0.5);
    const auto& sv = marg[static_cast<std::size_t>(a.dim)].sorted_values();
    const double span = sv.back() - sv.front();
    const double lo = a.lo.value_or(sv.front() - 0.5 * span), hi = a.hi.value_or(sv.back() + 0.5 * span);
    if (!(lo < hi)) throw UsageError("traversal range must satisfy lo < hi");
    write_manifest(a.out, app, {{"lo", lo}, {"hi", hi}, {"observed_min", sv.front()}, {"observed_max", sv.back()}});
    const Dataset t = latent_traversal(b.forest, a.dim, lo, hi, a.steps, anchor, a.cluster);
    const Vector grid = traversal_grid(lo, hi, a.steps);
    std::ostringstream csv;
    csv << "step,z,in_range";
    for (const auto& c : t.schema()) csv << ',' << c.name;
    csv << '\n';
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
        csv << i << ',' << format_double(grid[i]) << ',' << (grid[i] >= sv.front() && grid[i] <= sv.back() ? 1 : 0);
        for (Eigen::Index j = 0; j < t.cols(); ++j) csv << ',' << format_double(t(i, j));
        csv << '\n';
    }
    write_text(fs::path(a.out) / "traversal.csv", csv.str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tabsynth: synthetic tabular data and model-based perturbation"};
    app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // simulate
    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate toy or credit datasets");
    simulate->require_subcommand(1);
    auto add_sim_common = [&](CLI::App* s) {
        s->add_option("--out", sim.out, "Output directory")->capture_default_str();
        add_common_seed(s, sim.seed);
        s->add_option("--n", sim.n, "Row count")->capture_default_str();
    };
    auto* credit = simulate->add_subcommand("credit", "21-predictor credit data with a binary target");
    add_sim_common(credit);
    credit->add_option("--sim-config", sim.sim_config, "Credit generator config")->capture_default_str();
    credit->add_option("--sources", sim.sources, "Latent source dimension")->capture_default_str();
    credit->add_flag("--no-protected", sim.no_protected, "Drop the protected attributes G and R");
    auto* half = simulate->add_subcommand("half-circle", "Noisy half circle");
    add_sim_common(half);
    half->add_option("--radius", sim.radius, "Radius")->capture_default_str();
    half->add_option("--noise", sim.noise, "Gaussian noise sd on both coordinates")->capture_default_str();
    half->add_option("--sparse", sim.sparse, "Angle band LO,HI kept at 10% density")->delimiter(',');
    auto* cuboid = simulate->add_subcommand("cuboid", "Uniform points on a box surface");
    add_sim_common(cuboid);
    cuboid->add_option("--dims", sim.dims, "Side lengths A,B,C with A < B < C")->delimiter(',')->capture_default_str();

    // fit
    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit encoder, decoder forest and latent sampler; writes bundle.json");
    fit_cmd->add_option("--data", fit.data, "Input CSV")->required();
    fit_cmd->add_option("--schema", fit.schema, "Schema sidecar (default: <data>.schema if present, else inferred)");
    fit_cmd->add_option("--out", fit.out, "Output directory")->capture_default_str();
    fit_cmd->add_option("--log", fit.log, "Comma-separated columns to log1p-transform before fitting");
    fit_cmd->add_flag("--log-auto", fit.log_auto, "Log-transform non-negative continuous columns with skewness > 1");
    fit_cmd->add_option("--latent-dim", fit.latent_dim, "Latent dimension l")->capture_default_str();
    fit_cmd->add_option("--sparsity", fit.sparsity, "l1 penalty alpha; 0 gives plain PCA")->capture_default_str();
    fit_cmd->add_option("--clusters", fit.clusters, "k-means clusters k")->capture_default_str();
    fit_cmd->add_flag("--no-standardize", fit.no_standardize,
                      "Center columns without scaling them (same-unit data such as point clouds)");
    fit_cmd->add_option("--depth", fit.depth, "Decoder tree depth (1: additive, 2: pairwise interactions)")->capture_default_str();
    fit_cmd->add_option("--rounds", fit.rounds, "Boosting rounds per decoder model")->capture_default_str();
    fit_cmd->add_option("--learning-rate", fit.learning_rate, "Boosting learning rate")->capture_default_str();
    fit_cmd->add_option("--seed", fit.seed, "Seed for clustering")->capture_default_str();
    fit_cmd->add_option("--threads", fit.threads, "Worker threads")->capture_default_str();

    // generate
    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "Sample synthetic rows from a fitted bundle");
    gen_cmd->add_option("--bundle", gen.bundle, "bundle.json from fit")->required();
    gen_cmd->add_option("--count", gen.count, "Rows to generate")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();
    add_common_seed(gen_cmd, gen.seed);
    gen_cmd->add_flag("--ica", gen.ica, "Sample independent components instead of per-dimension latent marginals");
    gen_cmd->add_flag("--truncate", gen.truncate, "Clamp outputs to schema bounds");

    // perturb
    PerturbArgs pert;
    auto* pert_cmd = app.add_subcommand(
        "perturb", "Perturb a dataset: model-based (X + Xhat_eps - Xhat), raw Gaussian or quantile noise");
    pert_cmd->add_option("--data", pert.data, "Input CSV")->required();
    pert_cmd->add_option("--schema", pert.schema, "Schema sidecar");
    pert_cmd->add_option("--bundle", pert.bundle, "bundle.json (model strategy)");
    pert_cmd->add_option("--out", pert.out, "Output directory")->capture_default_str();
    pert_cmd->add_option("--strategy", pert.strategy, "model | raw | quantile")->capture_default_str();
    pert_cmd->add_option("--budget", pert.budget,
                         "Noise budget: epsilon for model (useful range 1e-2 to 1e-1), sd multiple for raw, "
                         "quantile half-width in [0, 1] for quantile")
        ->capture_default_str();
    pert_cmd->add_option("--replicates", pert.replicates, "Replicate count")->capture_default_str();
    add_common_seed(pert_cmd, pert.seed);
    pert_cmd->add_flag("--truncate", pert.truncate, "Clamp outputs to schema bounds");
    pert_cmd->add_flag("--no-residual", pert.no_residual, "Model strategy: emit Xhat_eps instead of X + Xhat_eps - Xhat");

    // evaluate
    EvaluateArgs ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "PSI, KL, histograms, correlation and effective perturbation");
    ev_cmd->add_option("--reference", ev.reference, "Reference CSV")->required();
    ev_cmd->add_option("--comparison", ev.comparison, "Comparison CSV")->required();
    ev_cmd->add_option("--reference-schema", ev.reference_schema, "Reference schema sidecar");
    ev_cmd->add_option("--comparison-schema", ev.comparison_schema, "Comparison schema sidecar");
    ev_cmd->add_option("--out", ev.out, "Output directory")->capture_default_str();
    ev_cmd->add_option("--bins", ev.bins, "PSI quantile bins")->capture_default_str();
    ev_cmd->add_option("--hist-bins", ev.hist_bins, "Histogram bins")->capture_default_str();

    // robustness
    RobustnessArgs rb;
    auto* rb_cmd = app.add_subcommand("robustness", "Benchmark models scored under perturbation budget sweeps");
    rb_cmd->add_option("--data", rb.data, "Predictor CSV")->required();
    rb_cmd->add_option("--schema", rb.schema, "Schema sidecar");
    rb_cmd->add_option("--target", rb.target, "Single-column 0/1 target CSV")->required();
    rb_cmd->add_option("--out", rb.out, "Output directory")->capture_default_str();
    rb_cmd->add_option("--log", rb.log, "Columns to log-transform for the model-based encoder");
    rb_cmd->add_flag("--log-auto", rb.log_auto, "Log-transform non-negative continuous columns with skewness > 1");
    rb_cmd->add_option("--budgets", rb.budgets, "Comma-separated budget grid")->capture_default_str();
    rb_cmd->add_option("--strategies", rb.strategies, "Comma-separated subset of model,raw,quantile")->capture_default_str();
    rb_cmd->add_option("--replicates", rb.replicates, "Replicates per budget")->capture_default_str();
    rb_cmd->add_option("--train-fraction", rb.train_fraction, "Training share of the split")->capture_default_str();
    rb_cmd->add_option("--latent-dim", rb.latent_dim, "Encoder latent dimension")->capture_default_str();
    rb_cmd->add_option("--clusters", rb.clusters, "Encoder clusters")->capture_default_str();
    rb_cmd->add_option("--depth", rb.depth, "Decoder tree depth")->capture_default_str();
    rb_cmd->add_option("--rounds", rb.rounds, "Decoder boosting rounds")->capture_default_str();
    rb_cmd->add_flag("--truncate", rb.truncate, "Clamp perturbed features to schema bounds");
    rb_cmd->add_flag("--no-residual", rb.no_residual, "Model strategy without residual correction");
    add_common_seed(rb_cmd, rb.seed);
    rb_cmd->add_option("--threads", rb.threads, "Worker threads")->capture_default_str();

    // traverse
    TraverseArgs tr;
    auto* tr_cmd = app.add_subcommand("traverse", "Decode a sweep along one latent dimension");
    tr_cmd->add_option("--bundle", tr.bundle, "bundle.json from fit")->required();
    tr_cmd->add_option("--out", tr.out, "Output directory")->capture_default_str();
    tr_cmd->add_option("--dim", tr.dim, "Latent dimension to sweep")->capture_default_str();
    tr_cmd->add_option("--cluster", tr.cluster, "Cluster whose decoders are used")->capture_default_str();
    tr_cmd->add_option("--steps", tr.steps, "Grid length")->capture_default_str();
    tr_cmd->add_option("--lo", tr.lo, "Grid start (default: observed min - half the range)");
    tr_cmd->add_option("--hi", tr.hi, "Grid end (default: observed max + half the range)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (credit->parsed()) run_simulate_credit(credit, sim);
        else if (half->parsed()) run_simulate_half_circle(half, sim);
        else if (cuboid->parsed()) run_simulate_cuboid(cuboid, sim);
        else if (fit_cmd->parsed()) run_fit(fit_cmd, fit);
        else if (gen_cmd->parsed()) run_generate(gen_cmd, gen);
        else if (pert_cmd->parsed()) run_perturb(pert_cmd, pert);
        else if (ev_cmd->parsed()) run_evaluate(ev_cmd, ev);
        else if (rb_cmd->parsed()) run_robustness_cmd(rb_cmd, rb);
        else if (tr_cmd->parsed()) run_traverse(tr_cmd, tr);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const InvariantBreach& e) {
        std::cerr << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
