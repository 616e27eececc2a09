#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "shift/bench.hpp"
#include "shift/ici.hpp"
#include "shift/model_select.hpp"
#include "shift/rng.hpp"
#include "shift/synth.hpp"

namespace {

using namespace shift;

// Resolves the origin column: an explicit name wins; otherwise "origin" is
// used when the header carries it.
std::string resolve_origin_column(const std::string& path, const std::string& requested) {
    if (!requested.empty()) return requested;
    std::ifstream in(path);
    std::string header;
    if (!std::getline(in, header)) return "";
    std::stringstream ss(header);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        if (cell == "origin") return "origin";
    }
    return "";
}

SyntheticSpec spec_from(const std::string& family, std::size_t dim, std::size_t k, double nu,
                        const std::string& eta, double eta_value) {
    SyntheticSpec spec;
    if (family == "power_distance")
        spec.family = Family::power_distance;
    else if (family == "one_d")
        spec.family = Family::one_d_example;
    else if (family == "pathological")
        spec.family = Family::pathological;
    else
        throw std::invalid_argument("unknown family: " + family);
    spec.dim = dim;
    spec.singular_dim = k;
    spec.strength = nu;
    if (eta == "sine")
        spec.eta_kind = EtaKind::sine;
    else if (eta == "linear")
        spec.eta_kind = EtaKind::linear_1d;
    else if (eta == "constant")
        spec.eta_kind = EtaKind::constant;
    else
        throw std::invalid_argument("unknown eta kind: " + eta);
    spec.eta_value = eta_value;
    spec.validate();
    return spec;
}

int run_gen(const std::string& family, std::size_t dim, std::size_t k, double nu,
            const std::string& eta, double eta_value, const std::string& role_name,
            std::size_t n, std::uint64_t seed, const std::string& out) {
    const SyntheticSpec spec = spec_from(family, dim, k, nu, eta, eta_value);
    const Role role = role_name == "source" ? Role::source : Role::target;
    write_dataset_csv(sample_synthetic(spec, role, n, seed), out);
    std::cout << "wrote " << n << " " << role_name << " samples to " << out << "\n";
    return 0;
}

int run_split(const std::string& in, const std::string& label, const std::string& origin,
              std::vector<std::size_t> features, double threshold, double prob,
              std::uint64_t seed, bool no_normalize, const std::string& out_source,
              const std::string& out_target) {
    Dataset data = load_dataset(in, label, resolve_origin_column(in, origin));
    if (!no_normalize) data = normalize_features(data);
    SplitRule rule{std::move(features), threshold, prob};
    auto [source, target] = threshold_split(data, rule, seed);
    write_dataset_csv(source, out_source);
    write_dataset_csv(target, out_target);
    std::cout << "source " << source.size() << " rows -> " << out_source << "\n";
    std::cout << "target " << target.size() << " rows -> " << out_target << "\n";
    return 0;
}

int run_fit(const std::string& train_path, const std::string& test_path,
            const std::string& label, const std::string& origin, const std::string& method_name_,
            const std::string& tree, const std::string& width, std::uint64_t seed, bool normalize,
            const std::string& report_path, const std::string& trace_path, int dump_level,
            const std::string& dump_path) {
    Dataset train = load_dataset(train_path, label, resolve_origin_column(train_path, origin));
    Dataset test = load_dataset(test_path, label, resolve_origin_column(test_path, origin));
    if (normalize) {
        train = normalize_features(train);
        test = normalize_features(test);
    }

    BenchConfig cfg;
    cfg.tree_kind = tree == "cyclical" ? TreeKind::cyclical : TreeKind::regular;
    if (width == "theoretical")
        cfg.ici.width_constant.reset();
    else if (!width.empty())
        cfg.ici.width_constant = std::stod(width);

    const Method method = method_from_string(method_name_);
    const auto points = feature_matrix(test);
    const auto labels = label_vector(test);
    const FitResult fit = fit_and_predict(method, train, points, cfg, seed, &labels);
    const double risk = empirical_risk(fit.predictions, labels);

    std::printf("method %s test_risk %.6f", method_name_.c_str(), risk);
    if (fit.selected_level) std::printf(" selected_level %d", *fit.selected_level);
    std::printf("\n");

    if (!report_path.empty() &&
        (method == Method::cv || method == Method::fcv || method == Method::iwcv)) {
        const int depth = cfg.tree_kind == TreeKind::cyclical
                              ? deepest_admissible_level(train.source_count(),
                                                         train.target_count()) *
                                    static_cast<int>(train.dim)
                              : deepest_admissible_level(train.source_count(),
                                                         train.target_count());
        std::vector<int> levels;
        for (int i = 0; i <= depth; ++i) levels.push_back(i);
        RatioEstimate ratio;
        const RatioEstimate* ratio_ptr = nullptr;
        Dataset source, target_only;
        source.dim = target_only.dim = train.dim;
        for (const auto& s : train.samples)
            (s.origin == kOriginTarget ? target_only : source).samples.push_back(s);
        if (method == Method::iwcv) {
            ratio = estimate_density_ratio(source, target_only,
                                           auto_ratio_level(source, target_only));
            ratio_ptr = &ratio;
        }
        SelectionReport report;
        report.method = method_name_;
        const CvRisk kind = method == Method::cv    ? CvRisk::cv
                            : method == Method::fcv ? CvRisk::fcv
                                                    : CvRisk::iwcv;
        level_cv(train, make_folds(train, 2, derive_seed(seed, 0xcf, 0)), kind, ratio_ptr,
                 levels, cfg.tree_kind, &report);
        std::ofstream out(report_path);
        write_report_csv(report, out);
    }

    if (!trace_path.empty() && method == Method::ad) {
        const int depth = cfg.tree_kind == TreeKind::cyclical
                              ? deepest_admissible_level(train.source_count(),
                                                         train.target_count()) *
                                    static_cast<int>(train.dim)
                              : deepest_admissible_level(train.source_count(),
                                                         train.target_count());
        const TreeIndex index = build_index(train, depth, cfg.tree_kind);
        EnvelopeCache cache(index);
        std::vector<IciTrace> traces;
        traces.reserve(points.size());
        for (const auto& p : points) traces.push_back(ici_classify(index, p, cfg.ici, cache));
        std::ofstream out(trace_path);
        write_trace_csv(traces, out);
    }

    if (dump_level >= 0) {
        const TreeIndex index = build_index(train, dump_level, cfg.tree_kind);
        std::ofstream out(dump_path.empty() ? "level_dump.csv" : dump_path);
        dump_level_csv(index, dump_level, out);
    }
    return 0;
}

int run_bench(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& x_field) {
    BenchConfig cfg = load_bench_config(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got: " + kv);
        apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();

    const BenchResult result = run_benchmark(cfg);
    std::filesystem::create_directories(cfg.output_dir);
    const std::string csv_path = cfg.output_dir + "/results.csv";
    const std::string svg_path = cfg.output_dir + "/risk_vs_" + x_field + ".svg";
    emit_csv(result, csv_path);
    emit_plot(result, x_field, svg_path);
    std::cout << "wrote " << result.rows.size() << " rows to " << csv_path << " and "
              << svg_path << "\n";
    return 0;
}

int run_exponent(const std::string& estimator, const std::string& family, std::size_t dim,
                 std::size_t k, double nu, const std::string& source_csv,
                 const std::string& target_csv, const std::string& label, int coarse, int fine,
                 std::size_t n_mc, std::uint64_t seed, const std::string& out_path) {
    std::vector<double> radii;
    std::vector<double> values;

    if (!family.empty()) {
        const SyntheticSpec spec = spec_from(family, dim, k, nu, "constant", 0.5);
        const auto source = marginal_measure(spec, Role::source);
        const auto target = marginal_measure(spec, Role::target);
        for (int level = coarse; level <= fine; ++level) {
            const double r = std::ldexp(1.0, -level);
            radii.push_back(r);
            if (estimator == "phi")
                values.push_back(phi_integrated(*source, *target, r, n_mc, seed));
            else if (estimator == "grid")
                values.push_back(lambda_occupied_cells(*source, *target, level));
            else if (estimator == "dyadic")
                values.push_back(lambda_dyadic_ambient(*source, *target, level));
            else
                throw std::invalid_argument("estimator must be phi, grid or dyadic");
        }
    } else {
        if (source_csv.empty() || target_csv.empty())
            throw std::invalid_argument("need --family or both --source and --target");
        const Dataset source =
            load_dataset(source_csv, label, resolve_origin_column(source_csv, ""));
        const Dataset target =
            load_dataset(target_csv, label, resolve_origin_column(target_csv, ""));
        for (int level = coarse; level <= fine; ++level) {
            const double r = std::ldexp(1.0, -level);
            radii.push_back(r);
            if (estimator == "phi")
                values.push_back(phi_integrated(source, target, r, n_mc, seed));
            else if (estimator == "grid")
                values.push_back(lambda_occupied_cells(source, target, level));
            else
                throw std::invalid_argument("dyadic needs an analytic --family");
        }
    }

    const ExponentCurve curve = make_curve(std::move(radii), std::move(values));
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        write_curve_csv(curve, out);
    }
    std::printf("estimator %s slope %.4f residual %.4f\n", estimator.c_str(), curve.slope,
                curve.residual);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dyadic-tree classification under covariate shift"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Sample a synthetic dataset to CSV");
    std::string g_family = "power_distance", g_eta = "sine", g_role = "target", g_out = "data.csv";
    std::size_t g_dim = 5, g_k = 0, g_n = 1000;
    double g_nu = 0.0, g_eta_value = 0.5;
    std::uint64_t g_seed = 1;
    gen->add_option("--family", g_family, "power_distance | one_d | pathological");
    gen->add_option("--dim", g_dim);
    gen->add_option("--k", g_k, "singular-set dimension");
    gen->add_option("--nu", g_nu, "source density exponent");
    gen->add_option("--eta", g_eta, "sine | linear | constant");
    gen->add_option("--eta-value", g_eta_value);
    gen->add_option("--role", g_role, "source | target")->check(CLI::IsMember({"source", "target"}));
    gen->add_option("--n", g_n);
    gen->add_option("--seed", g_seed);
    gen->add_option("--out", g_out);

    // split
    auto* split = app.add_subcommand("split", "Normalize and threshold-split a CSV");
    std::string s_in, s_label = "label", s_origin, s_out_source = "source.csv",
                      s_out_target = "target.csv";
    std::vector<std::size_t> s_features;
    double s_threshold = 0.3, s_prob = 0.95;
    std::uint64_t s_seed = 1;
    bool s_no_normalize = false;
    split->add_option("--in", s_in)->required();
    split->add_option("--label", s_label);
    split->add_option("--origin", s_origin, "optional origin column to carry through");
    split->add_option("--features", s_features, "rule feature indices")->required();
    split->add_option("--threshold", s_threshold);
    split->add_option("--prob", s_prob);
    split->add_option("--seed", s_seed);
    split->add_flag("--no-normalize", s_no_normalize);
    split->add_option("--out-source", s_out_source);
    split->add_option("--out-target", s_out_target);

    // fit
    auto* fit = app.add_subcommand("fit", "Train one method and print the test risk");
    std::string f_train, f_test, f_label = "label", f_origin, f_method = "AD",
                      f_tree = "regular", f_width, f_report, f_trace, f_dump_out;
    std::uint64_t f_seed = 1;
    bool f_normalize = false;
    int f_dump_level = -1;
    fit->add_option("--train", f_train)->required();
    fit->add_option("--test", f_test)->required();
    fit->add_option("--label", f_label);
    fit->add_option("--origin", f_origin);
    fit->add_option("--method", f_method, "AD|CV|FCV|IWCV|SN|SNQ|ORACLE_LEVEL");
    fit->add_option("--tree", f_tree)->check(CLI::IsMember({"regular", "cyclical"}));
    fit->add_option("--width", f_width, "ICI width constant or 'theoretical'");
    fit->add_option("--seed", f_seed);
    fit->add_flag("--normalize", f_normalize);
    fit->add_option("--report", f_report, "model-selection report CSV");
    fit->add_option("--trace", f_trace, "ICI trace CSV (AD only)");
    fit->add_option("--dump-level", f_dump_level, "dump one index level as CSV");
    fit->add_option("--dump-out", f_dump_out);

    // bench
    auto* bench = app.add_subcommand("bench", "Run a benchmark config");
    std::string b_config, b_x = "nP";
    std::vector<std::string> b_overrides;
    bench->add_option("--config", b_config)->required();
    bench->add_option("--set", b_overrides, "override config entries, key=value");
    bench->add_option("--x", b_x, "plot x axis: nP or nQ")->check(CLI::IsMember({"nP", "nQ"}));

    // exponent
    auto* expo = app.add_subcommand("exponent", "Estimate a transfer-exponent curve");
    std::string e_estimator = "phi", e_family, e_source, e_target, e_label = "label",
                      e_out = "curve.csv";
    std::size_t e_dim = 2, e_k = 0, e_nmc = 200000;
    double e_nu = 0.0;
    int e_coarse = 3, e_fine = 8;
    std::uint64_t e_seed = 1;
    expo->add_option("--estimator", e_estimator, "phi | grid | dyadic");
    expo->add_option("--family", e_family, "analytic family (else use --source/--target)");
    expo->add_option("--dim", e_dim);
    expo->add_option("--k", e_k);
    expo->add_option("--nu", e_nu);
    expo->add_option("--source", e_source);
    expo->add_option("--target", e_target);
    expo->add_option("--label", e_label);
    expo->add_option("--coarse-level", e_coarse);
    expo->add_option("--fine-level", e_fine);
    expo->add_option("--nmc", e_nmc);
    expo->add_option("--seed", e_seed);
    expo->add_option("--out", e_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;  // usage errors exit 1, --help exits 0
    }

    try {
        if (gen->parsed())
            return run_gen(g_family, g_dim, g_k, g_nu, g_eta, g_eta_value, g_role, g_n, g_seed,
                           g_out);
        if (split->parsed())
            return run_split(s_in, s_label, s_origin, s_features, s_threshold, s_prob, s_seed,
                             s_no_normalize, s_out_source, s_out_target);
        if (fit->parsed())
            return run_fit(f_train, f_test, f_label, f_origin, f_method, f_tree, f_width, f_seed,
                           f_normalize, f_report, f_trace, f_dump_level, f_dump_out);
        if (bench->parsed()) return run_bench(b_config, b_overrides, b_x);
        if (expo->parsed())
            return run_exponent(e_estimator, e_family, e_dim, e_k, e_nu, e_source, e_target,
                                e_label, e_coarse, e_fine, e_nmc, e_seed, e_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
