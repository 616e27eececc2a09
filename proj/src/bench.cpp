#include "shift/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "shift/model_select.hpp"
#include "shift/rng.hpp"

namespace shift {

std::string method_name(Method m) {
    switch (m) {
        case Method::ad: return "AD";
        case Method::cv: return "CV";
        case Method::fcv: return "FCV";
        case Method::iwcv: return "IWCV";
        case Method::sn: return "SN";
        case Method::snq: return "SNQ";
        case Method::oracle_level: return "ORACLE_LEVEL";
    }
    return "?";
}

Method method_from_string(const std::string& name) {
    if (name == "AD") return Method::ad;
    if (name == "CV") return Method::cv;
    if (name == "FCV") return Method::fcv;
    if (name == "IWCV") return Method::iwcv;
    if (name == "SN") return Method::sn;
    if (name == "SNQ") return Method::snq;
    if (name == "ORACLE_LEVEL") return Method::oracle_level;
    throw std::invalid_argument("unknown method: " + name);
}

void BenchConfig::validate() const {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (grid.empty()) throw std::invalid_argument("empty sample-size grid");
    if (methods.empty()) throw std::invalid_argument("no methods selected");
    if (!synth && csv_path.empty()) throw std::invalid_argument("no data source configured");
    if (synth && !csv_path.empty())
        throw std::invalid_argument("configure either a synthetic spec or a CSV, not both");
    if (!csv_path.empty() && !split_rule)
        throw std::invalid_argument("CSV sources need a split rule");
    if (synth) synth->validate();
}

double empirical_risk(const std::vector<int>& predictions, const std::vector<int>& truth) {
    if (predictions.size() != truth.size()) throw std::invalid_argument("length mismatch");
    if (predictions.empty()) throw std::invalid_argument("empty input");
    std::size_t errors = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) errors += predictions[i] != truth[i];
    return static_cast<double>(errors) / static_cast<double>(predictions.size());
}

std::vector<std::vector<double>> feature_matrix(const Dataset& data) {
    std::vector<std::vector<double>> points;
    points.reserve(data.size());
    for (const auto& s : data.samples) points.push_back(s.features);
    return points;
}

std::vector<int> label_vector(const Dataset& data) {
    std::vector<int> labels;
    labels.reserve(data.size());
    for (const auto& s : data.samples) labels.push_back(s.label);
    return labels;
}

namespace {

int index_depth(const Dataset& train, TreeKind kind) {
    const int deepest = deepest_admissible_level(train.source_count(), train.target_count());
    return kind == TreeKind::cyclical ? deepest * static_cast<int>(train.dim) : deepest;
}

std::vector<int> candidate_levels(int max_level) {
    std::vector<int> levels(static_cast<std::size_t>(max_level) + 1);
    for (int i = 0; i <= max_level; ++i) levels[i] = i;
    return levels;
}

Dataset split_by_origin(const Dataset& data, bool target) {
    Dataset out;
    out.dim = data.dim;
    for (const auto& s : data.samples)
        if ((s.origin == kOriginTarget) == target) out.samples.push_back(s);
    return out;
}

} // namespace

FitResult fit_and_predict(Method method, const Dataset& train,
                          const std::vector<std::vector<double>>& test_points,
                          const BenchConfig& cfg, std::uint64_t job_seed,
                          const std::vector<int>* test_labels) {
    FitResult result;
    const int depth = index_depth(train, cfg.tree_kind);

    switch (method) {
        case Method::ad: {
            const TreeIndex index = build_index(train, depth, cfg.tree_kind);
            result.predictions = ici_predict_batch(index, test_points, cfg.ici);
            break;
        }
        case Method::cv:
        case Method::fcv:
        case Method::iwcv: {
            const FoldPlan folds =
                make_folds(train, 2, derive_seed(job_seed, 0xcf, static_cast<int>(method)));
            RatioEstimate ratio;
            const RatioEstimate* ratio_ptr = nullptr;
            if (method == Method::iwcv) {
                const Dataset source = split_by_origin(train, false);
                const Dataset target = split_by_origin(train, true);
                ratio = estimate_density_ratio(source, target,
                                               auto_ratio_level(source, target));
                ratio_ptr = &ratio;
            }
            const CvRisk kind = method == Method::cv    ? CvRisk::cv
                                : method == Method::fcv ? CvRisk::fcv
                                                        : CvRisk::iwcv;
            const int level =
                level_cv(train, folds, kind, ratio_ptr, candidate_levels(depth), cfg.tree_kind);
            const TreeIndex index = build_index(train, depth, cfg.tree_kind);
            result.predictions = classify_batch(index, test_points, level);
            result.selected_level = level;
            break;
        }
        case Method::sn:
        case Method::snq: {
            const SnVariant variant = method == Method::sn ? SnVariant::sn : SnVariant::snq;
            const int sn_depth = index_depth(train, TreeKind::cyclical);
            const double c = tune_sn_constant(train, variant, sn_depth,
                                              derive_seed(job_seed, 0x50, static_cast<int>(method)));
            const TreeIndex index = build_index(train, sn_depth, TreeKind::cyclical);
            const PrunedClassifier clf = sn_prune(index, train, c, variant);
            result.predictions.reserve(test_points.size());
            for (const auto& p : test_points) result.predictions.push_back(clf.predict(p));
            break;
        }
        case Method::oracle_level: {
            if (test_labels == nullptr)
                throw std::invalid_argument("ORACLE_LEVEL needs test labels");
            const TreeIndex index = build_index(train, depth, cfg.tree_kind);
            double best_risk = 2.0;
            for (int level : candidate_levels(depth)) {
                std::vector<int> preds = classify_batch(index, test_points, level);
                const double risk = empirical_risk(preds, *test_labels);
                if (risk < best_risk) {
                    best_risk = risk;
                    result.predictions = std::move(preds);
                    result.selected_level = level;
                }
            }
            break;
        }
    }
    return result;
}

namespace {

struct TestSet {
    std::vector<std::vector<double>> points;
    std::vector<int> labels;
    std::vector<double> margin;  // |eta - 1/2| when eta is known
    std::vector<int> bayes;
};

TestSet synthetic_test_set(const SyntheticSpec& spec, std::size_t size, std::uint64_t seed) {
    TestSet test;
    const Dataset draw = sample_synthetic(spec, Role::target, size, seed);
    test.points = feature_matrix(draw);
    test.labels = label_vector(draw);
    for (const auto& p : test.points) {
        const double eta = eta_true(spec, p);
        test.margin.push_back(std::abs(eta - 0.5));
        test.bayes.push_back(eta >= 0.5 ? 1 : 0);
    }
    return test;
}

} // namespace

std::pair<Dataset, Dataset> reserve_target_test(const Dataset& pool, std::size_t size,
                                                std::uint64_t seed) {
    std::vector<std::size_t> target_idx;
    for (std::size_t i = 0; i < pool.samples.size(); ++i)
        if (pool.samples[i].origin == kOriginTarget) target_idx.push_back(i);
    if (target_idx.size() < size)
        throw std::runtime_error("target pool smaller than the requested test size");
    Rng rng(derive_seed(seed, 0x7e57));
    for (std::size_t i = 0; i < size; ++i)
        std::swap(target_idx[i], target_idx[i + rng.below(target_idx.size() - i)]);
    std::vector<char> in_test(pool.samples.size(), 0);
    for (std::size_t i = 0; i < size; ++i) in_test[target_idx[i]] = 1;

    Dataset test, rest;
    test.dim = rest.dim = pool.dim;
    for (std::size_t i = 0; i < pool.samples.size(); ++i)
        (in_test[i] ? test : rest).samples.push_back(pool.samples[i]);
    return {std::move(test), std::move(rest)};
}

BenchResult run_benchmark(const BenchConfig& cfg) {
    cfg.validate();
    BenchResult result;

    // CSV mode: load, normalize and split once; reserve the test split before
    // any subsampling.
    Dataset csv_pool;
    TestSet csv_test;
    if (!cfg.csv_path.empty()) {
        Dataset raw = load_dataset(cfg.csv_path, cfg.label_column);
        raw = normalize_features(raw);
        auto [source, target] = threshold_split(raw, *cfg.split_rule,
                                                derive_seed(cfg.seed, 0xdada));
        Dataset pool;
        pool.dim = raw.dim;
        pool.samples = std::move(target.samples);
        for (auto& s : source.samples) pool.samples.push_back(std::move(s));
        auto [test, rest] = reserve_target_test(pool, cfg.test_size,
                                                derive_seed(cfg.seed, 0x7e57));
        csv_pool = std::move(rest);
        csv_test.points = feature_matrix(test);
        csv_test.labels = label_vector(test);
    }

    for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
        const auto [n_p, n_q] = cfg.grid[g];
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
            const std::uint64_t job_seed = derive_seed(cfg.seed, g, static_cast<std::uint64_t>(rep));

            Dataset train;
            const TestSet* test = nullptr;
            TestSet synth_test;
            if (cfg.synth) {
                train = sample_synthetic(*cfg.synth, Role::source, n_p,
                                         derive_seed(job_seed, 0x10));
                const Dataset target = sample_synthetic(*cfg.synth, Role::target, n_q,
                                                        derive_seed(job_seed, 0x11));
                train.samples.insert(train.samples.end(), target.samples.begin(),
                                     target.samples.end());
                train.dim = cfg.synth->dim;
                synth_test = synthetic_test_set(*cfg.synth, cfg.test_size,
                                                derive_seed(job_seed, 0x12));
                test = &synth_test;
            } else {
                train = subsample(csv_pool, n_q, n_p, job_seed);
                test = &csv_test;
            }

            for (Method method : cfg.methods) {
                const auto t0 = std::chrono::steady_clock::now();
                const FitResult fit =
                    fit_and_predict(method, train, test->points, cfg, job_seed, &test->labels);
                const auto t1 = std::chrono::steady_clock::now();

                BenchRow row;
                row.method = method_name(method);
                row.n_p = n_p;
                row.n_q = n_q;
                row.rep = rep;
                row.risk = empirical_risk(fit.predictions, test->labels);
                row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
                row.selected_level = fit.selected_level;
                if (!test->margin.empty()) {
                    double excess = 0;
                    for (std::size_t i = 0; i < fit.predictions.size(); ++i)
                        if (fit.predictions[i] != test->bayes[i]) excess += 2.0 * test->margin[i];
                    row.excess = excess / static_cast<double>(fit.predictions.size());
                }
                result.rows.push_back(std::move(row));
            }
        }
    }
    return result;
}

void emit_csv(const BenchResult& result, const std::string& path) {
    if (result.rows.empty()) throw std::invalid_argument("empty benchmark result");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "method,nP,nQ,rep,risk,excess,wall_ms,selected_level\n";
    char buf[48];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (const auto& row : result.rows) {
        out << row.method << "," << row.n_p << "," << row.n_q << "," << row.rep << ",";
        put(row.risk);
        out << ",";
        if (row.excess) put(*row.excess);
        out << ",";
        put(row.wall_ms);
        out << ",";
        if (row.selected_level) out << *row.selected_level;
        out << "\n";
    }
}

namespace {

struct SeriesPoint {
    double x, mean, stderr_;
};

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2"};

} // namespace

void emit_plot(const BenchResult& result, const std::string& x_field, const std::string& path) {
    if (result.rows.empty()) throw std::invalid_argument("empty benchmark result");
    if (x_field != "nP" && x_field != "nQ") throw std::invalid_argument("x must be nP or nQ");

    // method -> x -> risks
    std::map<std::string, std::map<double, std::vector<double>>> grouped;
    for (const auto& row : result.rows) {
        const double x = static_cast<double>(x_field == "nP" ? row.n_p : row.n_q);
        grouped[row.method][x].push_back(row.risk);
    }

    std::map<std::string, std::vector<SeriesPoint>> series;
    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    for (const auto& [method, by_x] : grouped) {
        for (const auto& [x, risks] : by_x) {
            double mean = 0;
            for (double r : risks) mean += r;
            mean /= static_cast<double>(risks.size());
            double var = 0;
            for (double r : risks) var += (r - mean) * (r - mean);
            const double se = risks.size() > 1
                                  ? std::sqrt(var / static_cast<double>(risks.size() - 1)) /
                                        std::sqrt(static_cast<double>(risks.size()))
                                  : 0.0;
            series[method].push_back({x, mean, se});
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, mean - se);
            y_max = std::max(y_max, mean + se);
        }
    }
    if (x_max <= x_min) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if (y_max <= y_min) {
        y_min -= 0.05;
        y_max += 0.05;
    }
    const double pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    const double width = 640, height = 480, ml = 70, mr = 160, mt = 20, mb = 50;
    auto sx = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr); };
    auto sy = [&](double y) {
        return height - mb - (y - y_min) / (y_max - y_min) * (height - mt - mb);
    };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    char buf[256];
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
           "viewBox=\"0 0 640 480\">\n";
    // axes
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  ml, height - mb, width - mr, height - mb);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  ml, mt, ml, height - mb);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"14\" text-anchor=\"middle\">%s</text>\n",
                  (ml + width - mr) / 2, height - 12, x_field.c_str());
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"16\" y=\"%.1f\" font-size=\"14\" text-anchor=\"middle\" "
                  "transform=\"rotate(-90 16 %.1f)\">target risk</text>\n",
                  (mt + height - mb) / 2, (mt + height - mb) / 2);
    out << buf;
    // axis extremes
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\">%g</text>\n", ml - 4,
                  height - mb + 16, x_min);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%g</text>\n",
                  width - mr, height - mb + 16, x_max);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.3g</text>\n",
                  ml - 6, height - mb, y_min + pad);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.3g</text>\n",
                  ml - 6, mt + 12, y_max - pad);
    out << buf;

    int color = 0;
    double legend_y = mt + 16;
    for (const auto& [method, pts] : series) {
        const char* stroke = kPalette[color % 7];
        ++color;
        std::string points;
        for (const auto& p : pts) {
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(p.x), sy(p.mean));
            points += buf;
        }
        if (!points.empty()) points.pop_back();
        out << "<polyline class=\"series\" fill=\"none\" stroke=\"" << stroke
            << "\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
        for (const auto& p : pts) {  // +-1 stderr bars
            if (p.stderr_ <= 0) continue;
            std::snprintf(buf, sizeof(buf),
                          "<line class=\"errbar\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" "
                          "y2=\"%.2f\" stroke=\"%s\"/>\n",
                          sx(p.x), sy(p.mean - p.stderr_), sx(p.x), sy(p.mean + p.stderr_),
                          stroke);
            out << buf;
        }
        // legend entry
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" "
                      "stroke-width=\"1.5\"/>\n",
                      width - mr + 10, legend_y - 4, width - mr + 34, legend_y - 4, stroke);
        out << buf;
        std::snprintf(buf, sizeof(buf),
                      "<text class=\"legend\" x=\"%.1f\" y=\"%.1f\" font-size=\"12\">%s</text>\n",
                      width - mr + 40, legend_y, method.c_str());
        out << buf;
        legend_y += 18;
    }
    out << "</svg>\n";
}

namespace {

std::string trimmed(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trimmed(item);
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

SyntheticSpec& ensure_synth(BenchConfig& cfg) {
    if (!cfg.synth) cfg.synth = SyntheticSpec{};
    return *cfg.synth;
}

SplitRule& ensure_rule(BenchConfig& cfg) {
    if (!cfg.split_rule) cfg.split_rule = SplitRule{};
    return *cfg.split_rule;
}

} // namespace

void apply_config_entry(BenchConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "family") {
        auto& spec = ensure_synth(cfg);
        if (value == "power_distance")
            spec.family = Family::power_distance;
        else if (value == "one_d")
            spec.family = Family::one_d_example;
        else if (value == "pathological")
            spec.family = Family::pathological;
        else
            throw std::invalid_argument("unknown family: " + value);
    } else if (key == "dim") {
        ensure_synth(cfg).dim = std::stoul(value);
    } else if (key == "k") {
        ensure_synth(cfg).singular_dim = std::stoul(value);
    } else if (key == "nu") {
        ensure_synth(cfg).strength = std::stod(value);
    } else if (key == "eta") {
        auto& spec = ensure_synth(cfg);
        if (value == "sine")
            spec.eta_kind = EtaKind::sine;
        else if (value == "linear")
            spec.eta_kind = EtaKind::linear_1d;
        else if (value == "constant")
            spec.eta_kind = EtaKind::constant;
        else
            throw std::invalid_argument("unknown eta kind: " + value);
    } else if (key == "eta_value") {
        ensure_synth(cfg).eta_value = std::stod(value);
    } else if (key == "csv") {
        cfg.csv_path = value;
    } else if (key == "label_column") {
        cfg.label_column = value;
    } else if (key == "split_features") {
        auto& rule = ensure_rule(cfg);
        rule.feature_indices.clear();
        for (const auto& part : split_list(value, ','))
            rule.feature_indices.push_back(std::stoul(part));
    } else if (key == "split_threshold") {
        ensure_rule(cfg).threshold = std::stod(value);
    } else if (key == "split_prob") {
        ensure_rule(cfg).accept_prob = std::stod(value);
    } else if (key == "methods") {
        cfg.methods.clear();
        for (const auto& part : split_list(value, ','))
            cfg.methods.push_back(method_from_string(part));
    } else if (key == "grid") {
        cfg.grid.clear();
        for (const auto& part : split_list(value, ',')) {
            const auto sep = part.find(':');
            if (sep == std::string::npos)
                throw std::invalid_argument("grid entries are nP:nQ pairs");
            cfg.grid.emplace_back(std::stoul(part.substr(0, sep)),
                                  std::stoul(part.substr(sep + 1)));
        }
    } else if (key == "repetitions") {
        cfg.repetitions = std::stoi(value);
    } else if (key == "test_size") {
        cfg.test_size = std::stoul(value);
    } else if (key == "seed") {
        cfg.seed = std::stoull(value);
    } else if (key == "tree") {
        if (value == "regular")
            cfg.tree_kind = TreeKind::regular;
        else if (value == "cyclical")
            cfg.tree_kind = TreeKind::cyclical;
        else
            throw std::invalid_argument("tree must be regular or cyclical");
    } else if (key == "ici_width") {
        if (value == "theoretical")
            cfg.ici.width_constant.reset();
        else
            cfg.ici.width_constant = std::stod(value);
    } else if (key == "ici_start") {
        cfg.ici.start_level = std::stoi(value);
    } else if (key == "ici_cap") {
        cfg.ici.cap_level = std::stoi(value);
    } else if (key == "output_dir") {
        cfg.output_dir = value;
    } else {
        throw std::invalid_argument("unknown config key: " + key);
    }
}

BenchConfig load_bench_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    BenchConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trimmed(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     " is not key = value");
        apply_config_entry(cfg, trimmed(t.substr(0, eq)), trimmed(t.substr(eq + 1)));
    }
    return cfg;
}

} // namespace shift
