#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shift/dataset.hpp"
#include "shift/ici.hpp"
#include "shift/synth.hpp"

namespace shift {

enum class Method { ad, cv, fcv, iwcv, sn, snq, oracle_level };

std::string method_name(Method m);
Method method_from_string(const std::string& name);

struct BenchConfig {
    // data source: either a synthetic spec or a CSV path + split rule
    std::optional<SyntheticSpec> synth;
    std::string csv_path;
    std::string label_column = "label";
    std::optional<SplitRule> split_rule;

    std::vector<Method> methods;
    std::vector<std::pair<std::size_t, std::size_t>> grid;  // (nP, nQ)
    int repetitions = 10;
    std::size_t test_size = 5000;
    std::uint64_t seed = 1;
    IciConfig ici;
    TreeKind tree_kind = TreeKind::regular;
    std::string output_dir = ".";

    void validate() const;
};

struct BenchRow {
    std::string method;
    std::size_t n_p = 0, n_q = 0;
    int rep = 0;
    double risk = 0;
    std::optional<double> excess;
    double wall_ms = 0;
    std::optional<int> selected_level;
};

struct BenchResult {
    std::vector<BenchRow> rows;
};

double empirical_risk(const std::vector<int>& predictions, const std::vector<int>& truth);

std::vector<std::vector<double>> feature_matrix(const Dataset& data);
std::vector<int> label_vector(const Dataset& data);

struct FitResult {
    std::vector<int> predictions;
    std::optional<int> selected_level;
};

// Fits one method on the training sample and predicts the test points.
// ORACLE_LEVEL additionally needs the test labels (a diagnostic upper
// envelope, not an honest method).
FitResult fit_and_predict(Method method, const Dataset& train,
                          const std::vector<std::vector<double>>& test_points,
                          const BenchConfig& cfg, std::uint64_t job_seed,
                          const std::vector<int>* test_labels = nullptr);

// Seeded target-only test reservation; returns (test, rest). The bench
// reserves before any subsampling so test rows never enter training draws.
std::pair<Dataset, Dataset> reserve_target_test(const Dataset& pool, std::size_t size,
                                                std::uint64_t seed);

BenchResult run_benchmark(const BenchConfig& cfg);

// method,nP,nQ,rep,risk,excess,wall_ms,selected_level
void emit_csv(const BenchResult& result, const std::string& path);

// One polyline per method of mean risk vs x with +-1 stderr bars.
void emit_plot(const BenchResult& result, const std::string& x_field, const std::string& path);

BenchConfig load_bench_config(const std::string& path);
void apply_config_entry(BenchConfig& cfg, const std::string& key, const std::string& value);

} // namespace shift
