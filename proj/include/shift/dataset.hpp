#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace shift {

// Origin tag: 0 is the target population (Q), j >= 1 is source population j (P_j).
inline constexpr int kOriginTarget = 0;

struct LabeledSample {
    std::vector<double> features;
    int label = 0;  // 0 or 1
    int origin = kOriginTarget;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::size_t dim = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    std::size_t target_count() const;          // n_Q
    std::size_t source_count() const;          // n_P, all source origins pooled
    std::map<int, std::size_t> origin_counts() const;
    void validate() const;                     // throws if rows disagree on dim or labels leave {0,1}
};

struct SplitRule {
    std::vector<std::size_t> feature_indices;  // distinct, < dim
    double threshold = 0.0;
    double accept_prob = 1.0;
};

// CSV ingestion. Header row required; label column two-valued; optional origin
// column with values "Q" (target) or "P"/"P1".."Pk" (sources). All remaining
// columns are numeric features, in file order.
Dataset load_dataset(const std::string& path, const std::string& label_column,
                     const std::string& origin_column = "");

// Writes the complementary format: f0..f{D-1},label,origin.
void write_dataset_csv(const Dataset& data, const std::string& path);

// Min-max scales every coordinate to [0,1] using pooled min/max; constant
// coordinates map to 0.
Dataset normalize_features(const Dataset& data);

// Threshold split protocol: a row is a target candidate iff every rule feature
// exceeds the threshold; candidates are kept in their side with probability
// accept_prob, everything else is discarded. Origins are retagged (target/source 1).
std::pair<Dataset, Dataset> threshold_split(const Dataset& data, const SplitRule& rule,
                                            std::uint64_t seed);

// Uniform without-replacement draw per origin (sources pooled), deterministic in seed.
Dataset subsample(const Dataset& data, std::size_t n_target, std::size_t n_source,
                  std::uint64_t seed);

} // namespace shift
