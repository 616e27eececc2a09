#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "shift/dataset.hpp"
#include "shift/measures.hpp"
#include "shift/tree.hpp"

namespace shift {

// Stratified fold assignment: every origin's samples are spread across folds
// within +-1 of proportionality.
struct FoldPlan {
    int fold_count = 2;
    std::vector<int> assignments;  // per sample index
};

FoldPlan make_folds(const Dataset& data, int fold_count, std::uint64_t seed);

enum class CvRisk { cv, fcv, iwcv };

// Histogram density-ratio estimate q/p on the cells of one level.
struct RatioEstimate {
    int level = 0;
    std::size_t dim = 0;
    TreeKind kind = TreeKind::regular;
    std::unordered_map<std::vector<std::uint32_t>, double, CoordHash> cell_weights;
    double default_weight = 1.0;  // cells unseen in both samples
    double pseudo_count = 0.5;

    double weight_at(std::span<const double> x) const;
};

RatioEstimate estimate_density_ratio(const Dataset& source, const Dataset& target, int level,
                                     double pseudo_count = 0.5);
// Exact cell-mass ratios Q(A)/P(A) for analytic marginals.
RatioEstimate analytic_density_ratio(const AnalyticMeasure& source, const AnalyticMeasure& target,
                                     int level);
// Deepest level at which the mean occupied-cell count stays >= 10.
int auto_ratio_level(const Dataset& source, const Dataset& target);

struct CandidateScore {
    double candidate = 0;  // tree level, or dampening constant c
    std::vector<double> fold_risk;
    double mean_risk = 0;
    bool selected = false;
};

struct SelectionReport {
    std::string method;
    std::vector<CandidateScore> rows;
};

void write_report_csv(const SelectionReport& report, std::ostream& out);

// Hold-out risk of the fixed-level classifier fitted in `index`, under the
// given scoring rule. Exposed separately so the scoring path can be tested in
// isolation from fitting.
double holdout_risk(const TreeIndex& index, const Dataset& holdout, CvRisk kind,
                    const RatioEstimate* ratio, int level);

// Cross-validated level selection; ties go to the shallowest level.
int level_cv(const Dataset& data, const FoldPlan& folds, CvRisk kind, const RatioEstimate* ratio,
             const std::vector<int>& levels, TreeKind tree_kind,
             SelectionReport* report = nullptr);

// (1/n) [ sum_source w(X_i) 1{err} + sum_target 1{err} ]
double iwcv_risk(const Dataset& holdout, const RatioEstimate& ratio,
                 const std::vector<int>& predictions);

// ---- penalized subtree optimization (SN / SN-Q) ----

struct PenNode {
    double mass = 0;        // p_n(A) under the designated sample
    double leaf_risk = 0;   // empirical-risk contribution when collapsed to a leaf
    double codelength = 0;  // [[A]]
    int label = 0;          // plug-in label (from the pooled regression estimate)
    int depth = 0;
    std::vector<int> children;
    std::vector<std::uint32_t> coords;  // cell coords when built from an index
};

struct PenalizedTree {
    std::vector<PenNode> nodes;
    int root = -1;
    std::size_t n = 0;   // risk/penalty denominator
    double delta = 0.5;  // confidence parameter in the penalty
    TreeKind kind = TreeKind::cyclical;
    std::size_t dim = 0;
};

double leaf_penalty_term(double mass, double codelength, std::size_t n, double delta);
// Per-node penalty of the fully kept subtree rooted there (additive over leaves).
std::vector<double> sn_penalty(const PenalizedTree& tree);
double kraft_sum(const PenalizedTree& tree, const std::vector<int>& leaves);
// [[A]] = ceil(depth * (1 + log2 D)), a prefix code for cyclical subtrees.
double codelength_for_depth(int depth, std::size_t dim);

enum class SnVariant { sn, snq };

PenalizedTree build_penalized_tree(const TreeIndex& index, const Dataset& data, SnVariant variant);

struct PruneSelection {
    std::vector<char> collapsed;  // per node: subtree replaced by a leaf
    std::vector<int> leaves;      // leaf set of the selected subtree
    double objective = 0;         // min of empirical risk + c * penalty
};

// Bottom-up DP: each node keeps min(collapse-to-leaf, keep-children).
PruneSelection optimize_penalized(const PenalizedTree& tree, double c);

class PrunedClassifier {
public:
    PrunedClassifier(PenalizedTree tree, PruneSelection selection)
        : tree_(std::move(tree)), selection_(std::move(selection)) {}
    int predict(std::span<const double> x) const;
    const PenalizedTree& tree() const { return tree_; }
    const PruneSelection& selection() const { return selection_; }

private:
    PenalizedTree tree_;
    PruneSelection selection_;
};

PrunedClassifier sn_prune(const TreeIndex& index, const Dataset& data, double c,
                          SnVariant variant);

// Dampening constant tuned by CV over target hold-outs on the 2^-6..2^4 grid.
double tune_sn_constant(const Dataset& train, SnVariant variant, int max_level,
                        std::uint64_t seed, SelectionReport* report = nullptr);

} // namespace shift
