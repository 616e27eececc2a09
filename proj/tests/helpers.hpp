#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "shift/dataset.hpp"
#include "shift/model_select.hpp"
#include "shift/rng.hpp"
#include "shift/tree.hpp"

namespace shift::testing {

inline std::string write_temp_csv(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

inline Dataset make_dataset(const std::vector<std::vector<double>>& points,
                            const std::vector<int>& labels, const std::vector<int>& origins = {}) {
    Dataset data;
    data.dim = points.empty() ? 0 : points[0].size();
    for (std::size_t i = 0; i < points.size(); ++i) {
        LabeledSample s;
        s.features = points[i];
        s.label = labels[i];
        s.origin = origins.empty() ? kOriginTarget : origins[i];
        data.samples.push_back(std::move(s));
    }
    return data;
}

inline Dataset random_dataset(std::size_t n, std::size_t dim, std::uint64_t seed,
                              double source_fraction = 0.0) {
    Rng rng(seed);
    Dataset data;
    data.dim = dim;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledSample s;
        s.features.resize(dim);
        for (auto& v : s.features) v = rng.u01();
        const double eta = std::clamp(0.2 + 1.2 * s.features[0], 0.0, 1.0);
        s.label = rng.bernoulli(eta) ? 1 : 0;
        s.origin = rng.u01() < source_fraction ? 1 : kOriginTarget;
        data.samples.push_back(std::move(s));
    }
    return data;
}

// Independent envelope-membership oracle: a sample belongs to the envelope of
// `cell` iff its per-axis clamped cell index differs from the cell's by at
// most one. Recomputes the grid arithmetic from scratch.
inline CellStats brute_force_envelope(const Dataset& data, const CellId& cell, TreeKind kind,
                                      std::size_t dim) {
    CellStats total;
    for (const auto& s : data.samples) {
        bool inside = true;
        for (std::size_t j = 0; j < dim && inside; ++j) {
            int splits = 0;
            if (kind == TreeKind::regular) {
                splits = cell.level;
            } else {
                splits = cell.level / static_cast<int>(dim) +
                         (static_cast<int>(j) < cell.level % static_cast<int>(dim) ? 1 : 0);
            }
            const double cells = std::ldexp(1.0, splits);
            long idx = static_cast<long>(std::floor(s.features[j] * cells));
            if (idx > static_cast<long>(cells) - 1) idx = static_cast<long>(cells) - 1;
            if (idx < 0) idx = 0;
            inside = std::labs(idx - static_cast<long>(cell.coords[j])) <= 1;
        }
        if (inside) {
            total.count += 1;
            total.label_sum += static_cast<std::uint32_t>(s.label);
        }
    }
    return total;
}

// Exhaustive minimum of empirical risk + c * penalty over all pruned subtrees.
// Sums are accumulated in the same child order as the DP so the comparison is
// exact at double precision.
inline double enumerate_prune_objective(const PenalizedTree& tree, int node, double c) {
    const PenNode& nd = tree.nodes[node];
    const double leaf_cost =
        nd.leaf_risk + c * leaf_penalty_term(nd.mass, nd.codelength, tree.n, tree.delta);
    if (nd.children.empty()) return leaf_cost;
    double keep = 0;
    for (int child : nd.children) keep += enumerate_prune_objective(tree, child, c);
    return std::min(leaf_cost, keep);
}

// Random binary tree with at most `max_leaves` leaves and synthetic node data.
inline PenalizedTree random_penalized_tree(std::uint64_t seed, int max_leaves) {
    Rng rng(seed);
    PenalizedTree tree;
    tree.n = 50 + rng.below(1000);
    tree.delta = 0.25;
    tree.kind = TreeKind::cyclical;
    tree.dim = 2;

    struct Todo {
        int node;
        int depth;
        double mass;
    };
    tree.nodes.push_back({});
    tree.root = 0;
    int leaves = 1;
    std::vector<Todo> todo{{0, 0, 1.0}};
    while (!todo.empty()) {
        Todo t = todo.back();
        todo.pop_back();
        PenNode& nd = tree.nodes[t.node];
        nd.depth = t.depth;
        nd.mass = t.mass;
        nd.codelength = t.depth + 1;
        nd.leaf_risk = t.mass * rng.u01() * 0.5;
        nd.label = rng.bernoulli(0.5);
        const bool split = leaves + 1 <= max_leaves && t.depth < 8 && rng.u01() < 0.6;
        if (!split) continue;
        ++leaves;
        const double left_mass = t.mass * rng.u01();
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        const int right = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[t.node].children = {left, right};
        todo.push_back({left, t.depth + 1, left_mass});
        todo.push_back({right, t.depth + 1, t.mass - left_mass});
    }
    return tree;
}

} // namespace shift::testing
