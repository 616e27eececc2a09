#include "shift/model_select.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "shift/rng.hpp"

namespace shift {

FoldPlan make_folds(const Dataset& data, int fold_count, std::uint64_t seed) {
    if (fold_count < 2) throw std::invalid_argument("need at least 2 folds");
    std::map<int, std::vector<std::size_t>> by_origin;
    for (std::size_t i = 0; i < data.samples.size(); ++i)
        by_origin[data.samples[i].origin].push_back(i);

    FoldPlan plan;
    plan.fold_count = fold_count;
    plan.assignments.assign(data.samples.size(), 0);
    for (auto& [origin, idx] : by_origin) {
        if (idx.size() < static_cast<std::size_t>(fold_count))
            throw std::runtime_error("origin " + std::to_string(origin) +
                                     " has fewer samples than folds");
        Rng rng(derive_seed(seed, 0xf01d5, static_cast<std::uint64_t>(origin)));
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.below(i)]);
        for (std::size_t i = 0; i < idx.size(); ++i)
            plan.assignments[idx[i]] = static_cast<int>(i % fold_count);
    }
    return plan;
}

double RatioEstimate::weight_at(std::span<const double> x) const {
    const CellId cell = cell_of(x, level, kind, dim);
    auto it = cell_weights.find(cell.coords);
    return it == cell_weights.end() ? default_weight : it->second;
}

RatioEstimate estimate_density_ratio(const Dataset& source, const Dataset& target, int level,
                                     double pseudo_count) {
    if (source.empty() || target.empty())
        throw std::runtime_error("density ratio needs non-empty source and target");
    if (source.dim != target.dim) throw std::runtime_error("dimension mismatch");

    struct Counts {
        double source = 0, target = 0;
    };
    std::unordered_map<std::vector<std::uint32_t>, Counts, CoordHash> cells;
    for (const auto& s : source.samples)
        cells[cell_of(s.features, level, TreeKind::regular, source.dim).coords].source += 1;
    for (const auto& s : target.samples)
        cells[cell_of(s.features, level, TreeKind::regular, target.dim).coords].target += 1;

    const double n_cells = static_cast<double>(cells.size());
    const double n_p = static_cast<double>(source.size());
    const double n_q = static_cast<double>(target.size());
    const double zq = n_q + pseudo_count * n_cells;
    const double zp = n_p + pseudo_count * n_cells;

    RatioEstimate est;
    est.level = level;
    est.dim = source.dim;
    est.pseudo_count = pseudo_count;
    for (const auto& [coords, c] : cells) {
        const double w = ((c.target + pseudo_count) / zq) / ((c.source + pseudo_count) / zp);
        if (!std::isfinite(w) || w <= 0)
            throw std::runtime_error(
                "density ratio not finite; use a positive pseudo-count for "
                "source-empty cells");
        est.cell_weights[coords] = w;
    }
    est.default_weight = pseudo_count > 0 ? zp / zq : 1.0;
    return est;
}

RatioEstimate analytic_density_ratio(const AnalyticMeasure& source, const AnalyticMeasure& target,
                                     int level) {
    if (source.dim() != target.dim()) throw std::runtime_error("dimension mismatch");
    const double side = std::ldexp(1.0, -level);
    RatioEstimate est;
    est.level = level;
    est.dim = source.dim();
    est.pseudo_count = 0;
    est.default_weight = 0;  // cells with no target mass contribute nothing
    for (const auto& coords : target.positive_cells(level)) {
        Rect cell;
        cell.lo.resize(est.dim);
        cell.hi.resize(est.dim);
        for (std::size_t j = 0; j < est.dim; ++j) {
            cell.lo[j] = coords[j] * side;
            cell.hi[j] = (coords[j] + 1) * side;
        }
        const double q = target.rect_mass(cell);
        if (q <= 0) continue;
        const double p = source.rect_mass(cell);
        if (p <= 0)
            throw std::runtime_error("target mass on a source-null cell; ratio undefined");
        est.cell_weights[coords] = q / p;
    }
    return est;
}

int auto_ratio_level(const Dataset& source, const Dataset& target) {
    const std::size_t n = source.size() + target.size();
    const int cap = deepest_admissible_level(source.size(), target.size());
    int best = 0;
    for (int level = 0; level <= cap; ++level) {
        std::unordered_map<std::vector<std::uint32_t>, int, CoordHash> cells;
        for (const auto& s : source.samples)
            cells[cell_of(s.features, level, TreeKind::regular, source.dim).coords] = 1;
        for (const auto& s : target.samples)
            cells[cell_of(s.features, level, TreeKind::regular, target.dim).coords] = 1;
        if (static_cast<double>(n) / static_cast<double>(cells.size()) >= 10.0)
            best = level;
        else
            break;
    }
    return best;
}

void write_report_csv(const SelectionReport& report, std::ostream& out) {
    std::size_t folds = 0;
    for (const auto& row : report.rows) folds = std::max(folds, row.fold_risk.size());
    out << "method,candidate";
    for (std::size_t f = 0; f < folds; ++f) out << ",fold" << f << "_risk";
    out << ",mean_risk,selected\n";
    char buf[48];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%.12g", row.candidate);
        out << report.method << "," << buf;
        for (std::size_t f = 0; f < folds; ++f) {
            out << ",";
            if (f < row.fold_risk.size()) {
                std::snprintf(buf, sizeof(buf), "%.12g", row.fold_risk[f]);
                out << buf;
            }
        }
        std::snprintf(buf, sizeof(buf), "%.12g", row.mean_risk);
        out << "," << buf << "," << (row.selected ? 1 : 0) << "\n";
    }
}

double iwcv_risk(const Dataset& holdout, const RatioEstimate& ratio,
                 const std::vector<int>& predictions) {
    if (predictions.size() != holdout.size())
        throw std::invalid_argument("predictions not aligned with hold-out");
    if (holdout.empty()) throw std::invalid_argument("empty hold-out");
    double sum = 0.0;
    for (std::size_t i = 0; i < holdout.size(); ++i) {
        const auto& s = holdout.samples[i];
        if (predictions[i] == s.label) continue;
        sum += s.origin == kOriginTarget ? 1.0 : ratio.weight_at(s.features);
    }
    return sum / static_cast<double>(holdout.size());
}

double holdout_risk(const TreeIndex& index, const Dataset& holdout, CvRisk kind,
                    const RatioEstimate* ratio, int level) {
    EnvelopeCache cache(index);
    auto predict = [&](const LabeledSample& s) {
        const CellStats& st = cache.get(cell_of(s.features, level, index));
        const double eta = st.count == 0 ? 0.0
                                         : static_cast<double>(st.label_sum) /
                                               static_cast<double>(st.count);
        return eta >= 0.5 ? 1 : 0;
    };

    if (kind == CvRisk::cv) {
        std::size_t n = 0, errors = 0;
        for (const auto& s : holdout.samples) {
            if (s.origin != kOriginTarget) continue;
            ++n;
            errors += predict(s) != s.label;
        }
        if (n == 0) throw std::runtime_error("empty target hold-out under CV");
        return static_cast<double>(errors) / static_cast<double>(n);
    }
    if (kind == CvRisk::fcv) {
        if (holdout.empty()) throw std::runtime_error("empty hold-out");
        std::size_t errors = 0;
        for (const auto& s : holdout.samples) errors += predict(s) != s.label;
        return static_cast<double>(errors) / static_cast<double>(holdout.size());
    }
    if (ratio == nullptr) throw std::invalid_argument("IWCV requires a density-ratio estimate");
    std::vector<int> predictions;
    predictions.reserve(holdout.size());
    for (const auto& s : holdout.samples) predictions.push_back(predict(s));
    return iwcv_risk(holdout, *ratio, predictions);
}

int level_cv(const Dataset& data, const FoldPlan& folds, CvRisk kind, const RatioEstimate* ratio,
             const std::vector<int>& levels, TreeKind tree_kind, SelectionReport* report) {
    if (levels.empty()) throw std::invalid_argument("no candidate levels");
    if (kind == CvRisk::iwcv && ratio == nullptr)
        throw std::invalid_argument("IWCV requires a density-ratio estimate");
    const int max_level = *std::max_element(levels.begin(), levels.end());

    std::vector<std::vector<double>> risk(levels.size());
    for (int f = 0; f < folds.fold_count; ++f) {
        Dataset train, hold;
        train.dim = hold.dim = data.dim;
        for (std::size_t i = 0; i < data.samples.size(); ++i) {
            if (folds.assignments[i] == f)
                hold.samples.push_back(data.samples[i]);
            else
                train.samples.push_back(data.samples[i]);
        }
        const TreeIndex index = build_index(train, max_level, tree_kind);
        for (std::size_t li = 0; li < levels.size(); ++li)
            risk[li].push_back(holdout_risk(index, hold, kind, ratio, levels[li]));
    }

    std::size_t best = 0;
    double best_mean = std::numeric_limits<double>::infinity();
    std::vector<double> means(levels.size());
    for (std::size_t li = 0; li < levels.size(); ++li) {
        double mean = 0;
        for (double r : risk[li]) mean += r;
        mean /= static_cast<double>(risk[li].size());
        means[li] = mean;
        // strict improvement only: ties go to the shallowest candidate
        if (mean < best_mean) {
            best_mean = mean;
            best = li;
        }
    }
    if (report != nullptr) {
        report->rows.clear();
        for (std::size_t li = 0; li < levels.size(); ++li)
            report->rows.push_back(
                {static_cast<double>(levels[li]), risk[li], means[li], li == best});
    }
    return levels[best];
}

// ---- penalized subtree optimization ----

double codelength_for_depth(int depth, std::size_t dim) {
    return std::ceil(depth * (1.0 + std::log2(static_cast<double>(dim))));
}

double leaf_penalty_term(double mass, double codelength, std::size_t n, double delta) {
    if (n == 0) throw std::invalid_argument("penalty needs n > 0");
    if (delta <= 0 || delta >= 1) throw std::invalid_argument("delta must be in (0,1)");
    return std::sqrt(2.0 * mass * (codelength * std::log(2.0) + std::log(2.0 / delta)) /
                     static_cast<double>(n));
}

namespace {

void subtree_penalty_rec(const PenalizedTree& tree, int node, std::vector<double>& out) {
    const PenNode& nd = tree.nodes[node];
    if (nd.children.empty()) {
        out[node] = leaf_penalty_term(nd.mass, nd.codelength, tree.n, tree.delta);
        return;
    }
    double sum = 0;
    for (int child : nd.children) {
        subtree_penalty_rec(tree, child, out);
        sum += out[child];
    }
    out[node] = sum;
}

void check_kraft(const PenalizedTree& tree) {
    std::vector<int> leaves;
    for (int i = 0; i < static_cast<int>(tree.nodes.size()); ++i)
        if (tree.nodes[i].children.empty()) leaves.push_back(i);
    if (kraft_sum(tree, leaves) > 1.0 + 1e-9)
        throw std::runtime_error("codelengths violate the Kraft inequality");
}

} // namespace

std::vector<double> sn_penalty(const PenalizedTree& tree) {
    check_kraft(tree);
    std::vector<double> out(tree.nodes.size(), 0.0);
    subtree_penalty_rec(tree, tree.root, out);
    return out;
}

double kraft_sum(const PenalizedTree& tree, const std::vector<int>& leaves) {
    double sum = 0;
    for (int node : leaves) sum += std::exp2(-tree.nodes[node].codelength);
    return sum;
}

PenalizedTree build_penalized_tree(const TreeIndex& index, const Dataset& data,
                                   SnVariant variant) {
    if (index.kind != TreeKind::cyclical)
        throw std::invalid_argument("penalized pruning runs on cyclical dyadic trees");
    const std::size_t n_total = data.size();
    const std::size_t n_q = data.target_count();
    if (n_total == 0) throw std::runtime_error("empty dataset");
    if (variant == SnVariant::snq && n_q == 0)
        throw std::runtime_error("SN-Q needs target samples");

    // target-only occupancy, parallel to the pooled stats in the index
    std::vector<CellMap> target_levels(index.levels.size());
    for (const auto& s : data.samples) {
        if (s.origin != kOriginTarget) continue;
        for (int level = 0; level <= index.max_level; ++level) {
            CellStats& st = target_levels[level][cell_of(s.features, level, index).coords];
            st.count += 1;
            st.label_sum += static_cast<std::uint32_t>(s.label);
        }
    }

    PenalizedTree tree;
    tree.kind = index.kind;
    tree.dim = index.dim;
    tree.n = variant == SnVariant::sn ? n_total : n_q;
    tree.delta = 1.0 / static_cast<double>(tree.n);

    struct Frame {
        int level;
        std::vector<std::uint32_t> coords;
        int parent;
    };
    std::vector<Frame> stack;
    stack.push_back({0, std::vector<std::uint32_t>(index.dim, 0), -1});
    while (!stack.empty()) {
        Frame fr = std::move(stack.back());
        stack.pop_back();
        const CellStats pooled = index.levels[fr.level].at(fr.coords);
        CellStats target;
        if (auto it = target_levels[fr.level].find(fr.coords); it != target_levels[fr.level].end())
            target = it->second;

        PenNode node;
        node.depth = fr.level;
        node.coords = fr.coords;
        node.codelength = codelength_for_depth(fr.level, index.dim);
        node.label = pooled.count > 0 &&
                             static_cast<double>(pooled.label_sum) >= 0.5 * pooled.count
                         ? 1
                         : 0;
        if (variant == SnVariant::sn) {
            node.mass = static_cast<double>(pooled.count) / static_cast<double>(n_total);
            const std::uint32_t wrong = node.label == 1 ? pooled.count - pooled.label_sum
                                                        : pooled.label_sum;
            node.leaf_risk = static_cast<double>(wrong) / static_cast<double>(n_total);
        } else {
            node.mass = static_cast<double>(target.count) / static_cast<double>(n_q);
            const std::uint32_t wrong = node.label == 1 ? target.count - target.label_sum
                                                        : target.label_sum;
            node.leaf_risk = static_cast<double>(wrong) / static_cast<double>(n_q);
        }

        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(std::move(node));
        if (fr.parent >= 0)
            tree.nodes[fr.parent].children.push_back(id);
        else
            tree.root = id;

        if (fr.level < index.max_level) {
            const std::size_t axis = static_cast<std::size_t>(fr.level) % index.dim;
            for (std::uint32_t bit = 0; bit < 2; ++bit) {
                std::vector<std::uint32_t> child = fr.coords;
                child[axis] = 2 * child[axis] + bit;
                if (index.levels[fr.level + 1].count(child))
                    stack.push_back({fr.level + 1, std::move(child), id});
            }
        }
    }
    return tree;
}

namespace {

double optimize_rec(const PenalizedTree& tree, int node, double c, std::vector<char>& collapsed) {
    const PenNode& nd = tree.nodes[node];
    const double leaf_cost =
        nd.leaf_risk + c * leaf_penalty_term(nd.mass, nd.codelength, tree.n, tree.delta);
    if (nd.children.empty()) {
        collapsed[node] = 1;
        return leaf_cost;
    }
    double keep_cost = 0;
    for (int child : nd.children) keep_cost += optimize_rec(tree, child, c, collapsed);
    if (leaf_cost <= keep_cost) {
        collapsed[node] = 1;
        return leaf_cost;
    }
    collapsed[node] = 0;
    return keep_cost;
}

void collect_leaves(const PenalizedTree& tree, const std::vector<char>& collapsed, int node,
                    std::vector<int>& leaves) {
    if (collapsed[node] || tree.nodes[node].children.empty()) {
        leaves.push_back(node);
        return;
    }
    for (int child : tree.nodes[node].children) collect_leaves(tree, collapsed, child, leaves);
}

} // namespace

PruneSelection optimize_penalized(const PenalizedTree& tree, double c) {
    if (c < 0) throw std::invalid_argument("dampening constant must be >= 0");
    if (tree.root < 0) throw std::invalid_argument("empty tree");
    check_kraft(tree);
    PruneSelection sel;
    sel.collapsed.assign(tree.nodes.size(), 0);
    sel.objective = optimize_rec(tree, tree.root, c, sel.collapsed);
    collect_leaves(tree, sel.collapsed, tree.root, sel.leaves);
    return sel;
}

int PrunedClassifier::predict(std::span<const double> x) const {
    int node = tree_.root;
    while (!selection_.collapsed[node] && !tree_.nodes[node].children.empty()) {
        const CellId child_cell =
            cell_of(x, tree_.nodes[node].depth + 1, tree_.kind, tree_.dim);
        int next = -1;
        for (int child : tree_.nodes[node].children)
            if (tree_.nodes[child].coords == child_cell.coords) {
                next = child;
                break;
            }
        if (next < 0) break;  // x falls in an unoccupied child; answer from here
        node = next;
    }
    return tree_.nodes[node].label;
}

PrunedClassifier sn_prune(const TreeIndex& index, const Dataset& data, double c,
                          SnVariant variant) {
    PenalizedTree tree = build_penalized_tree(index, data, variant);
    PruneSelection sel = optimize_penalized(tree, c);
    return PrunedClassifier(std::move(tree), std::move(sel));
}

double tune_sn_constant(const Dataset& train, SnVariant variant, int max_level,
                        std::uint64_t seed, SelectionReport* report) {
    std::vector<double> grid;
    for (int e = -6; e <= 4; ++e) grid.push_back(std::ldexp(1.0, e));

    const FoldPlan folds = make_folds(train, 2, derive_seed(seed, 0x5ac0de));
    std::vector<std::vector<double>> risk(grid.size());
    for (int f = 0; f < folds.fold_count; ++f) {
        Dataset fit, hold;
        fit.dim = hold.dim = train.dim;
        for (std::size_t i = 0; i < train.samples.size(); ++i) {
            if (folds.assignments[i] == f)
                hold.samples.push_back(train.samples[i]);
            else
                fit.samples.push_back(train.samples[i]);
        }
        const TreeIndex index = build_index(fit, max_level, TreeKind::cyclical);
        const PenalizedTree tree = build_penalized_tree(index, fit, variant);
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            PrunedClassifier clf(tree, optimize_penalized(tree, grid[gi]));
            std::size_t n = 0, errors = 0;
            for (const auto& s : hold.samples) {
                if (s.origin != kOriginTarget) continue;
                ++n;
                errors += clf.predict(s.features) != s.label;
            }
            if (n == 0) throw std::runtime_error("empty target hold-out while tuning c");
            risk[gi].push_back(static_cast<double>(errors) / static_cast<double>(n));
        }
    }

    std::size_t best = 0;
    double best_mean = std::numeric_limits<double>::infinity();
    std::vector<double> means(grid.size());
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        double mean = 0;
        for (double r : risk[gi]) mean += r;
        mean /= static_cast<double>(risk[gi].size());
        means[gi] = mean;
        if (mean < best_mean) {
            best_mean = mean;
            best = gi;
        }
    }
    if (report != nullptr) {
        report->rows.clear();
        for (std::size_t gi = 0; gi < grid.size(); ++gi)
            report->rows.push_back({grid[gi], risk[gi], means[gi], gi == best});
    }
    return grid[best];
}

} // namespace shift
