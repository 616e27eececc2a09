#include "shift/tree.hpp"

#include <cmath>
#include <stdexcept>

namespace shift {

int splits_along_axis(TreeKind kind, std::size_t dim, int level, std::size_t axis) {
    if (kind == TreeKind::regular) return level;
    const int full = level / static_cast<int>(dim);
    const int rem = level % static_cast<int>(dim);
    return full + (static_cast<int>(axis) < rem ? 1 : 0);
}

CellId cell_of(std::span<const double> x, int level, TreeKind kind, std::size_t dim) {
    CellId cell;
    cell.level = level;
    cell.coords.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        const int s = splits_along_axis(kind, dim, level, j);
        const std::uint32_t cells = 1u << s;
        double v = std::floor(x[j] * static_cast<double>(cells));
        if (v < 0) v = 0;
        if (v > cells - 1) v = cells - 1;  // clamp maps 1.0 into the last cell
        cell.coords[j] = static_cast<std::uint32_t>(v);
    }
    return cell;
}

CellId cell_of(std::span<const double> x, int level, const TreeIndex& index) {
    if (level < 0 || level > index.max_level) throw std::invalid_argument("level out of range");
    return cell_of(x, level, index.kind, index.dim);
}

TreeIndex build_index(const Dataset& data, int max_level, TreeKind kind) {
    if (max_level < 0) throw std::invalid_argument("max_level must be >= 0");
    if (max_level > 30) throw std::invalid_argument("max_level too deep");
    TreeIndex index;
    index.kind = kind;
    index.dim = data.dim;
    index.max_level = max_level;
    index.n_target = data.target_count();
    index.n_source = data.source_count();
    index.levels.resize(static_cast<std::size_t>(max_level) + 1);

    for (const auto& s : data.samples) {
        for (double v : s.features)
            if (!(v >= 0.0 && v <= 1.0))
                throw std::runtime_error("feature outside [0,1]; normalize first");
        for (int level = 0; level <= max_level; ++level) {
            const CellId cell = cell_of(s.features, level, kind, data.dim);
            CellStats& st = index.levels[level][cell.coords];
            st.count += 1;
            st.label_sum += static_cast<std::uint32_t>(s.label);
        }
    }
    return index;
}

namespace {

void validate_cell(const TreeIndex& index, const CellId& cell) {
    if (cell.level < 0 || cell.level > index.max_level)
        throw std::invalid_argument("cell level out of range");
    if (cell.coords.size() != index.dim) throw std::invalid_argument("cell dimension mismatch");
    for (std::size_t j = 0; j < index.dim; ++j) {
        const int s = splits_along_axis(index.kind, index.dim, cell.level, j);
        if (cell.coords[j] >= (1u << s)) throw std::invalid_argument("cell coordinate out of range");
    }
}

CellStats envelope_scan(const CellMap& cells, const std::vector<std::uint32_t>& lo,
                        const std::vector<std::uint32_t>& hi) {
    CellStats total;
    for (const auto& [coords, st] : cells) {
        bool inside = true;
        for (std::size_t j = 0; j < coords.size() && inside; ++j)
            inside = coords[j] >= lo[j] && coords[j] <= hi[j];
        if (inside) {
            total.count += st.count;
            total.label_sum += st.label_sum;
        }
    }
    return total;
}

CellStats envelope_enumerate(const CellMap& cells, const std::vector<std::uint32_t>& lo,
                             const std::vector<std::uint32_t>& hi) {
    CellStats total;
    std::vector<std::uint32_t> cur(lo);
    while (true) {
        auto it = cells.find(cur);
        if (it != cells.end()) {
            total.count += it->second.count;
            total.label_sum += it->second.label_sum;
        }
        // odometer increment over the neighbor block
        std::size_t j = 0;
        for (; j < cur.size(); ++j) {
            if (cur[j] < hi[j]) {
                ++cur[j];
                break;
            }
            cur[j] = lo[j];
        }
        if (j == cur.size()) break;
    }
    return total;
}

} // namespace

CellStats cell_stats(const TreeIndex& index, const CellId& cell) {
    validate_cell(index, cell);
    const CellMap& cells = index.levels[cell.level];
    auto it = cells.find(cell.coords);
    return it == cells.end() ? CellStats{} : it->second;
}

CellStats envelope_stats(const TreeIndex& index, const CellId& cell) {
    validate_cell(index, cell);
    const CellMap& cells = index.levels[cell.level];

    std::vector<std::uint32_t> lo(index.dim), hi(index.dim);
    double block = 1.0;
    for (std::size_t j = 0; j < index.dim; ++j) {
        const int s = splits_along_axis(index.kind, index.dim, cell.level, j);
        const std::uint32_t last = (1u << s) - 1;
        const std::uint32_t c = cell.coords[j];
        lo[j] = c > 0 ? c - 1 : 0;
        hi[j] = c < last ? c + 1 : last;
        block *= static_cast<double>(hi[j] - lo[j] + 1);
    }
    // Enumerating the neighbor block is cheap in low dimension; in high
    // dimension scanning the occupied cells wins.
    if (block <= 2.0 * static_cast<double>(cells.size()) + 8.0)
        return envelope_enumerate(cells, lo, hi);
    return envelope_scan(cells, lo, hi);
}

double eta_hat(const TreeIndex& index, std::span<const double> x, int level) {
    const CellStats st = envelope_stats(index, cell_of(x, level, index));
    if (st.count == 0) return 0.0;
    return static_cast<double>(st.label_sum) / static_cast<double>(st.count);
}

int classify_at_level(const TreeIndex& index, std::span<const double> x, int level) {
    return eta_hat(index, x, level) >= 0.5 ? 1 : 0;
}

const CellStats& EnvelopeCache::get(const CellId& cell) {
    CellMap& memo = per_level_[cell.level];
    auto it = memo.find(cell.coords);
    if (it == memo.end()) it = memo.emplace(cell.coords, envelope_stats(*index_, cell)).first;
    return it->second;
}

std::vector<int> classify_batch(const TreeIndex& index,
                                const std::vector<std::vector<double>>& points, int level) {
    EnvelopeCache cache(index);
    std::vector<int> labels;
    labels.reserve(points.size());
    for (const auto& p : points) {
        const CellStats& st = cache.get(cell_of(p, level, index));
        const double eta = st.count == 0 ? 0.0
                                         : static_cast<double>(st.label_sum) /
                                               static_cast<double>(st.count);
        labels.push_back(eta >= 0.5 ? 1 : 0);
    }
    return labels;
}

int deepest_admissible_level(std::size_t n_p, std::size_t n_q) {
    const std::size_t n = n_p + n_q;
    if (n == 0) throw std::invalid_argument("need at least one sample");
    // smallest i with 2^(2i) >= n, i.e. ceil(log2(n)/2)
    int i = 0;
    while ((static_cast<std::uint64_t>(1) << (2 * i)) < n) ++i;
    return i;
}

std::vector<int> admissible_levels(std::size_t n_p, std::size_t n_q) {
    const int deepest = deepest_admissible_level(n_p, n_q);
    std::vector<int> levels(static_cast<std::size_t>(deepest) + 1);
    for (int i = 0; i <= deepest; ++i) levels[i] = i;
    return levels;
}

void dump_level_csv(const TreeIndex& index, int level, std::ostream& out) {
    if (level < 0 || level > index.max_level) throw std::invalid_argument("level out of range");
    out << "level";
    for (std::size_t j = 0; j < index.dim; ++j) out << ",coord_" << j;
    out << ",count,labelSum\n";
    for (const auto& [coords, st] : index.levels[level]) {
        out << level;
        for (std::uint32_t c : coords) out << "," << c;
        out << "," << st.count << "," << st.label_sum << "\n";
    }
}

} // namespace shift
