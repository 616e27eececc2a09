#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "shift/dataset.hpp"

namespace shift {

enum class TreeKind { regular, cyclical };

// Regular trees: level i partitions [0,1]^D into cells of side 2^-i.
// Cyclical trees: level l is l binary splits, axis = step mod D (deterministic
// round robin), so axis j has been split l/D + (j < l%D) times.
struct CellId {
    int level = 0;
    std::vector<std::uint32_t> coords;
};

struct CellStats {
    std::uint32_t count = 0;
    std::uint32_t label_sum = 0;
};

struct CoordHash {
    std::size_t operator()(const std::vector<std::uint32_t>& c) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::uint32_t v : c) {
            h ^= v;
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

using CellMap = std::unordered_map<std::vector<std::uint32_t>, CellStats, CoordHash>;

struct TreeIndex {
    TreeKind kind = TreeKind::regular;
    std::size_t dim = 0;
    int max_level = 0;
    std::size_t n_source = 0;  // n_P (pooled)
    std::size_t n_target = 0;  // n_Q
    std::vector<CellMap> levels;  // levels[i]: occupied cells only

    std::size_t total() const { return n_source + n_target; }
};

int splits_along_axis(TreeKind kind, std::size_t dim, int level, std::size_t axis);

TreeIndex build_index(const Dataset& data, int max_level, TreeKind kind);

// Total on the cube: half-open cells [a,b) with coordinate 1.0 clamped into the
// last cell along each axis.
CellId cell_of(std::span<const double> x, int level, TreeKind kind, std::size_t dim);
CellId cell_of(std::span<const double> x, int level, const TreeIndex& index);

CellStats cell_stats(const TreeIndex& index, const CellId& cell);

// Pooled stats over the cell dilated by its smallest side: the +-1 block of
// same-level neighbors, clipped to the cube.
CellStats envelope_stats(const TreeIndex& index, const CellId& cell);

double eta_hat(const TreeIndex& index, std::span<const double> x, int level);
int classify_at_level(const TreeIndex& index, std::span<const double> x, int level);

// Memoizes envelope lookups for repeated queries against one index.
class EnvelopeCache {
public:
    explicit EnvelopeCache(const TreeIndex& index) : index_(&index), per_level_(index.levels.size()) {}
    const CellStats& get(const CellId& cell);

private:
    const TreeIndex* index_;
    std::vector<CellMap> per_level_;
};

std::vector<int> classify_batch(const TreeIndex& index,
                                const std::vector<std::vector<double>>& points, int level);

// Admissible regular levels {0..ceil(log2(nP+nQ)/2)}; the deepest has
// r_0 = 2^-ceil(log2(nP+nQ)/2).
std::vector<int> admissible_levels(std::size_t n_p, std::size_t n_q);
int deepest_admissible_level(std::size_t n_p, std::size_t n_q);

// Debug dump of one level: level,coord_0..coord_{D-1},count,labelSum
void dump_level_csv(const TreeIndex& index, int level, std::ostream& out);

} // namespace shift
