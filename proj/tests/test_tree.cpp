#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "shift/tree.hpp"

using namespace shift;
using namespace shift::testing;

TEST_CASE("cell_of on the regular grid") {
    const std::vector<double> x{0.3, 0.7};
    const CellId c = cell_of(x, 2, TreeKind::regular, 2);
    CHECK(c.coords == std::vector<std::uint32_t>{1, 2});

    const std::vector<double> boundary{1.0, 0.0};
    CHECK(cell_of(boundary, 1, TreeKind::regular, 2).coords ==
          std::vector<std::uint32_t>{1, 0});  // 1.0 clamps into the last cell

    CHECK(cell_of(x, 0, TreeKind::regular, 2).coords == std::vector<std::uint32_t>{0, 0});
}

TEST_CASE("cell_of on the cyclical grid splits axes in rotation") {
    // level 3 in d = 2: axis 0 split twice, axis 1 once
    CHECK(splits_along_axis(TreeKind::cyclical, 2, 3, 0) == 2);
    CHECK(splits_along_axis(TreeKind::cyclical, 2, 3, 1) == 1);
    const std::vector<double> x{0.6, 0.9};
    const CellId c = cell_of(x, 3, TreeKind::cyclical, 2);
    CHECK(c.coords == std::vector<std::uint32_t>{2, 1});
}

TEST_CASE("cell_of is consistent with the cell extent") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t dim = 1 + rng.below(3);
        std::vector<double> x(dim);
        for (auto& v : x) v = rng.u01();
        const int level = static_cast<int>(rng.below(5));
        for (TreeKind kind : {TreeKind::regular, TreeKind::cyclical}) {
            const CellId c = cell_of(x, level, kind, dim);
            for (std::size_t j = 0; j < dim; ++j) {
                const double side =
                    std::ldexp(1.0, -splits_along_axis(kind, dim, level, j));
                CHECK(x[j] >= c.coords[j] * side);
                CHECK(x[j] <= (c.coords[j] + 1) * side);
            }
        }
    }
}

TEST_CASE("build_index handles degenerate inputs") {
    Dataset empty;
    empty.dim = 2;
    const TreeIndex index = build_index(empty, 3, TreeKind::regular);
    CHECK(index.total() == 0);
    for (const auto& level : index.levels) CHECK(level.empty());

    const Dataset one = make_dataset({{0.1, 0.1}}, {1});
    const TreeIndex single = build_index(one, 1, TreeKind::regular);
    const CellStats st = cell_stats(single, CellId{1, {0, 0}});
    CHECK(st.count == 1);
    CHECK(st.label_sum == 1);

    const Dataset outside = make_dataset({{1.5, 0.0}}, {0});
    CHECK_THROWS(build_index(outside, 1, TreeKind::regular));
}

TEST_CASE("stored counts match a brute-force scan") {
    const Dataset data = random_dataset(2000, 3, 31);
    for (TreeKind kind : {TreeKind::regular, TreeKind::cyclical}) {
        const int max_level = kind == TreeKind::regular ? 5 : 10;
        const TreeIndex index = build_index(data, max_level, kind);
        for (int level = 0; level <= max_level; ++level) {
            std::size_t level_total = 0;
            for (const auto& [coords, st] : index.levels[level]) {
                std::uint32_t count = 0, label_sum = 0;
                for (const auto& s : data.samples) {
                    if (cell_of(s.features, level, kind, 3).coords == coords) {
                        ++count;
                        label_sum += s.label;
                    }
                }
                CHECK(st.count == count);
                CHECK(st.label_sum == label_sum);
                level_total += st.count;
            }
            CHECK(level_total == data.size());  // every sample counted once per level
        }
    }
}

TEST_CASE("nestedness: parent counts equal the sum over children") {
    const Dataset data = random_dataset(800, 2, 37);
    SUBCASE("regular") {
        const TreeIndex index = build_index(data, 4, TreeKind::regular);
        for (int level = 0; level < 4; ++level) {
            for (const auto& [coords, st] : index.levels[level]) {
                std::uint32_t child_total = 0;
                for (std::uint32_t b0 = 0; b0 < 2; ++b0)
                    for (std::uint32_t b1 = 0; b1 < 2; ++b1) {
                        const std::vector<std::uint32_t> child{2 * coords[0] + b0,
                                                               2 * coords[1] + b1};
                        auto it = index.levels[level + 1].find(child);
                        if (it != index.levels[level + 1].end()) child_total += it->second.count;
                    }
                CHECK(st.count == child_total);
            }
        }
    }
    SUBCASE("cyclical") {
        const TreeIndex index = build_index(data, 7, TreeKind::cyclical);
        for (int level = 0; level < 7; ++level) {
            const std::size_t axis = level % 2;
            for (const auto& [coords, st] : index.levels[level]) {
                std::uint32_t child_total = 0;
                for (std::uint32_t bit = 0; bit < 2; ++bit) {
                    std::vector<std::uint32_t> child = coords;
                    child[axis] = 2 * child[axis] + bit;
                    auto it = index.levels[level + 1].find(child);
                    if (it != index.levels[level + 1].end()) child_total += it->second.count;
                }
                CHECK(st.count == child_total);
            }
        }
    }
}

TEST_CASE("envelope_stats of hand-built configurations") {
    SUBCASE("interior cell sums the nine neighbors") {
        // one point per level-2 cell in d = 2, labels by parity
        std::vector<std::vector<double>> points;
        std::vector<int> labels;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                points.push_back({(i + 0.5) / 4.0, (j + 0.5) / 4.0});
                labels.push_back((i + j) % 2);
            }
        const Dataset data = make_dataset(points, labels);
        const TreeIndex index = build_index(data, 2, TreeKind::regular);
        const CellStats interior = envelope_stats(index, CellId{2, {1, 1}});
        CHECK(interior.count == 9);
        CHECK(interior.label_sum == 4);  // parity pattern over the 3x3 block

        const CellStats corner = envelope_stats(index, CellId{2, {0, 0}});
        CHECK(corner.count == 4);  // clipped to the in-range neighbors
        CHECK(corner.label_sum == 2);
    }
    SUBCASE("invalid cells are rejected") {
        const Dataset data = random_dataset(10, 2, 5);
        const TreeIndex index = build_index(data, 2, TreeKind::regular);
        CHECK_THROWS(envelope_stats(index, CellId{5, {0, 0}}));
        CHECK_THROWS(envelope_stats(index, CellId{2, {9, 0}}));
        CHECK_THROWS(envelope_stats(index, CellId{2, {0}}));
    }
}

TEST_CASE("envelope_stats equals the brute-force dilated-rectangle count") {
    // includes grid-aligned and boundary coordinates to stress the clamp rule
    Rng rng(41);
    Dataset data = random_dataset(1500, 2, 43);
    for (int i = 0; i < 300; ++i) {
        LabeledSample s;
        s.features = {static_cast<double>(rng.below(9)) / 8.0,
                      static_cast<double>(rng.below(5)) / 4.0};
        s.label = static_cast<int>(rng.below(2));
        data.samples.push_back(std::move(s));
    }
    for (TreeKind kind : {TreeKind::regular, TreeKind::cyclical}) {
        const int max_level = kind == TreeKind::regular ? 4 : 8;
        const TreeIndex index = build_index(data, max_level, kind);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> x{rng.u01(), rng.u01()};
            const int level = static_cast<int>(rng.below(max_level + 1));
            const CellId cell = cell_of(x, level, kind, 2);
            const CellStats got = envelope_stats(index, cell);
            const CellStats want = brute_force_envelope(data, cell, kind, 2);
            CHECK(got.count == want.count);
            CHECK(got.label_sum == want.label_sum);
        }
    }
}

TEST_CASE("eta_hat and classify_at_level") {
    // three points in one envelope with labels {1,1,0}
    const Dataset data =
        make_dataset({{0.1}, {0.3}, {0.6}}, {1, 1, 0});
    const TreeIndex index = build_index(data, 2, TreeKind::regular);
    // envelope of cell 1 at level 2 covers [0, 0.75): all three points
    CHECK(eta_hat(index, std::vector<double>{0.3}, 2) == doctest::Approx(2.0 / 3.0));

    SUBCASE("empty envelope gives zero and label 0") {
        const Dataset sparse = make_dataset({{0.05}}, {1});
        const TreeIndex idx = build_index(sparse, 3, TreeKind::regular);
        // envelope of cell 7 at level 3 covers [0.75, 1]: empty
        CHECK(eta_hat(idx, std::vector<double>{0.99}, 3) == 0.0);
        CHECK(classify_at_level(idx, std::vector<double>{0.99}, 3) == 0);
    }
    SUBCASE("saturated mean") {
        const Dataset pure = make_dataset({{0.4}, {0.45}}, {1, 1});
        const TreeIndex idx = build_index(pure, 1, TreeKind::regular);
        CHECK(eta_hat(idx, std::vector<double>{0.4}, 1) == 1.0);
    }
    SUBCASE("eta exactly 1/2 classifies as 1") {
        const Dataset even = make_dataset({{0.2}, {0.3}}, {1, 0});
        const TreeIndex idx = build_index(even, 1, TreeKind::regular);
        CHECK(eta_hat(idx, std::vector<double>{0.1}, 1) == 0.5);
        CHECK(classify_at_level(idx, std::vector<double>{0.1}, 1) == 1);
    }
    SUBCASE("level out of range") {
        CHECK_THROWS(eta_hat(index, std::vector<double>{0.3}, 9));
    }
}

TEST_CASE("eta_hat is invariant under sample permutation") {
    const Dataset data = random_dataset(400, 2, 53);
    Dataset shuffled = data;
    Rng rng(54);
    for (std::size_t i = shuffled.samples.size(); i > 1; --i)
        std::swap(shuffled.samples[i - 1], shuffled.samples[rng.below(i)]);
    const TreeIndex a = build_index(data, 4, TreeKind::regular);
    const TreeIndex b = build_index(shuffled, 4, TreeKind::regular);
    for (int trial = 0; trial < 100; ++trial) {
        const std::vector<double> x{rng.u01(), rng.u01()};
        const int level = static_cast<int>(rng.below(5));
        CHECK(eta_hat(a, x, level) == eta_hat(b, x, level));
    }
}

TEST_CASE("admissible levels") {
    CHECK(admissible_levels(16, 0) == std::vector<int>{0, 1, 2});
    CHECK(admissible_levels(0, 1) == std::vector<int>{0});
    CHECK(deepest_admissible_level(1000, 100) == 6);  // ceil(log2(1100)/2)
    CHECK(deepest_admissible_level(4, 0) == 1);
    CHECK_THROWS(admissible_levels(0, 0));
}

TEST_CASE("level dump emits one row per occupied cell") {
    const Dataset data = make_dataset({{0.1, 0.1}, {0.9, 0.9}, {0.9, 0.85}}, {1, 0, 1});
    const TreeIndex index = build_index(data, 1, TreeKind::regular);
    std::ostringstream out;
    dump_level_csv(index, 1, out);
    const std::string text = out.str();
    CHECK(text.find("level,coord_0,coord_1,count,labelSum\n") == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // header + 2 occupied cells
    CHECK(text.find("1,1,1,2,1") != std::string::npos);
}
