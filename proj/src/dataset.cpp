#include "shift/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "shift/rng.hpp"

namespace shift {

std::size_t Dataset::target_count() const {
    std::size_t n = 0;
    for (const auto& s : samples) n += (s.origin == kOriginTarget);
    return n;
}

std::size_t Dataset::source_count() const { return samples.size() - target_count(); }

std::map<int, std::size_t> Dataset::origin_counts() const {
    std::map<int, std::size_t> counts;
    for (const auto& s : samples) ++counts[s.origin];
    return counts;
}

void Dataset::validate() const {
    for (const auto& s : samples) {
        if (s.features.size() != dim) throw std::runtime_error("dataset rows disagree on dimension");
        if (s.label != 0 && s.label != 1) throw std::runtime_error("label outside {0,1}");
        if (s.origin < 0) throw std::runtime_error("negative origin tag");
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

int parse_origin(const std::string& raw) {
    const std::string t = trim(raw);
    if (t == "Q") return kOriginTarget;
    if (t == "P") return 1;
    if (t.size() > 1 && t[0] == 'P') {
        int k = 0;
        for (std::size_t i = 1; i < t.size(); ++i) {
            if (t[i] < '0' || t[i] > '9') throw std::runtime_error("unknown origin tag: " + t);
            k = k * 10 + (t[i] - '0');
        }
        if (k < 1) throw std::runtime_error("origin index must be >= 1: " + t);
        return k;
    }
    throw std::runtime_error("unknown origin tag: " + t);
}

} // namespace

Dataset load_dataset(const std::string& path, const std::string& label_column,
                     const std::string& origin_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    const auto header = split_csv_line(line);

    std::size_t label_idx = header.size();
    std::size_t origin_idx = header.size();
    std::vector<std::size_t> feature_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = trim(header[i]);
        if (name == label_column) {
            label_idx = i;
        } else if (!origin_column.empty() && name == origin_column) {
            origin_idx = i;
        } else {
            feature_cols.push_back(i);
        }
    }
    if (label_idx == header.size()) throw std::runtime_error("label column not found: " + label_column);
    if (!origin_column.empty() && origin_idx == header.size())
        throw std::runtime_error("origin column not found: " + origin_column);

    Dataset data;
    data.dim = feature_cols.size();
    std::vector<std::string> label_values;  // distinct labels, at most two
    std::vector<int> raw_labels;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("row width mismatch at line " + std::to_string(line_no));

        LabeledSample s;
        s.features.reserve(data.dim);
        for (std::size_t c : feature_cols) {
            double v;
            if (!parse_double(cells[c], v))
                throw std::runtime_error("non-numeric feature '" + trim(cells[c]) + "' at line " +
                                         std::to_string(line_no));
            s.features.push_back(v);
        }
        const std::string label = trim(cells[label_idx]);
        auto it = std::find(label_values.begin(), label_values.end(), label);
        if (it == label_values.end()) {
            if (label_values.size() == 2)
                throw std::runtime_error("more than two label values (saw '" + label + "')");
            label_values.push_back(label);
            it = label_values.end() - 1;
        }
        raw_labels.push_back(static_cast<int>(it - label_values.begin()));
        s.origin = (origin_idx < header.size()) ? parse_origin(cells[origin_idx]) : kOriginTarget;
        data.samples.push_back(std::move(s));
    }

    // Map the two distinct label strings onto {0,1}: numerically when both
    // parse (smaller value first), lexicographically otherwise.
    int remap[2] = {0, 1};
    if (label_values.size() == 2) {
        double a, b;
        bool swap_order;
        if (parse_double(label_values[0], a) && parse_double(label_values[1], b))
            swap_order = a > b;
        else
            swap_order = label_values[0] > label_values[1];
        if (swap_order) {
            remap[0] = 1;
            remap[1] = 0;
        }
    } else if (label_values.size() == 1) {
        double v;
        remap[0] = (parse_double(label_values[0], v) && v == 1.0) ? 1 : 0;
    }
    for (std::size_t i = 0; i < data.samples.size(); ++i)
        data.samples[i].label = remap[raw_labels[i]];

    return data;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (std::size_t j = 0; j < data.dim; ++j) out << "f" << j << ",";
    out << "label,origin\n";
    char buf[40];
    for (const auto& s : data.samples) {
        for (double v : s.features) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << buf << ",";
        }
        out << s.label << ",";
        if (s.origin == kOriginTarget)
            out << "Q\n";
        else
            out << "P" << s.origin << "\n";
    }
}

Dataset normalize_features(const Dataset& data) {
    if (data.empty()) throw std::runtime_error("cannot normalize an empty dataset");
    std::vector<double> lo(data.dim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(data.dim, -std::numeric_limits<double>::infinity());
    for (const auto& s : data.samples) {
        for (std::size_t j = 0; j < data.dim; ++j) {
            lo[j] = std::min(lo[j], s.features[j]);
            hi[j] = std::max(hi[j], s.features[j]);
        }
    }
    Dataset out = data;
    for (auto& s : out.samples) {
        for (std::size_t j = 0; j < data.dim; ++j) {
            const double range = hi[j] - lo[j];
            s.features[j] = range > 0 ? (s.features[j] - lo[j]) / range : 0.0;
        }
    }
    return out;
}

std::pair<Dataset, Dataset> threshold_split(const Dataset& data, const SplitRule& rule,
                                            std::uint64_t seed) {
    for (std::size_t idx : rule.feature_indices)
        if (idx >= data.dim) throw std::runtime_error("split rule feature index out of range");

    Dataset source, target;
    source.dim = target.dim = data.dim;
    Rng rng(derive_seed(seed, 0x59117));
    for (const auto& s : data.samples) {
        bool candidate_target = true;
        for (std::size_t idx : rule.feature_indices)
            candidate_target = candidate_target && (s.features[idx] > rule.threshold);
        if (!rng.bernoulli(rule.accept_prob)) continue;  // unkept rows are discarded
        LabeledSample kept = s;
        if (candidate_target) {
            kept.origin = kOriginTarget;
            target.samples.push_back(std::move(kept));
        } else {
            kept.origin = 1;
            source.samples.push_back(std::move(kept));
        }
    }
    return {std::move(source), std::move(target)};
}

namespace {

// Partial Fisher-Yates over an index vector; first n entries are the draw.
std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> pool, std::size_t n,
                                                  Rng& rng) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(n);
    return pool;
}

} // namespace

Dataset subsample(const Dataset& data, std::size_t n_target, std::size_t n_source,
                  std::uint64_t seed) {
    std::vector<std::size_t> target_pool, source_pool;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        if (data.samples[i].origin == kOriginTarget)
            target_pool.push_back(i);
        else
            source_pool.push_back(i);
    }
    if (n_target > target_pool.size())
        throw std::runtime_error("not enough target samples: have " +
                                 std::to_string(target_pool.size()) + ", need " +
                                 std::to_string(n_target));
    if (n_source > source_pool.size())
        throw std::runtime_error("not enough source samples: have " +
                                 std::to_string(source_pool.size()) + ", need " +
                                 std::to_string(n_source));

    Rng rng(derive_seed(seed, 0x5b5a11));
    Dataset out;
    out.dim = data.dim;
    for (std::size_t i : draw_without_replacement(target_pool, n_target, rng))
        out.samples.push_back(data.samples[i]);
    for (std::size_t i : draw_without_replacement(source_pool, n_source, rng))
        out.samples.push_back(data.samples[i]);
    return out;
}

} // namespace shift
