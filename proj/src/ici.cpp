#include "shift/ici.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace shift {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double theoretical_width_constant(std::size_t n_total, double delta) {
    if (n_total == 0) throw std::invalid_argument("need at least one sample");
    if (delta <= 0.0) delta = 1.0 / static_cast<double>(n_total);
    const double ratio = static_cast<double>(n_total) / delta;
    return 0.5 * (1.0 + 2.0 * std::sqrt(std::log(ratio)));
}

double resolve_width_constant(const IciConfig& cfg, const TreeIndex& index) {
    if (cfg.width_constant) {
        if (*cfg.width_constant <= 0.0) throw std::invalid_argument("width constant must be > 0");
        return *cfg.width_constant;
    }
    return theoretical_width_constant(index.total(), cfg.delta);
}

int default_start_level(const TreeIndex& index) {
    const int deepest = deepest_admissible_level(index.n_source, index.n_target);
    const int units = index.kind == TreeKind::cyclical ? deepest * static_cast<int>(index.dim)
                                                       : deepest;
    return std::min(units, index.max_level);
}

double sigma_hat(const TreeIndex& index, std::span<const double> x, int level,
                 const IciConfig& cfg) {
    const CellStats st = envelope_stats(index, cell_of(x, level, index));
    if (st.count == 0) return kInf;
    return resolve_width_constant(cfg, index) / std::sqrt(static_cast<double>(st.count));
}

IciTrace ici_classify(const TreeIndex& index, std::span<const double> x, const IciConfig& cfg,
                      EnvelopeCache& cache) {
    const double width = resolve_width_constant(cfg, index);
    const int start = std::min(cfg.start_level ? *cfg.start_level : default_start_level(index),
                               index.max_level);
    if (start < 0) throw std::invalid_argument("start level must be >= 0");
    const int cap = std::max(0, std::min(cfg.cap_level, start));

    IciTrace trace;
    double lower = -kInf;  // running eta-minus
    double upper = kInf;   // running eta-plus

    for (int level = start;; --level) {
        const CellStats& st = cache.get(cell_of(x, level, index));
        double eta = 0.0;
        double sigma = kInf;
        if (st.count > 0) {
            eta = static_cast<double>(st.label_sum) / static_cast<double>(st.count);
            sigma = width / std::sqrt(static_cast<double>(st.count));
            // empty envelopes contribute the vacuous interval and change nothing
            lower = std::max(lower, eta - 2.0 * sigma);
            upper = std::min(upper, eta + 2.0 * sigma);
        }
        trace.visited.push_back({level, eta, sigma, lower, upper});

        if (upper <= lower) {
            trace.stop_reason = IciStop::disjoint;
            trace.estimate = 0.5 * (upper + lower);
            break;
        }
        // strict, per the algorithm's loop guard: equality at 1/2 keeps walking
        // (with C = 1/4 a single-point envelope has 2*sigma = 1/2 exactly)
        if (upper < 0.5 || lower > 0.5) {
            trace.stop_reason = IciStop::one_sided;
            trace.estimate = eta;
            break;
        }
        if (level == cap) {
            trace.stop_reason = IciStop::cap;
            trace.estimate = eta;
            break;
        }
    }

    trace.lower = lower;
    trace.upper = upper;
    trace.label = trace.estimate >= 0.5 ? 1 : 0;
    return trace;
}

IciTrace ici_classify(const TreeIndex& index, std::span<const double> x, const IciConfig& cfg) {
    EnvelopeCache cache(index);
    return ici_classify(index, x, cfg, cache);
}

std::vector<int> ici_predict_batch(const TreeIndex& index,
                                   const std::vector<std::vector<double>>& points,
                                   const IciConfig& cfg) {
    EnvelopeCache cache(index);
    std::vector<int> labels;
    labels.reserve(points.size());
    for (const auto& p : points) labels.push_back(ici_classify(index, p, cfg, cache).label);
    return labels;
}

const char* to_string(IciStop reason) {
    switch (reason) {
        case IciStop::disjoint: return "disjoint";
        case IciStop::one_sided: return "oneSided";
        case IciStop::cap: return "cap";
    }
    return "?";
}

void write_trace_csv(std::span<const IciTrace> traces, std::ostream& out) {
    out << "point,level,eta,sigma,lower,upper,stop\n";
    char buf[48];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        out << buf;
    };
    for (std::size_t i = 0; i < traces.size(); ++i) {
        for (const auto& v : traces[i].visited) {
            out << i << "," << v.level << ",";
            put(v.eta);
            out << ",";
            put(v.sigma);
            out << ",";
            put(v.lower);
            out << ",";
            put(v.upper);
            out << "," << to_string(traces[i].stop_reason) << "\n";
        }
    }
}

} // namespace shift
