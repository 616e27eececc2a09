#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "shift/tree.hpp"

namespace shift {

// Confidence-width configuration for local depth selection. width_constant is
// the multiplier C in sigma = C / sqrt(envelope count); leave it unset to use
// the theoretical constant C_{n,delta} = (1 + 2 sqrt(log(n/delta))) / 2 with
// delta defaulting to 1/n. The practical default is C = 1/4.
struct IciConfig {
    std::optional<double> width_constant = 0.25;
    double delta = 0.0;                 // 0 -> 1/(nP+nQ)
    std::optional<int> start_level;     // default: deepest admissible level of the index
    int cap_level = 1;                  // coarsest level visited (side 1/2)
};

double theoretical_width_constant(std::size_t n_total, double delta = 0.0);
double resolve_width_constant(const IciConfig& cfg, const TreeIndex& index);

// Default start: the deepest admissible level expressed in the index's level
// units (binary levels for cyclical trees), capped by the built depth.
int default_start_level(const TreeIndex& index);

// width / sqrt(envelope count); +infinity when the envelope is empty.
double sigma_hat(const TreeIndex& index, std::span<const double> x, int level,
                 const IciConfig& cfg);

enum class IciStop { disjoint, one_sided, cap };

struct IciLevelVisit {
    int level;
    double eta;
    double sigma;
    double lower;  // running eta-minus after this level
    double upper;  // running eta-plus after this level
};

struct IciTrace {
    std::vector<IciLevelVisit> visited;
    double lower = 0;  // final running interval
    double upper = 0;
    IciStop stop_reason = IciStop::cap;
    double estimate = 0;
    int label = 0;
};

IciTrace ici_classify(const TreeIndex& index, std::span<const double> x, const IciConfig& cfg);
IciTrace ici_classify(const TreeIndex& index, std::span<const double> x, const IciConfig& cfg,
                      EnvelopeCache& cache);

std::vector<int> ici_predict_batch(const TreeIndex& index,
                                   const std::vector<std::vector<double>>& points,
                                   const IciConfig& cfg);

const char* to_string(IciStop reason);

// Opt-in trace dump: point id, visited level, eta, sigma, running bounds, stop reason.
void write_trace_csv(std::span<const IciTrace> traces, std::ostream& out);

} // namespace shift
