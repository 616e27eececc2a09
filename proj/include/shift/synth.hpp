#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "shift/dataset.hpp"
#include "shift/measures.hpp"

namespace shift {

enum class EtaKind { sine, linear_1d, constant };
enum class Family { power_distance, one_d_example, pathological };
enum class Role { source, target };

// Synthetic distribution with an analytically known transfer exponent. The
// power_distance family puts a target uniform on [0,1]^d against a source with
// density dist(x, A_k)^strength, A_k the k-dimensional coordinate subspace;
// one_d_example is the 1-D density x^strength against a uniform target with
// eta(x) = x; pathological is the non-doubling box-chain pair on [0,1]^2.
struct SyntheticSpec {
    Family family = Family::power_distance;
    std::size_t dim = 5;
    std::size_t singular_dim = 0;  // k
    double strength = 0.0;         // nu, exponent of the source density
    EtaKind eta_kind = EtaKind::sine;
    double eta_value = 0.5;  // for the constant kind

    void validate() const;
};

double eta_true(const SyntheticSpec& spec, std::span<const double> x);

Dataset sample_synthetic(const SyntheticSpec& spec, Role role, std::size_t n,
                         std::uint64_t seed);

// Analytic marginal of the spec when closed-form rectangle masses exist
// (uniform targets, 1-D/2-D tail power densities, the pathological pair).
std::unique_ptr<AnalyticMeasure> marginal_measure(const SyntheticSpec& spec, Role role);

// E[min(eta, 1-eta)] over target draws.
double bayes_risk_mc(const SyntheticSpec& spec, std::size_t n_mc, std::uint64_t seed);

// 2 E[ |eta - 1/2| 1{f(X) != f*(X)} ] over target draws.
double excess_risk_mc(const std::function<int(std::span<const double>)>& classifier,
                      const SyntheticSpec& spec, std::size_t n_mc, std::uint64_t seed);

// Sum over target-occupied level cells of Q(envelope)/P(envelope).
double lambda_occupied_cells(const AnalyticMeasure& source, const AnalyticMeasure& target,
                             int level);
double lambda_occupied_cells(const Dataset& source, const Dataset& target, int level,
                             bool pseudo_counts = true);

// MC estimate of the integral of P(B(x,r))^-1 over Q, with l-infinity balls.
double phi_integrated(const AnalyticMeasure& source, const AnalyticMeasure& target, double r,
                      std::size_t n_mc, std::uint64_t seed);
double phi_integrated(const Dataset& source, const Dataset& target, double r, std::size_t n_mc,
                      std::uint64_t seed);

// Sum over the regular dyadic partition of the ambient cube of Q(C)/P(C);
// zero-Q cells contribute 0, positive-Q/zero-P cells are an error.
double lambda_dyadic_ambient(const AnalyticMeasure& source, const AnalyticMeasure& target,
                             int level);

struct ExponentCurve {
    std::vector<double> radii;   // strictly decreasing
    std::vector<double> values;  // positive
    double slope = 0;
    double residual = 0;
};

// Least-squares fit of log(value) against log(1/r); returns (slope, rms residual).
std::pair<double, double> exponent_slope(std::span<const double> radii,
                                         std::span<const double> values);
ExponentCurve make_curve(std::vector<double> radii, std::vector<double> values);
void write_curve_csv(const ExponentCurve& curve, std::ostream& out);

// Default dyadic radius grid 2^-3 .. 2^-8.
std::vector<double> default_radius_grid(int coarsest_level = 3, int finest_level = 8);

} // namespace shift
