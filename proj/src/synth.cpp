#include "shift/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "shift/rng.hpp"
#include "shift/tree.hpp"

namespace shift {

void SyntheticSpec::validate() const {
    if (dim == 0) throw std::invalid_argument("dimension must be positive");
    if (strength < 0) throw std::invalid_argument("strength must be >= 0");
    switch (family) {
        case Family::power_distance:
            if (singular_dim >= dim)
                throw std::invalid_argument("singular dimension must be < dim");
            break;
        case Family::one_d_example:
            if (dim != 1) throw std::invalid_argument("the 1-D example forces dim = 1");
            if (eta_kind != EtaKind::linear_1d && eta_kind != EtaKind::constant)
                throw std::invalid_argument("the 1-D example uses eta(x) = x");
            break;
        case Family::pathological:
            if (dim != 2) throw std::invalid_argument("the pathological pair forces dim = 2");
            break;
    }
}

double eta_true(const SyntheticSpec& spec, std::span<const double> x) {
    switch (spec.eta_kind) {
        case EtaKind::sine: {
            double l1 = 0;
            for (double v : x) l1 += std::abs(v);
            return 0.5 * (1.0 + std::sin(M_PI * l1));
        }
        case EtaKind::linear_1d:
            return x[0];
        case EtaKind::constant:
            return spec.eta_value;
    }
    return 0.5;
}

std::unique_ptr<AnalyticMeasure> marginal_measure(const SyntheticSpec& spec, Role role) {
    spec.validate();
    if (spec.family == Family::pathological) {
        if (role == Role::target) return std::make_unique<PathologicalPair::Target>();
        return std::make_unique<PathologicalPair::Source>(spec.strength);
    }
    if (role == Role::target) return std::make_unique<UniformMeasure>(spec.dim);
    // one_d_example is the k = 0 tail-power density in dimension 1
    const std::size_t k = spec.family == Family::one_d_example ? 0 : spec.singular_dim;
    return std::make_unique<PowerDistanceMeasure>(spec.dim, k, spec.strength);
}

Dataset sample_synthetic(const SyntheticSpec& spec, Role role, std::size_t n,
                         std::uint64_t seed) {
    spec.validate();
    const auto measure = marginal_measure(spec, role);
    Rng rng(derive_seed(seed, 0x5a3d, role == Role::target ? 1 : 2));
    Dataset data;
    data.dim = spec.dim;
    data.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        LabeledSample s;
        s.features = measure->sample(rng);
        s.label = rng.bernoulli(eta_true(spec, s.features)) ? 1 : 0;
        s.origin = role == Role::target ? kOriginTarget : 1;
        data.samples.push_back(std::move(s));
    }
    return data;
}

double bayes_risk_mc(const SyntheticSpec& spec, std::size_t n_mc, std::uint64_t seed) {
    if (n_mc == 0) throw std::invalid_argument("n_mc must be >= 1");
    const auto target = marginal_measure(spec, Role::target);
    Rng rng(derive_seed(seed, 0xbae5));
    double sum = 0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        const double eta = eta_true(spec, target->sample(rng));
        sum += std::min(eta, 1.0 - eta);
    }
    return sum / static_cast<double>(n_mc);
}

double excess_risk_mc(const std::function<int(std::span<const double>)>& classifier,
                      const SyntheticSpec& spec, std::size_t n_mc, std::uint64_t seed) {
    if (n_mc == 0) throw std::invalid_argument("n_mc must be >= 1");
    const auto target = marginal_measure(spec, Role::target);
    Rng rng(derive_seed(seed, 0xe6ce55));
    double sum = 0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        const std::vector<double> x = target->sample(rng);
        const double eta = eta_true(spec, x);
        const int bayes = eta >= 0.5 ? 1 : 0;
        if (classifier(x) != bayes) sum += 2.0 * std::abs(eta - 0.5);
    }
    return sum / static_cast<double>(n_mc);
}

namespace {

Rect cell_rect(const std::vector<std::uint32_t>& coords, double side) {
    Rect r;
    r.lo.resize(coords.size());
    r.hi.resize(coords.size());
    for (std::size_t j = 0; j < coords.size(); ++j) {
        r.lo[j] = coords[j] * side;
        r.hi[j] = (coords[j] + 1) * side;
    }
    return r;
}

Rect dilate(const Rect& r, double amount) {
    Rect out = r;
    for (std::size_t j = 0; j < out.lo.size(); ++j) {
        out.lo[j] -= amount;
        out.hi[j] += amount;
    }
    return out.clipped_to_cube();
}

} // namespace

double lambda_occupied_cells(const AnalyticMeasure& source, const AnalyticMeasure& target,
                             int level) {
    if (source.dim() != target.dim()) throw std::invalid_argument("dimension mismatch");
    const double side = std::ldexp(1.0, -level);
    const auto cells = target.positive_cells(level);
    if (cells.empty()) throw std::runtime_error("no occupied cells");
    double sum = 0;
    for (const auto& coords : cells) {
        const Rect envelope = dilate(cell_rect(coords, side), side);
        const double q = target.rect_mass(envelope);
        if (q <= 0) continue;
        const double p = source.rect_mass(envelope);
        if (p <= 0) throw std::runtime_error("target mass on a source-null envelope");
        sum += q / p;
    }
    return sum;
}

double lambda_occupied_cells(const Dataset& source, const Dataset& target, int level,
                             bool pseudo_counts) {
    if (source.dim != target.dim) throw std::invalid_argument("dimension mismatch");
    const TreeIndex source_index = build_index(source, level, TreeKind::regular);
    const TreeIndex target_index = build_index(target, level, TreeKind::regular);
    const CellMap& occupied = target_index.levels[level];
    if (occupied.empty()) throw std::runtime_error("no occupied cells");

    const double n_p = static_cast<double>(source.size());
    const double n_q = static_cast<double>(target.size());
    double sum = 0;
    for (const auto& [coords, st] : occupied) {
        (void)st;
        CellId cell{level, coords};
        const double q_count = envelope_stats(target_index, cell).count;
        double p_count = envelope_stats(source_index, cell).count;
        if (p_count == 0) {
            if (!pseudo_counts) throw std::runtime_error("source-empty envelope");
            p_count = 0.5;
        }
        sum += (q_count / n_q) / (p_count / n_p);
    }
    return sum;
}

double phi_integrated(const AnalyticMeasure& source, const AnalyticMeasure& target, double r,
                      std::size_t n_mc, std::uint64_t seed) {
    if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("r must be in (0,1]");
    if (n_mc == 0) throw std::invalid_argument("n_mc must be >= 1");
    // the stream ignores r: curves evaluated at one seed share their MC points,
    // which keeps phi exactly monotone across radii
    Rng rng(derive_seed(seed, 0x9b1));
    double sum = 0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        const std::vector<double> x = target.sample(rng);
        const double mass = source.rect_mass(Rect::ball(x, r));
        if (mass <= 0) throw std::runtime_error("target point with zero source ball mass");
        sum += 1.0 / mass;
    }
    return sum / static_cast<double>(n_mc);
}

double phi_integrated(const Dataset& source, const Dataset& target, double r, std::size_t n_mc,
                      std::uint64_t seed) {
    if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("r must be in (0,1]");
    if (source.empty() || target.empty()) throw std::invalid_argument("empty dataset");
    const double n_p = static_cast<double>(source.size());

    // evaluation points: the target sample, subsampled when n_mc is smaller
    std::vector<std::size_t> points(target.size());
    for (std::size_t i = 0; i < points.size(); ++i) points[i] = i;
    if (n_mc < points.size()) {
        Rng rng(derive_seed(seed, 0x901d));
        for (std::size_t i = 0; i < n_mc; ++i)
            std::swap(points[i], points[i + rng.below(points.size() - i)]);
        points.resize(n_mc);
    }

    double sum = 0;
    for (std::size_t pi : points) {
        const auto& x = target.samples[pi].features;
        double count = 0;
        for (const auto& s : source.samples) {
            bool inside = true;
            for (std::size_t j = 0; j < x.size() && inside; ++j)
                inside = std::abs(s.features[j] - x[j]) <= r;
            count += inside;
        }
        if (count == 0) count = 0.5;  // pseudo-count floor
        sum += n_p / count;
    }
    return sum / static_cast<double>(points.size());
}

double lambda_dyadic_ambient(const AnalyticMeasure& source, const AnalyticMeasure& target,
                             int level) {
    if (source.dim() != target.dim()) throw std::invalid_argument("dimension mismatch");
    const double side = std::ldexp(1.0, -level);
    double sum = 0;
    for (const auto& coords : target.positive_cells(level)) {
        const Rect cell = cell_rect(coords, side);
        const double q = target.rect_mass(cell);
        if (q <= 0) continue;
        const double p = source.rect_mass(cell);
        if (p <= 0)
            throw std::runtime_error("positive target mass on a zero source-mass cell");
        sum += q / p;
    }
    return sum;
}

std::pair<double, double> exponent_slope(std::span<const double> radii,
                                         std::span<const double> values) {
    if (radii.size() != values.size()) throw std::invalid_argument("length mismatch");
    if (radii.size() < 3) throw std::invalid_argument("need at least 3 radii");
    const std::size_t n = radii.size();
    std::vector<double> u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (values[i] <= 0) throw std::invalid_argument("values must be positive");
        if (radii[i] <= 0) throw std::invalid_argument("radii must be positive");
        u[i] = -std::log(radii[i]);
        v[i] = std::log(values[i]);
    }
    double mu = 0, mv = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mu += u[i];
        mv += v[i];
    }
    mu /= static_cast<double>(n);
    mv /= static_cast<double>(n);
    double suu = 0, suv = 0;
    for (std::size_t i = 0; i < n; ++i) {
        suu += (u[i] - mu) * (u[i] - mu);
        suv += (u[i] - mu) * (v[i] - mv);
    }
    if (suu == 0) throw std::invalid_argument("radii must not be constant");
    const double slope = suv / suu;
    const double intercept = mv - slope * mu;
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double resid = v[i] - (intercept + slope * u[i]);
        rss += resid * resid;
    }
    return {slope, std::sqrt(rss / static_cast<double>(n))};
}

ExponentCurve make_curve(std::vector<double> radii, std::vector<double> values) {
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (radii[i] >= radii[i - 1])
            throw std::invalid_argument("radii must be strictly decreasing");
    ExponentCurve curve;
    auto [slope, residual] = exponent_slope(radii, values);
    curve.radii = std::move(radii);
    curve.values = std::move(values);
    curve.slope = slope;
    curve.residual = residual;
    return curve;
}

void write_curve_csv(const ExponentCurve& curve, std::ostream& out) {
    out << "r,value,logr,logvalue\n";
    char buf[48];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        out << buf;
    };
    for (std::size_t i = 0; i < curve.radii.size(); ++i) {
        put(curve.radii[i]);
        out << ",";
        put(curve.values[i]);
        out << ",";
        put(std::log(curve.radii[i]));
        out << ",";
        put(std::log(curve.values[i]));
        out << "\n";
    }
}

std::vector<double> default_radius_grid(int coarsest_level, int finest_level) {
    std::vector<double> radii;
    for (int i = coarsest_level; i <= finest_level; ++i) radii.push_back(std::ldexp(1.0, -i));
    return radii;
}

} // namespace shift
