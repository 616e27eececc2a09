#include "shift/measures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace shift {

Rect Rect::cube(std::size_t dim) {
    Rect r;
    r.lo.assign(dim, 0.0);
    r.hi.assign(dim, 1.0);
    return r;
}

Rect Rect::ball(const std::vector<double>& center, double radius) {
    Rect r;
    r.lo.resize(center.size());
    r.hi.resize(center.size());
    for (std::size_t j = 0; j < center.size(); ++j) {
        r.lo[j] = center[j] - radius;
        r.hi[j] = center[j] + radius;
    }
    return r;
}

Rect Rect::clipped_to_cube() const {
    Rect r = *this;
    for (std::size_t j = 0; j < r.lo.size(); ++j) {
        r.lo[j] = std::max(r.lo[j], 0.0);
        r.hi[j] = std::min(r.hi[j], 1.0);
    }
    return r;
}

bool Rect::empty() const {
    for (std::size_t j = 0; j < lo.size(); ++j)
        if (hi[j] <= lo[j]) return true;
    return false;
}

double Rect::volume() const {
    double v = 1.0;
    for (std::size_t j = 0; j < lo.size(); ++j) v *= std::max(0.0, hi[j] - lo[j]);
    return v;
}

namespace {

// Gauss-Legendre nodes on [-1,1], computed once by Newton iteration on the
// Legendre polynomial.
template <int N>
struct GaussLegendre {
    std::array<double, N> node, weight;
    GaussLegendre() {
        for (int i = 0; i < N; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (N + 0.5));
            double p0, p1;
            for (int it = 0; it < 100; ++it) {
                p0 = 1.0;
                p1 = x;
                for (int k = 2; k <= N; ++k) {
                    const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = N * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            p0 = 1.0;
            p1 = x;
            for (int k = 2; k <= N; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = N * (x * p1 - p0) / (x * x - 1.0);
            node[i] = x;
            weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

double integrate(double a, double b, const auto& f) {
    static const GaussLegendre<32> gl;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double sum = 0.0;
    for (int i = 0; i < 32; ++i) sum += gl.weight[i] * f(mid + half * gl.node[i]);
    return sum * half;
}

// 16x16 tensor rule; used only where the integrand is smooth on the rectangle
double integrate_rect_16(double ax, double bx, double ay, double by, const auto& f) {
    static const GaussLegendre<16> gl;
    const double mx = 0.5 * (ax + bx), hx = 0.5 * (bx - ax);
    const double my = 0.5 * (ay + by), hy = 0.5 * (by - ay);
    double sum = 0.0;
    for (int i = 0; i < 16; ++i) {
        const double u = mx + hx * gl.node[i];
        double row = 0.0;
        for (int j = 0; j < 16; ++j) row += gl.weight[j] * f(u, my + hy * gl.node[j]);
        sum += gl.weight[i] * row;
    }
    return sum * hx * hy;
}

// integral of (1 + u^2)^(nu/2) over [0, bound]; the tail beyond u = 1 runs in
// log coordinates so large aspect ratios stay accurate
double unit_hyperbola_integral(double bound, double nu) {
    const double head = integrate(0.0, std::min(bound, 1.0), [&](double u) {
        return std::pow(1.0 + u * u, 0.5 * nu);
    });
    if (bound <= 1.0) return head;
    const double tail = integrate(0.0, std::log(bound), [&](double s) {
        const double u = std::exp(s);
        return std::pow(1.0 + u * u, 0.5 * nu) * u;
    });
    return head + tail;
}

// integral of r^nu over the triangle (0,0), (w,0), (w,h); polar coordinates
// with tan(theta) substituted out
double power_triangle_integral(double w, double h, double nu) {
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return std::pow(w, nu + 2.0) / (nu + 2.0) * unit_hyperbola_integral(h / w, nu);
}

} // namespace

double power_corner_integral(double w, double h, double nu) {
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return power_triangle_integral(w, h, nu) + power_triangle_integral(h, w, nu);
}

double power_rect_integral(double ax, double bx, double ay, double by, double nu) {
    if (bx <= ax || by <= ay) return 0.0;
    // Away from the origin the integrand is smooth on the rectangle, and the
    // corner decomposition would cancel badly; integrate directly there.
    const double offset = std::sqrt(ax * ax + ay * ay);
    if (offset >= 0.5 * std::max(bx - ax, by - ay)) {
        return integrate_rect_16(ax, bx, ay, by,
                                 [&](double u, double v) { return std::pow(u * u + v * v, 0.5 * nu); });
    }
    return power_corner_integral(bx, by, nu) - power_corner_integral(ax, by, nu) -
           power_corner_integral(bx, ay, nu) + power_corner_integral(ax, ay, nu);
}

std::vector<std::vector<std::uint32_t>> AnalyticMeasure::positive_cells(int level) const {
    const std::size_t d = dim();
    if (static_cast<std::size_t>(level) * d > 24)
        throw std::invalid_argument("level too deep to enumerate the full partition");
    const std::uint32_t per_axis = 1u << level;
    std::vector<std::vector<std::uint32_t>> cells;
    std::vector<std::uint32_t> cur(d, 0);
    while (true) {
        cells.push_back(cur);
        std::size_t j = 0;
        for (; j < d; ++j) {
            if (cur[j] + 1 < per_axis) {
                ++cur[j];
                break;
            }
            cur[j] = 0;
        }
        if (j == d) break;
    }
    return cells;
}

double UniformMeasure::rect_mass(const Rect& rect) const {
    return rect.clipped_to_cube().volume();
}

std::vector<double> UniformMeasure::sample(Rng& rng) const {
    std::vector<double> x(dim_);
    for (auto& v : x) v = rng.u01();
    return x;
}

PowerDistanceMeasure::PowerDistanceMeasure(std::size_t dim, std::size_t singular_dim, double nu)
    : dim_(dim), k_(singular_dim), nu_(nu) {
    if (k_ >= dim_) throw std::invalid_argument("singular dimension must be < dim");
    if (nu_ < 0) throw std::invalid_argument("nu must be >= 0");
    // sampling works in any dimension; rectangle masses only for d - k <= 2
    norm_ = nu_ == 0.0 || dim_ - k_ <= 2 ? tail_integral(Rect::cube(dim_)) : 0.0;
}

double PowerDistanceMeasure::tail_integral(const Rect& rect) const {
    const std::size_t tail = dim_ - k_;
    if (nu_ > 0 && tail > 2)
        throw std::invalid_argument("closed-form masses need d - k <= 2");
    if (nu_ == 0.0) {
        double v = 1.0;
        for (std::size_t j = k_; j < dim_; ++j) v *= std::max(0.0, rect.hi[j] - rect.lo[j]);
        return v;
    }
    if (tail == 1) {
        const double a = std::max(0.0, rect.lo[k_]), b = rect.hi[k_];
        if (b <= a) return 0.0;
        return (std::pow(b, nu_ + 1.0) - std::pow(a, nu_ + 1.0)) / (nu_ + 1.0);
    }
    return power_rect_integral(std::max(0.0, rect.lo[k_]), rect.hi[k_],
                               std::max(0.0, rect.lo[k_ + 1]), rect.hi[k_ + 1], nu_);
}

double PowerDistanceMeasure::rect_mass(const Rect& rect) const {
    const Rect r = rect.clipped_to_cube();
    if (r.empty()) return 0.0;
    double head = 1.0;
    for (std::size_t j = 0; j < k_; ++j) head *= r.hi[j] - r.lo[j];
    return head * tail_integral(r) / norm_;
}

std::vector<double> PowerDistanceMeasure::sample(Rng& rng) const {
    // rejection against the uniform proposal; bound = max dist(x, A_k)^nu
    const double max_dist = std::sqrt(static_cast<double>(dim_ - k_));
    std::vector<double> x(dim_);
    while (true) {
        for (auto& v : x) v = rng.u01();
        if (nu_ == 0.0) return x;
        double d2 = 0.0;
        for (std::size_t j = k_; j < dim_; ++j) d2 += x[j] * x[j];
        const double accept = std::pow(std::sqrt(d2) / max_dist, nu_);
        if (rng.u01() < accept) return x;
    }
}

double DiracMeasure::rect_mass(const Rect& rect) const {
    for (std::size_t j = 0; j < x0_.size(); ++j)
        if (x0_[j] < rect.lo[j] || x0_[j] > rect.hi[j]) return 0.0;
    return 1.0;
}

std::vector<std::vector<std::uint32_t>> DiracMeasure::positive_cells(int level) const {
    std::vector<std::uint32_t> c(x0_.size());
    const std::uint32_t per_axis = 1u << level;
    for (std::size_t j = 0; j < x0_.size(); ++j) {
        double v = std::floor(x0_[j] * per_axis);
        if (v > per_axis - 1) v = per_axis - 1;
        c[j] = static_cast<std::uint32_t>(v);
    }
    return {c};
}

namespace {

// Box geometry, in exact dyadic units of 2^-24.
constexpr std::int64_t kUnit = 1 << 24;

struct PathBox {
    double q_density;       // common density of Q on B_i + B'_i
    double bx0, bx1, by0, by1;    // B_i
    double cx, cy, side;          // B'_i: corner (cx,cy), side length
    std::int64_t ibx0, ibx1, iby0, iby1;  // integer bounds of B_i
    std::int64_t icx0, icx1, icy0, icy1;  // integer bounds of B'_i
};

const std::vector<PathBox>& path_boxes() {
    static const std::vector<PathBox> boxes = [] {
        std::vector<PathBox> out;
        for (int i = 1; i <= PathologicalPair::kBoxCount; ++i) {
            PathBox b;
            const double big = std::ldexp(1.0, -i);        // 2^-i
            const double small = std::ldexp(1.0, -2 * i);  // 4^-i
            b.q_density = 3.0 / (1.0 + small);             // 3*4^-i / (4^-i + 4^-2i)
            b.bx0 = 1.0 - 2.0 * big;
            b.bx1 = 1.0 - big;
            b.by0 = 0.0;
            b.by1 = big;
            b.cx = 1.0 - big;
            b.cy = big;
            b.side = small;
            const std::int64_t ibig = kUnit >> i;
            const std::int64_t ismall = i * 2 <= 24 ? (kUnit >> (2 * i)) : 0;
            b.ibx0 = kUnit - 2 * ibig;
            b.ibx1 = kUnit - ibig;
            b.iby0 = 0;
            b.iby1 = ibig;
            b.icx0 = kUnit - ibig;
            b.icx1 = b.icx0 + ismall;
            b.icy0 = ibig;
            b.icy1 = b.icy0 + ismall;
            out.push_back(b);
        }
        return out;
    }();
    return boxes;
}

double overlap(double lo0, double hi0, double lo1, double hi1) {
    return std::max(0.0, std::min(hi0, hi1) - std::max(lo0, lo1));
}

// Cells of the regular level-l grid overlapping [a,b) x [c,d) in 2^-24 units.
void add_cells(std::vector<std::vector<std::uint32_t>>& out, int level, std::int64_t ax0,
               std::int64_t ax1, std::int64_t ay0, std::int64_t ay1) {
    if (ax1 <= ax0 || ay1 <= ay0) return;
    const int shift_bits = 24 - level;
    const std::int64_t x0 = ax0 >> shift_bits;
    const std::int64_t x1 = (ax1 - 1) >> shift_bits;
    const std::int64_t y0 = ay0 >> shift_bits;
    const std::int64_t y1 = (ay1 - 1) >> shift_bits;
    for (std::int64_t x = x0; x <= x1; ++x)
        for (std::int64_t y = y0; y <= y1; ++y)
            out.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)});
}

std::vector<std::vector<std::uint32_t>> path_positive_cells(int level) {
    if (level > 20) throw std::invalid_argument("level too deep for the pathological support");
    std::vector<std::vector<std::uint32_t>> cells;
    for (const auto& b : path_boxes()) {
        add_cells(cells, level, b.ibx0, b.ibx1, b.iby0, b.iby1);
        if (b.icx1 > b.icx0) add_cells(cells, level, b.icx0, b.icx1, b.icy0, b.icy1);
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return cells;
}

} // namespace

double PathologicalPair::Target::rect_mass(const Rect& rect) const {
    const Rect r = rect.clipped_to_cube();
    if (r.empty()) return 0.0;
    double mass = 0.0;
    for (const auto& b : path_boxes()) {
        const double in_b = overlap(r.lo[0], r.hi[0], b.bx0, b.bx1) *
                            overlap(r.lo[1], r.hi[1], b.by0, b.by1);
        const double in_c = overlap(r.lo[0], r.hi[0], b.cx, b.cx + b.side) *
                            overlap(r.lo[1], r.hi[1], b.cy, b.cy + b.side);
        mass += b.q_density * (in_b + in_c);
    }
    return mass;
}

std::vector<double> PathologicalPair::Target::sample(Rng& rng) const {
    // box index i carries mass 3 * 4^-i
    const double u = rng.u01() * (1.0 - std::ldexp(1.0, -2 * kBoxCount));
    double acc = 0.0;
    int pick = kBoxCount;
    for (int i = 1; i <= kBoxCount; ++i) {
        acc += 3.0 * std::ldexp(1.0, -2 * i);
        if (u < acc) {
            pick = i;
            break;
        }
    }
    const auto& b = path_boxes()[pick - 1];
    const double area_b = (b.bx1 - b.bx0) * (b.by1 - b.by0);
    const double area_c = b.side * b.side;
    if (rng.u01() * (area_b + area_c) < area_b)
        return {b.bx0 + rng.u01() * (b.bx1 - b.bx0), b.by0 + rng.u01() * (b.by1 - b.by0)};
    return {b.cx + rng.u01() * b.side, b.cy + rng.u01() * b.side};
}

std::vector<std::vector<std::uint32_t>> PathologicalPair::Target::positive_cells(int level) const {
    return path_positive_cells(level);
}

PathologicalPair::Source::Source(double nu) : nu_(nu) {
    if (nu_ < 0) throw std::invalid_argument("nu must be >= 0");
    corner_norm_ = power_corner_integral(1.0, 1.0, nu_);
    double assigned = 0.0;
    for (const auto& b : path_boxes()) {
        assigned += b.q_density * (b.bx1 - b.bx0) * (b.by1 - b.by0);
        assigned += b.q_density * corner_norm_ * std::pow(b.side, nu_ + 2.0);
    }
    atom_mass_ = 1.0 - assigned;
}

double PathologicalPair::Source::rect_mass(const Rect& rect) const {
    const Rect r = rect.clipped_to_cube();
    if (r.empty()) return 0.0;
    double mass = 0.0;
    for (const auto& b : path_boxes()) {
        mass += b.q_density * overlap(r.lo[0], r.hi[0], b.bx0, b.bx1) *
                overlap(r.lo[1], r.hi[1], b.by0, b.by1);
        // density q_i * ||x - x_i||^nu on B'_i
        const double ax = std::max(r.lo[0], b.cx) - b.cx;
        const double bx = std::min(r.hi[0], b.cx + b.side) - b.cx;
        const double ay = std::max(r.lo[1], b.cy) - b.cy;
        const double by = std::min(r.hi[1], b.cy + b.side) - b.cy;
        if (bx > ax && by > ay) mass += b.q_density * power_rect_integral(ax, bx, ay, by, nu_);
    }
    if (r.lo[0] <= 0.0 && r.hi[1] >= 1.0 && r.lo[1] <= 1.0 && r.hi[0] >= 0.0)
        mass += atom_mass_;  // atom at (0,1)
    return mass;
}

std::vector<double> PathologicalPair::Source::sample(Rng& rng) const {
    std::vector<double> weights;
    const auto& boxes = path_boxes();
    double total = atom_mass_;
    weights.push_back(atom_mass_);
    for (const auto& b : boxes) {
        const double wb = b.q_density * (b.bx1 - b.bx0) * (b.by1 - b.by0);
        const double wc = b.q_density * corner_norm_ * std::pow(b.side, nu_ + 2.0);
        weights.push_back(wb);
        weights.push_back(wc);
        total += wb + wc;
    }
    const double u = rng.u01() * total;
    double acc = 0.0;
    std::size_t pick = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) {
            pick = i;
            break;
        }
    }
    if (pick == 0) return {0.0, 1.0};
    const auto& b = boxes[(pick - 1) / 2];
    if (pick % 2 == 1)  // B_i, uniform
        return {b.bx0 + rng.u01() * (b.bx1 - b.bx0), b.by0 + rng.u01() * (b.by1 - b.by0)};
    // B'_i: rejection against uniform with bound (sqrt(2) * side)^nu
    while (true) {
        const double ux = rng.u01() * b.side, uy = rng.u01() * b.side;
        const double accept = std::pow(std::sqrt(ux * ux + uy * uy) /
                                           (std::sqrt(2.0) * b.side),
                                       nu_);
        if (rng.u01() < accept) return {b.cx + ux, b.cy + uy};
    }
}

std::vector<std::vector<std::uint32_t>> PathologicalPair::Source::positive_cells(int level) const {
    auto cells = path_positive_cells(level);
    // the atom's cell
    DiracMeasure atom({0.0, 1.0});
    auto extra = atom.positive_cells(level);
    cells.insert(cells.end(), extra.begin(), extra.end());
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return cells;
}

} // namespace shift
