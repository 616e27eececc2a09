#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "shift/rng.hpp"

namespace shift {

// Closed axis-aligned rectangle in [0,1]^d (empty when any hi < lo).
struct Rect {
    std::vector<double> lo, hi;

    static Rect cube(std::size_t dim);
    static Rect ball(const std::vector<double>& center, double radius);  // l-infinity ball
    Rect clipped_to_cube() const;
    bool empty() const;
    double volume() const;
};

// integral of ||u||_2^nu over [ax,bx] x [ay,by] with 0 <= ax <= bx, 0 <= ay <= by
double power_rect_integral(double ax, double bx, double ay, double by, double nu);
// corner case [0,w] x [0,h]
double power_corner_integral(double w, double h, double nu);

// A probability measure on [0,1]^d with closed-form rectangle masses, used by
// the exponent estimators and the synthetic samplers.
class AnalyticMeasure {
public:
    virtual ~AnalyticMeasure() = default;
    virtual std::size_t dim() const = 0;
    virtual double rect_mass(const Rect& rect) const = 0;
    virtual std::vector<double> sample(Rng& rng) const = 0;

    // Cells of the regular level-l partition carrying positive mass. The
    // default enumerates every cell; sparse-support measures override.
    virtual std::vector<std::vector<std::uint32_t>> positive_cells(int level) const;
};

// Uniform on [0,1]^d.
class UniformMeasure : public AnalyticMeasure {
public:
    explicit UniformMeasure(std::size_t dim) : dim_(dim) {}
    std::size_t dim() const override { return dim_; }
    double rect_mass(const Rect& rect) const override;
    std::vector<double> sample(Rng& rng) const override;

private:
    std::size_t dim_;
};

// Density proportional to dist(x, A_k)^nu with A_k = {x : x_{k+1..d} = 0} and
// Euclidean distance; closed-form masses require d - k <= 2 (nu = 0 is uniform
// in any dimension).
class PowerDistanceMeasure : public AnalyticMeasure {
public:
    PowerDistanceMeasure(std::size_t dim, std::size_t singular_dim, double nu);
    std::size_t dim() const override { return dim_; }
    double rect_mass(const Rect& rect) const override;
    std::vector<double> sample(Rng& rng) const override;

private:
    double tail_integral(const Rect& rect) const;  // over the d-k trailing axes
    std::size_t dim_, k_;
    double nu_;
    double norm_;  // tail integral over the full cube
};

// Point mass at x0.
class DiracMeasure : public AnalyticMeasure {
public:
    explicit DiracMeasure(std::vector<double> x0) : x0_(std::move(x0)) {}
    std::size_t dim() const override { return x0_.size(); }
    double rect_mass(const Rect& rect) const override;
    std::vector<double> sample(Rng&) const override { return x0_; }
    std::vector<std::vector<std::uint32_t>> positive_cells(int level) const override;

private:
    std::vector<double> x0_;
};

// The non-doubling pair on [0,1]^2 built from the box chain B_i (side 2^-i,
// top-right corner at x_i = (1 - 2^-i, 2^-i)) and B'_i (side 4^-i, bottom-left
// corner at x_i). Q spreads mass 3 * 4^-i uniformly over B_i + B'_i. P matches
// Q on B_i, has density q_i * ||x - x_i||^nu on B'_i, and parks the residual
// mass in an atom at (0,1). The chain is truncated at i = 12 (remaining Q mass
// ~6e-8 is ignored).
class PathologicalPair {
public:
    static constexpr int kBoxCount = 12;

    class Target : public AnalyticMeasure {
    public:
        std::size_t dim() const override { return 2; }
        double rect_mass(const Rect& rect) const override;
        std::vector<double> sample(Rng& rng) const override;
        std::vector<std::vector<std::uint32_t>> positive_cells(int level) const override;
    };

    class Source : public AnalyticMeasure {
    public:
        explicit Source(double nu);
        std::size_t dim() const override { return 2; }
        double rect_mass(const Rect& rect) const override;
        std::vector<double> sample(Rng& rng) const override;
        std::vector<std::vector<std::uint32_t>> positive_cells(int level) const override;
        double atom_mass() const { return atom_mass_; }

    private:
        double nu_;
        double corner_norm_;  // integral of ||u||^nu over the unit square
        double atom_mass_;
    };
};

} // namespace shift
