#pragma once

#include <span>
#include <vector>

#include "tpca/problem.hpp"
#include "tpca/rng.hpp"

namespace tpca {

/// Centre-of-mass position inside or on the sphere of radius sqrt(n), with
/// its cached radius fraction r = |x| / sqrt(n) in [0, 1].
class SphereState {
public:
    SphereState() = default;
    /// Takes x as is; throws if |x| exceeds sqrt(n) by more than 1e-12
    /// relative. Use retract() for arbitrary points.
    explicit SphereState(std::vector<double> x);

    std::span<const double> x() const { return x_; }
    double r() const { return r_; }
    std::size_t dim() const { return x_.size(); }
    bool on_sphere() const { return r_ == 1.0; }

    std::vector<double> release() && { return std::move(x_); }

private:
    friend SphereState retract(std::vector<double> x);
    friend SphereState project_to_sphere(std::vector<double> x);
    SphereState(std::vector<double> x, double r) : x_(std::move(x)), r_(r) {}

    std::vector<double> x_;
    double r_ = 0.0;
};

/// m = (v, x) / n.
struct Overlap {
    double m = 0.0;
};

double radius(std::span<const double> x);
Overlap overlap(const SpikedTensorProblem& problem, std::span<const double> x);

/// Rescales to norm sqrt(n) when |x| > sqrt(n); otherwise passes through.
SphereState retract(std::vector<double> x);

/// Always rescales to norm sqrt(n) (the GD retraction). x must be non-zero.
SphereState project_to_sphere(std::vector<double> x);

/// Uniform point on the sphere of radius sqrt(n).
std::vector<double> uniform_on_sphere(std::size_t n, RandomStream& rng);

/// Replica x_cm + sqrt(1 - r^2) u with u isotropic, orthogonal to x_cm and of
/// norm sqrt(n). Returns x_cm itself when r = 1.
std::vector<double> sample_replica(const SphereState& center, RandomStream& rng);

}  // namespace tpca
