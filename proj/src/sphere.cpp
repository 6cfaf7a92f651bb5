#include "tpca/sphere.hpp"

#include <cmath>
#include <stdexcept>

namespace tpca {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace

SphereState::SphereState(std::vector<double> x) : x_(std::move(x)) {
    r_ = radius(x_);
    if (r_ > 1.0 + 1e-12) throw std::invalid_argument("point lies outside the sphere; retract it first");
    if (r_ > 1.0) r_ = 1.0;
}

double radius(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::sqrt(dot(x, x) / static_cast<double>(x.size()));
}

Overlap overlap(const SpikedTensorProblem& problem, std::span<const double> x) {
    if (x.size() != problem.dim()) throw std::invalid_argument("overlap: length mismatch");
    return {dot(problem.signal(), x) / static_cast<double>(x.size())};
}

SphereState retract(std::vector<double> x) {
    const double r = radius(x);
    if (r > 1.0) {
        const double inv = 1.0 / r;
        for (double& xi : x) xi *= inv;
        return {std::move(x), 1.0};
    }
    return {std::move(x), r};
}

SphereState project_to_sphere(std::vector<double> x) {
    const double r = radius(x);
    if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("cannot project a zero or non-finite vector");
    const double inv = 1.0 / r;
    for (double& xi : x) xi *= inv;
    return {std::move(x), 1.0};
}

std::vector<double> uniform_on_sphere(std::size_t n, RandomStream& rng) {
    std::vector<double> u(n);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (double& ui : u) {
            ui = rng.normal();
            norm2 += ui * ui;
        }
    } while (norm2 == 0.0);
    const double scale = std::sqrt(static_cast<double>(n) / norm2);
    for (double& ui : u) ui *= scale;
    return u;
}

std::vector<double> sample_replica(const SphereState& center, RandomStream& rng) {
    const auto x = center.x();
    const std::size_t n = x.size();
    const double r = center.r();
    if (r >= 1.0) return {x.begin(), x.end()};
    std::vector<double> u(n);
    for (double& ui : u) ui = rng.normal();
    const double xx = dot(x, x);
    if (xx > 0.0) {
        const double proj = dot(u, x) / xx;
        for (std::size_t i = 0; i < n; ++i) u[i] -= proj * x[i];
    }
    const double uu = dot(u, u);
    const double scale = std::sqrt((1.0 - r * r) * static_cast<double>(n) / uu);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + scale * u[i];
    return out;
}

}  // namespace tpca
