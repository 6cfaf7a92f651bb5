#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tpca/problem.hpp"
#include "tpca/rng.hpp"
#include "tpca/sphere.hpp"

using namespace tpca;

namespace {
double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
}  // namespace

TEST(Sphere, RadiusIsNormOverSqrtN) {
    const std::vector<double> x{3.0, 4.0, 0.0, 0.0};
    EXPECT_DOUBLE_EQ(radius(x), 2.5);
}

TEST(Sphere, RetractPassesInteriorPoints) {
    const auto s = retract({0.5, 0.5, 0.0, 0.0});
    EXPECT_DOUBLE_EQ(s.r(), radius(std::vector<double>{0.5, 0.5, 0.0, 0.0}));
    EXPECT_FALSE(s.on_sphere());
    EXPECT_EQ(s.x()[0], 0.5);
}

TEST(Sphere, RetractRescalesOutsidePoints) {
    const auto s = retract({3.0, 4.0, 0.0, 0.0});
    EXPECT_TRUE(s.on_sphere());
    EXPECT_NEAR(dot(s.x(), s.x()), 4.0, 1e-14);
    EXPECT_NEAR(s.x()[0] / s.x()[1], 0.75, 1e-15);
}

TEST(Sphere, ProjectAlwaysRescales) {
    const auto s = project_to_sphere({0.1, 0.0, 0.0, 0.0});
    EXPECT_TRUE(s.on_sphere());
    EXPECT_NEAR(s.x()[0], 2.0, 1e-15);
    EXPECT_THROW(project_to_sphere({0.0, 0.0}), std::invalid_argument);
}

TEST(Sphere, StateRejectsOutsidePoints) { EXPECT_THROW(SphereState({3.0, 4.0}), std::invalid_argument); }

TEST(Sphere, OverlapOfSignalIsOne) {
    const auto p = generate(3, 30, 1.0, 2);
    const std::vector<double> v(p.signal().begin(), p.signal().end());
    EXPECT_NEAR(overlap(p, v).m, 1.0, 1e-14);
    std::vector<double> neg = v;
    for (double& x : neg) x = -x;
    EXPECT_NEAR(overlap(p, neg).m, -1.0, 1e-14);
}

TEST(Sphere, UniformPointsAreIsotropic) {
    const std::size_t n = 5;
    RandomStream rng(3);
    const int draws = 40000;
    std::vector<double> second(n * n, 0.0);
    for (int s = 0; s < draws; ++s) {
        const auto x = uniform_on_sphere(n, rng);
        ASSERT_NEAR(radius(x), 1.0, 1e-12);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) second[i * n + j] += x[i] * x[j] / draws;
        }
    }
    // E[x x^T] = I for |x| = sqrt(n).
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(second[i * n + j], i == j ? 1.0 : 0.0, 0.03);
    }
}

TEST(Sphere, ReplicasLieOnSphereAndAverageToCentre) {
    const std::size_t n = 6;
    RandomStream rng(4, 2);
    std::vector<double> x{0.4, -0.3, 0.2, 0.0, 0.5, -0.1};
    const SphereState c(x);
    const int draws = 40000;
    std::vector<double> mean(n, 0.0);
    for (int s = 0; s < draws; ++s) {
        const auto xa = sample_replica(c, rng);
        ASSERT_NEAR(radius(xa), 1.0, 1e-12);
        std::vector<double> u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = xa[i] - x[i];
        ASSERT_NEAR(dot(u, x), 0.0, 1e-12);
        for (std::size_t i = 0; i < n; ++i) mean[i] += xa[i] / draws;
    }
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(mean[i], x[i], 0.03);
}

TEST(Sphere, ReplicaOfPointOnSphereIsItself) {
    RandomStream rng(1);
    const auto c = project_to_sphere({1.0, 2.0, 3.0});
    const auto xa = sample_replica(c, rng);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(xa[i], c.x()[i]);
}
