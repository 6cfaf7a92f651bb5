#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "naive.hpp"
#include "tpca/contractions.hpp"
#include "tpca/rng.hpp"
#include "tpca/sphere.hpp"

using namespace tpca;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

double max_abs(std::span<const double> a) {
    double d = 0.0;
    for (double v : a) d = std::max(d, std::abs(v));
    return d;
}

std::vector<double> random_point(std::size_t n, std::uint64_t seed) {
    RandomStream rng(seed, 99);
    return uniform_on_sphere(n, rng);
}

}  // namespace

class OracleTest : public ::testing::TestWithParam<int> {};

TEST_P(OracleTest, EnergyAndGradientMatchFullLoops) {
    const int k = GetParam();
    for (std::size_t n = static_cast<std::size_t>(k); n <= 8; ++n) {
        for (Precision prec : {Precision::Float64, Precision::Float32}) {
            GenerateOptions opt;
            opt.precision = prec;
            const auto p = generate(k, n, 1.3, 10 * n + k, opt);
            const auto x = random_point(n, n);
            const double h = naive::energy(p, x);
            EXPECT_NEAR(energy(p, x), h, 1e-12 * std::abs(h)) << "k=" << k << " n=" << n;
            const auto g_ref = naive::gradient(p, x);
            const auto g = gradient(p, x);
            EXPECT_LE(max_abs_diff(g, g_ref), 1e-12 * max_abs(g_ref));
            std::vector<double> g2(n);
            EXPECT_NEAR(energy_and_gradient(p, x, g2), h, 1e-12 * std::abs(h));
            EXPECT_LE(max_abs_diff(g2, g_ref), 1e-12 * max_abs(g_ref));
        }
    }
}

TEST_P(OracleTest, PairContractionsMatchFullLoops) {
    const int k = GetParam();
    for (std::size_t n = static_cast<std::size_t>(k); n <= 8; ++n) {
        GenerateOptions opt;
        opt.convention = n % 2 ? NoiseConvention::Uniform : NoiseConvention::Symmetrized;
        const auto p = generate(k, n, 0.7, 500 + n, opt);
        if (k % 2 == 1) {
            const auto ref = naive::pair_vector(p);
            EXPECT_LE(max_abs_diff(pair_contraction_vector(p), ref), 1e-12 * max_abs(ref));
            EXPECT_THROW(pair_contraction_matrix(p), std::invalid_argument);
        } else {
            const auto ref = naive::pair_matrix(p);
            EXPECT_LE(max_abs_diff(pair_contraction_matrix(p).data(), ref), 1e-12 * max_abs(ref));
            EXPECT_THROW(pair_contraction_vector(p), std::invalid_argument);
        }
    }
}

TEST_P(OracleTest, GradientMatchesFiniteDifferences) {
    const int k = GetParam();
    const std::size_t n = 10;
    const auto p = generate(k, n, 2.0, 42 + k);
    auto x = random_point(n, 5);
    const auto g = gradient(p, x);
    const double h = 1e-5;
    for (std::size_t j = 0; j < n; ++j) {
        const double x0 = x[j];
        x[j] = x0 + h;
        const double ep = energy(p, x);
        x[j] = x0 - h;
        const double em = energy(p, x);
        x[j] = x0;
        EXPECT_NEAR((ep - em) / (2 * h), g[j], 1e-6);
    }
}

TEST_P(OracleTest, HessianMatchesGradientDifferences) {
    const int k = GetParam();
    const std::size_t n = 7;
    const auto p = generate(k, n, 1.0, 7 + k);
    auto x = random_point(n, 8);
    const auto hs = hessian(p, x);
    const double h = 1e-5;
    for (std::size_t j = 0; j < n; ++j) {
        const double x0 = x[j];
        x[j] = x0 + h;
        const auto gp = gradient(p, x);
        x[j] = x0 - h;
        const auto gm = gradient(p, x);
        x[j] = x0;
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR((gp[i] - gm[i]) / (2 * h), hs(i, j), 1e-6);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(hs(i, j), hs(j, i));
    }
}

INSTANTIATE_TEST_SUITE_P(Orders, OracleTest, ::testing::Values(3, 4, 5));

TEST(GradientSum, EqualsSumOfGradients) {
    for (int k : {3, 4}) {
        const std::size_t n = 17;
        const auto p = generate(k, n, 1.0, 3);
        const std::size_t count = 5;
        std::vector<double> points;
        std::vector<double> expected(n, 0.0);
        for (std::size_t a = 0; a < count; ++a) {
            const auto x = random_point(n, 100 + a);
            points.insert(points.end(), x.begin(), x.end());
            const auto g = gradient(p, x);
            for (std::size_t i = 0; i < n; ++i) expected[i] += g[i];
        }
        std::vector<double> sum(n);
        gradient_sum(p, points, count, sum);
        EXPECT_LE(max_abs_diff(sum, expected), 1e-12 * max_abs(expected)) << "k=" << k;
    }
}

TEST(PairVector, VarianceMatchesNoiseConvention) {
    // Pure noise: D_i = n^-1 (sum_{j != i} S_ijj + S_iii).
    const std::size_t n = 100;
    for (auto conv : {NoiseConvention::Uniform, NoiseConvention::Symmetrized}) {
        GenerateOptions opt;
        opt.convention = conv;
        opt.signal = std::vector<double>(n, 1.0);
        double s2 = 0.0;
        double count = 0.0;
        for (int inst = 0; inst < 40; ++inst) {
            const auto d = pair_contraction_vector(generate(3, n, 0.0, 900 + inst, opt));
            for (double v : d) s2 += v * v;
            count += static_cast<double>(n);
        }
        const double nd = static_cast<double>(n);
        const double expected = conv == NoiseConvention::Uniform ? nd / 6.0 / (nd * nd)
                                                                  : ((nd - 1) / 3.0 + 1.0) / (nd * nd);
        EXPECT_NEAR(s2 / count, expected, 5 * expected * std::sqrt(2.0 / count)) << to_string(conv);
    }
}

TEST(AveragedGradient, LimitsOfPairedForm) {
    const std::size_t n = 12;
    const auto p = generate(3, n, 1.0, 4);
    const std::vector<double> origin(n, 0.0);
    const auto d = pair_contraction_vector(p);
    EXPECT_LE(max_abs_diff(averaged_gradient_k3(p, origin, 0.0), d), 1e-15);
    const auto x = random_point(n, 3);
    auto g = gradient(p, x);
    for (double& v : g) v = -v;
    EXPECT_LE(max_abs_diff(averaged_gradient_k3(p, x, 1.0), g), 1e-14);
}

TEST(AveragedGradient, ExactModeMatchesMonteCarlo) {
    // Replicas x_cm + sqrt(1 - r^2) u drawn by sample_replica; the mean of
    // -grad H over many draws converges to the Exact expectation.
    const std::size_t n = 8;
    const auto p = generate(3, n, 0.5, 21);
    RandomStream rng(5, 1);
    auto x = random_point(n, 2);
    const double r = 0.6;
    for (double& v : x) v *= r;
    const SphereState center(x);
    const int draws = 100000;
    std::vector<double> mean(n, 0.0);
    std::vector<double> mean_sq(n, 0.0);
    for (int s = 0; s < draws; ++s) {
        const auto g = gradient(p, sample_replica(center, rng));
        for (std::size_t i = 0; i < n; ++i) {
            mean[i] -= g[i] / draws;
            mean_sq[i] += g[i] * g[i] / draws;
        }
    }
    const auto exact = averaged_gradient_k3(p, x, r, ReplicaAverage::Exact);
    for (std::size_t i = 0; i < n; ++i) {
        const double se = std::sqrt((mean_sq[i] - mean[i] * mean[i]) / draws);
        EXPECT_NEAR(mean[i], exact[i], 5 * se) << "i=" << i;
    }
}

TEST(AveragedGradient, ExactAndPairedAgreeToLeadingOrder) {
    const std::size_t n = 200;
    const auto p = generate(3, n, 1.0, 8);
    auto x = random_point(n, 4);
    for (double& v : x) v *= 0.5;
    const auto a = averaged_gradient_k3(p, x, 0.5, ReplicaAverage::Paired);
    const auto b = averaged_gradient_k3(p, x, 0.5, ReplicaAverage::Exact);
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        norm += a[i] * a[i];
    }
    EXPECT_LT(std::sqrt(diff / norm), 0.2);
}

TEST(SymmetricMatrix, Multiply) {
    SymmetricMatrix m(2);
    m(0, 0) = 1;
    m(0, 1) = m(1, 0) = 2;
    m(1, 1) = 3;
    std::vector<double> x{1, -1};
    std::vector<double> y(2);
    m.multiply(x, y);
    EXPECT_EQ(y[0], -1);
    EXPECT_EQ(y[1], -1);
}
