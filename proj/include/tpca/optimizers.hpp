#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpca/contractions.hpp"
#include "tpca/problem.hpp"
#include "tpca/rng.hpp"
#include "tpca/sphere.hpp"

namespace tpca {

enum class Algorithm {
    GD,           ///< gradient descent on the sphere from a uniform start
    AGD,          ///< averaged gradient descent with R replicas
    AGDAuto,      ///< AGD that also tries the averaged-Hessian eigenvector and keeps the lower-energy step
    iAGD,         ///< R -> infinity limit, Euler-integrated (k = 3)
    SiAGD,        ///< single jump along the t = 0 averaged direction, then GD
    PowerMethod,  ///< homotopy baseline: GD with an infinite step from the SiAGD landing point
};

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view s);

/// Raised when an algorithm does not support the problem (e.g. iAGD at k != 3).
class CapabilityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    Algorithm algorithm = Algorithm::iAGD;
    std::uint32_t replicas = 1;
    double learning_rate = 0.125;
    double euler_step = 0.125;
    /// Absolute threshold on |x(t+1) - x(t)|; defaults to 1e-8 sqrt(n).
    std::optional<double> stop_eps;
    std::uint64_t max_iters = 100000;
    std::uint32_t spectral_iters = 1000;
    double spectral_tol = 1e-10;
    std::uint64_t rng_seed = 0;
    /// Record (t, r, m, H/n) every `trajectory_stride` iterations; 0 disables.
    std::uint32_t trajectory_stride = 0;
    /// Detection: m_II above this value (|m_II| for even k).
    double detection_threshold = 0.6;

    double eps(std::size_t n) const;
    void validate() const;
};

enum RunFlag : std::uint32_t {
    kFlagMaxIters = 1u << 0,              ///< hit max_iters before the stopping rule
    kFlagStationary = 1u << 1,            ///< zero descent direction
    kFlagTwoCycle = 1u << 2,              ///< power iteration oscillates between two points
    kFlagSpectralNotConverged = 1u << 3,  ///< eigen-iteration ran out of iterations
    kFlagRegime1Stalled = 1u << 4,        ///< centre of mass stopped inside the sphere
};

struct TrajectoryPoint {
    double t = 0.0;
    double r = 0.0;
    double m = 0.0;
    double energy_per_site = 0.0;
};

struct RunResult {
    double m_I = 0.0;
    double m_II = 0.0;
    double energy_I = 0.0;      ///< H/n at the end of the first regime
    double energy_final = 0.0;  ///< H/n at termination
    std::uint64_t iters_regime1 = 0;
    std::uint64_t iters_regime2 = 0;
    std::vector<TrajectoryPoint> trajectory;
    bool detected = false;
    std::uint32_t flags = 0;
    /// Spectral steps taken by AGDAuto and the smallest (w(t), w(t+1)) / n
    /// between consecutive eigenvectors (1 when fewer than two were taken).
    std::uint32_t spectral_steps = 0;
    double min_spectral_alignment = 1.0;
    std::vector<double> x_final;

    bool flagged() const { return flags != 0; }
};

/// One GD step: x <- (x - eta grad H(x)) rescaled to norm sqrt(n).
/// `grad` is scratch of length n; returns H(x) at the input point.
double gd_step(const SpikedTensorProblem& problem, std::vector<double>& x, double eta, std::vector<double>& grad);

/// One AGD step at the given centre of mass. At r = 1 it is the GD step.
SphereState agd_step(const SpikedTensorProblem& problem, const SphereState& center, std::uint32_t replicas,
                     double eta, RandomStream& rng);

/// One Euler step of the infinite-R dynamics (k = 3). At r = 1 it is the GD
/// step with eta = dt.
SphereState iagd_step(const SpikedTensorProblem& problem, std::span<const double> pair_vector,
                      const SphereState& center, double dt);

/// Regime 1 landing point of SiAGD and of the power-method baseline:
/// sqrt(n) D / |D| for odd k, the sign-fixed smallest eigenvector of the
/// pair-contraction matrix for even k. Sets spectral flags on `result`.
std::vector<double> siagd_landing(const SpikedTensorProblem& problem, const RunConfig& config, RunResult& result);

RunResult run_gd(const SpikedTensorProblem& problem, const SphereState& x0, const RunConfig& config);
/// GD from a uniform start drawn from config.rng_seed.
RunResult run_gd(const SpikedTensorProblem& problem, const RunConfig& config);
RunResult run_agd(const SpikedTensorProblem& problem, const RunConfig& config);
RunResult run_agd_auto(const SpikedTensorProblem& problem, const RunConfig& config);
RunResult run_iagd(const SpikedTensorProblem& problem, const RunConfig& config);
RunResult run_siagd(const SpikedTensorProblem& problem, const RunConfig& config);
RunResult run_power_method(const SpikedTensorProblem& problem, const RunConfig& config);

/// Dispatches on config.algorithm.
RunResult run(const SpikedTensorProblem& problem, const RunConfig& config);

}  // namespace tpca
