#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpca/optimizers.hpp"
#include "tpca/problem.hpp"

namespace tpca {

/// Malformed or inconsistent sweep configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LambdaScale {
    Absolute,  ///< grid values are lambda itself
    Critical,  ///< grid values multiply n^((k-2)/4)
};

struct SweepSpec {
    int k = 3;
    std::vector<std::size_t> n;
    std::vector<double> lambda;
    LambdaScale lambda_scale = LambdaScale::Absolute;
    std::vector<Algorithm> algorithms = {Algorithm::iAGD};
    /// Replica counts for AGD and AGD-auto; other algorithms run once per group.
    std::vector<std::uint32_t> replicas = {1};

    /// Samples per cell: `samples` when set, else ceil(sample_budget / n).
    std::optional<std::uint64_t> samples;
    double sample_budget = 1.2e4;
    /// Sample indices run are [first_sample, first_sample + samples_for(n)),
    /// so a sweep can be split into chunks with identical per-sample seeds.
    std::uint64_t first_sample = 0;

    std::uint64_t base_seed = 1;
    bool record_trajectories = false;
    std::uint32_t trajectory_stride = 1;

    double learning_rate = 0.125;
    double euler_step = 0.125;
    /// Stopping threshold in units of sqrt(n).
    double stop_eps_rel = 1e-8;
    std::uint64_t max_iters = 100000;
    std::uint32_t spectral_iters = 1000;
    double spectral_tol = 1e-10;
    double detection_threshold = 0.6;

    Precision precision = Precision::Float64;
    NoiseConvention convention = NoiseConvention::Symmetrized;
    unsigned workers = 1;
    /// 0 disables the check.
    std::uint64_t memory_budget_bytes = 0;

    std::uint64_t samples_for(std::size_t n) const;
    double lambda_value(std::size_t n, std::size_t grid_index) const;
    RunConfig run_config(Algorithm algorithm, std::uint32_t replicas, std::size_t n, std::uint64_t rng_seed) const;
    /// Throws ConfigError.
    void validate() const;
};

/// Seed of the problem shared by every algorithm of group `group`, sample `sample`.
std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t group, std::uint64_t sample);

/// Peak packed-storage bytes a sweep holds at once.
std::uint64_t sweep_memory_bytes(const SweepSpec& spec);

struct SampleRecord {
    std::size_t n = 0;
    double lambda = 0.0;
    Algorithm algorithm = Algorithm::iAGD;
    /// 0 encodes R = infinity (iAGD, SiAGD).
    std::uint32_t replicas = 1;
    std::uint64_t group = 0;
    std::uint64_t sample = 0;
    std::uint64_t seed = 0;
    double m_I = 0.0;
    double m_II = 0.0;
    double energy_I = 0.0;
    double energy_final = 0.0;
    std::uint64_t iters_regime1 = 0;
    std::uint64_t iters_regime2 = 0;
    bool detected = false;
    std::uint32_t flags = 0;
    std::vector<TrajectoryPoint> trajectory;
};

struct SweepRow {
    std::size_t n = 0;
    double lambda = 0.0;
    Algorithm algorithm = Algorithm::iAGD;
    std::uint32_t replicas = 1;
    std::uint64_t samples = 0;
    double mean_m_I = 0.0;
    double mean_m_II = 0.0;
    double mean_energy_I = 0.0;
    double detection_probability = 0.0;
    double standard_error = 0.0;
    std::uint64_t detected = 0;
    std::uint64_t flagged = 0;
};

struct SweepTable {
    std::vector<SweepRow> rows;
};

struct SweepResult {
    SweepTable table;
    /// Sorted by (group, sample, algorithm, replicas).
    std::vector<SampleRecord> samples;
};

/// Replica count used for an algorithm's cells; 0 stands for R = infinity.
std::uint32_t effective_replicas(Algorithm algorithm, std::uint32_t requested);

/// Runs every cell. Output is independent of `spec.workers` and scheduling.
/// Throws ResourceError when the memory estimate exceeds the budget.
SweepResult run_sweep(const SweepSpec& spec);
/// As above, calling `progress(done, total)` after every finished problem.
SweepResult run_sweep(const SweepSpec& spec, const std::function<void(std::size_t, std::size_t)>& progress);

/// Rows sorted by (n, lambda, algorithm, replicas); sums taken in sample order.
SweepTable aggregate(const std::vector<SampleRecord>& samples);

// CSV ------------------------------------------------------------------------

void write_table_csv(const SweepTable& table, std::ostream& out);
SweepTable read_table_csv(std::istream& in);
void write_samples_csv(const std::vector<SampleRecord>& samples, std::ostream& out);
std::vector<SampleRecord> read_samples_csv(std::istream& in);

/// (lambda * m_I, m_II) per sample.
void write_scatter_csv(const std::vector<SampleRecord>& samples, std::ostream& out);
/// One row per recorded trajectory point.
void write_trajectories_csv(const std::vector<SampleRecord>& samples, std::ostream& out);

// Config ---------------------------------------------------------------------

/// Flat JSON object; unknown keys and ill-typed values raise ConfigError.
SweepSpec parse_sweep_config(const std::string& text);
SweepSpec load_sweep_config(const std::string& path, std::string* raw_text = nullptr);

/// Sidecar with the raw config text, the resolved spec and run defaults.
std::string sweep_metadata_json(const SweepSpec& spec, const std::string& raw_config, const SweepTable& table);

// Analysis -------------------------------------------------------------------

struct CollapsePoint {
    std::size_t n = 0;
    double lambda = 0.0;
    double shifted_lambda = 0.0;  ///< lambda - a n^((k-2)/4)
    double probability = 0.0;
    double standard_error = 0.0;
};

struct CrossingEstimate {
    std::size_t n = 0;
    std::optional<double> lambda;  ///< missing when the curve never crosses 1/2
};

struct LambdaCEstimate {
    double prefactor = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::vector<CrossingEstimate> crossings;
    /// Free power-law exponent of the crossings; absent with fewer than two N.
    std::optional<double> exponent;
    bool exponent_defined = false;
    std::vector<CollapsePoint> collapse;
};

struct LambdaCOptions {
    int k = 3;
    std::optional<Algorithm> algorithm;
    std::optional<std::uint32_t> replicas;
    int bootstrap = 1000;
    double confidence = 0.95;
    std::uint64_t seed = 12345;
};

/// Isotonic (pool-adjacent-violators, weighted by samples) then linear
/// interpolation of P(lambda) = 1/2 on the given points.
std::optional<double> half_crossing(const std::vector<double>& lambda, const std::vector<double>& probability,
                                    const std::vector<double>& weight);

/// Fits crossing(n) = a n^((k-2)/4) through the origin with a parametric
/// bootstrap interval. Throws std::invalid_argument when no N crosses.
LambdaCEstimate estimate_lambda_c(const SweepTable& table, const LambdaCOptions& options = {});

struct RPoint {
    double replicas = 1.0;
    double probability = 0.0;
    std::uint64_t samples = 0;
};

struct RFit {
    double p_inf = 0.0;
    double amplitude = 0.0;
    double rate = 0.0;
    double se_p_inf = 0.0;
    double se_amplitude = 0.0;
    double se_rate = 0.0;
    double chi2 = 0.0;
    int dof = 0;
    std::vector<double> residuals;  ///< observed minus fitted, per point
    /// Rate pinned at a search boundary or a singular information matrix.
    bool flagged = false;
    std::optional<double> reference;  ///< infinite-R success probability, when given
};

/// Weighted least squares fit of p(R) = p_inf - amplitude * exp(-R / rate).
/// Needs at least 4 distinct R.
RFit fit_success_vs_r(const std::vector<RPoint>& points, std::optional<double> reference = std::nullopt);

/// Points of one (n, lambda) AGD series from a table.
std::vector<RPoint> r_series(const SweepTable& table, std::size_t n, double lambda, Algorithm algorithm = Algorithm::AGD);

}  // namespace tpca
