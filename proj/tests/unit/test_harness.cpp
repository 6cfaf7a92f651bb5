#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "tpca/harness.hpp"

using namespace tpca;

namespace {

SweepSpec small_spec() {
    SweepSpec s;
    s.k = 3;
    s.n = {12, 16};
    s.lambda = {0.5, 3.0};
    s.algorithms = {Algorithm::GD, Algorithm::AGD, Algorithm::iAGD, Algorithm::SiAGD, Algorithm::PowerMethod};
    s.replicas = {1, 2};
    s.samples = 3;
    s.base_seed = 17;
    s.stop_eps_rel = 1e-4;
    s.max_iters = 3000;
    return s;
}

std::string table_csv(const SweepTable& t) {
    std::ostringstream out;
    write_table_csv(t, out);
    return out.str();
}

std::string samples_csv(const std::vector<SampleRecord>& s) {
    std::ostringstream out;
    write_samples_csv(s, out);
    return out.str();
}

SweepRow row(std::size_t n, double lambda, double p, std::uint64_t samples = 100) {
    SweepRow r;
    r.n = n;
    r.lambda = lambda;
    r.algorithm = Algorithm::iAGD;
    r.replicas = 0;
    r.samples = samples;
    r.detection_probability = p;
    r.detected = static_cast<std::uint64_t>(std::llround(p * samples));
    r.standard_error = std::sqrt(p * (1 - p) / samples);
    return r;
}

}  // namespace

TEST(SweepSpec, SamplesFromBudget) {
    SweepSpec s;
    s.n = {30, 1000};
    EXPECT_EQ(s.samples_for(30), 400u);
    EXPECT_EQ(s.samples_for(1000), 12u);
    s.samples = 7;
    EXPECT_EQ(s.samples_for(1000), 7u);
}

TEST(SweepSpec, CriticalScale) {
    SweepSpec s;
    s.k = 3;
    s.lambda = {0.5};
    s.lambda_scale = LambdaScale::Critical;
    EXPECT_NEAR(s.lambda_value(16, 0), 1.0, 1e-15);
    s.k = 4;
    EXPECT_NEAR(s.lambda_value(16, 0), 2.0, 1e-15);
}

TEST(SweepSpec, RunConfigCarriesSettings) {
    auto s = small_spec();
    const auto c = s.run_config(Algorithm::AGD, 4, 100, 99);
    EXPECT_EQ(c.replicas, 4u);
    EXPECT_NEAR(*c.stop_eps, 1e-4 * 10.0, 1e-18);
    EXPECT_EQ(c.max_iters, 3000u);
    EXPECT_EQ(c.rng_seed, 99u);
}

TEST(SweepSpec, ValidationErrors) {
    auto s = small_spec();
    EXPECT_NO_THROW(s.validate());
    s.n.clear();
    EXPECT_THROW(s.validate(), ConfigError);
    s = small_spec();
    s.k = 4;
    EXPECT_THROW(s.validate(), ConfigError);  // iAGD at k = 4
    s = small_spec();
    s.algorithms = {Algorithm::AGDAuto};
    EXPECT_THROW(s.validate(), ConfigError);  // odd k
    s = small_spec();
    s.replicas = {0};
    EXPECT_THROW(s.validate(), ConfigError);
    s = small_spec();
    s.n = {2};
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Seeds, SampleSeedsDistinct) {
    EXPECT_NE(sample_seed(1, 0, 1), sample_seed(1, 1, 0));
    EXPECT_NE(sample_seed(1, 0, 0), sample_seed(2, 0, 0));
    EXPECT_THROW(sample_seed(1, 1ull << 32, 0), std::out_of_range);
}

TEST(EffectiveReplicas, Encoding) {
    EXPECT_EQ(effective_replicas(Algorithm::AGD, 5), 5u);
    EXPECT_EQ(effective_replicas(Algorithm::AGDAuto, 3), 3u);
    EXPECT_EQ(effective_replicas(Algorithm::iAGD, 5), 0u);
    EXPECT_EQ(effective_replicas(Algorithm::SiAGD, 5), 0u);
    EXPECT_EQ(effective_replicas(Algorithm::GD, 5), 1u);
    EXPECT_EQ(effective_replicas(Algorithm::PowerMethod, 5), 1u);
}

TEST(RunSweep, EmptyLambdaGridGivesEmptyTable) {
    auto s = small_spec();
    s.lambda.clear();
    const auto r = run_sweep(s);
    EXPECT_TRUE(r.table.rows.empty());
    EXPECT_TRUE(r.samples.empty());
}

TEST(RunSweep, CountsAreConserved) {
    const auto s = small_spec();
    const auto r = run_sweep(s);
    // GD, iAGD, SiAGD, Power once; AGD once per replica count.
    const std::size_t cells_per_point = 4 + 2;
    EXPECT_EQ(r.table.rows.size(), 2 * 2 * cells_per_point);
    EXPECT_EQ(r.samples.size(), 2 * 2 * cells_per_point * 3);
    std::uint64_t total = 0;
    for (const auto& row : r.table.rows) {
        EXPECT_EQ(row.samples, 3u);
        EXPECT_LE(row.detected, row.samples);
        EXPECT_NEAR(row.detection_probability, static_cast<double>(row.detected) / row.samples, 1e-15);
        total += row.samples;
    }
    EXPECT_EQ(total, r.samples.size());
}

TEST(RunSweep, AlgorithmsShareTheProblemOfASample) {
    const auto r = run_sweep(small_spec());
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::set<std::uint64_t>> seeds;
    for (const auto& s : r.samples) seeds[{s.group, s.sample}].insert(s.seed);
    for (const auto& [key, set] : seeds) EXPECT_EQ(set.size(), 1u);
}

TEST(RunSweep, IndependentOfWorkerCount) {
    auto s = small_spec();
    const auto a = run_sweep(s);
    s.workers = 3;
    const auto b = run_sweep(s);
    EXPECT_EQ(table_csv(a.table), table_csv(b.table));
    EXPECT_EQ(samples_csv(a.samples), samples_csv(b.samples));
}

TEST(RunSweep, ChunksReproduceWholeSweep) {
    auto s = small_spec();
    s.samples = 4;
    const auto whole = run_sweep(s);
    s.samples = 2;
    auto first = run_sweep(s).samples;
    s.first_sample = 2;
    const auto second = run_sweep(s).samples;
    first.insert(first.end(), second.begin(), second.end());
    EXPECT_EQ(table_csv(aggregate(first)), table_csv(whole.table));
}

TEST(RunSweep, ProgressReportsEveryProblem) {
    auto s = small_spec();
    std::size_t calls = 0;
    std::size_t last_total = 0;
    run_sweep(s, [&](std::size_t, std::size_t total) {
        ++calls;
        last_total = total;
    });
    EXPECT_EQ(calls, 2u * 2u * 3u);
    EXPECT_EQ(last_total, calls);
}

TEST(RunSweep, MemoryBudgetRefuses) {
    auto s = small_spec();
    s.memory_budget_bytes = 100;
    EXPECT_THROW(run_sweep(s), ResourceError);
    EXPECT_EQ(sweep_memory_bytes(s), required_bytes(3, 16, Precision::Float64));
}

TEST(Csv, TableRoundTrip) {
    const auto r = run_sweep(small_spec());
    std::stringstream buf(table_csv(r.table));
    const auto back = read_table_csv(buf);
    EXPECT_EQ(table_csv(back), table_csv(r.table));
    EXPECT_NE(table_csv(r.table).find(",inf,"), std::string::npos);
}

TEST(Csv, SamplesRoundTrip) {
    const auto r = run_sweep(small_spec());
    std::stringstream buf(samples_csv(r.samples));
    const auto back = read_samples_csv(buf);
    ASSERT_EQ(back.size(), r.samples.size());
    EXPECT_EQ(samples_csv(back), samples_csv(r.samples));
    EXPECT_EQ(back[5].m_I, r.samples[5].m_I);
}

TEST(Csv, RejectsWrongHeader) {
    std::stringstream buf("a,b,c\n1,2,3\n");
    EXPECT_THROW(read_table_csv(buf), std::runtime_error);
}

TEST(Csv, ScatterAndTrajectories) {
    auto s = small_spec();
    s.algorithms = {Algorithm::iAGD};
    s.record_trajectories = true;
    s.trajectory_stride = 5;
    const auto r = run_sweep(s);
    std::ostringstream sc;
    write_scatter_csv(r.samples, sc);
    const std::string scatter = sc.str();
    EXPECT_EQ(std::count(scatter.begin(), scatter.end(), '\n'), static_cast<long>(r.samples.size() + 1));
    std::ostringstream tr;
    write_trajectories_csv(r.samples, tr);
    std::size_t points = 0;
    for (const auto& x : r.samples) points += x.trajectory.size();
    EXPECT_GT(points, 0u);
    const std::string traj = tr.str();
    EXPECT_EQ(std::count(traj.begin(), traj.end(), '\n'), static_cast<long>(points + 1));
}

TEST(Config, ParsesAllKeys) {
    const auto s = parse_sweep_config(R"({
        "k": 3, "n": [30, 100], "lambda": [0.3, 0.4], "lambda_scale": "critical",
        "algorithms": ["iAGD", "AGD"], "replicas": [1, 4], "samples": 10, "seed": 5,
        "stop_eps": 1e-3, "max_iters": 500, "precision": "float32",
        "noise_convention": "uniform", "workers": 2, "memory_budget_mb": 64})");
    EXPECT_EQ(s.n.size(), 2u);
    EXPECT_EQ(s.lambda_scale, LambdaScale::Critical);
    EXPECT_EQ(s.algorithms.size(), 2u);
    EXPECT_EQ(*s.samples, 10u);
    EXPECT_EQ(s.precision, Precision::Float32);
    EXPECT_EQ(s.convention, NoiseConvention::Uniform);
    EXPECT_EQ(s.memory_budget_bytes, 64u * 1024 * 1024);
    const auto single = parse_sweep_config(R"({"n": 20, "lambda": 1.5, "algorithms": "SiAGD"})");
    EXPECT_EQ(single.n, std::vector<std::size_t>{20});
    EXPECT_EQ(single.algorithms.front(), Algorithm::SiAGD);
}

TEST(Config, Errors) {
    EXPECT_THROW(parse_sweep_config("{"), ConfigError);
    EXPECT_THROW(parse_sweep_config("[1]"), ConfigError);
    EXPECT_THROW(parse_sweep_config(R"({"lambda": [1]})"), ConfigError);
    EXPECT_THROW(parse_sweep_config(R"({"n": [10], "colour": 1})"), ConfigError);
    EXPECT_THROW(parse_sweep_config(R"({"n": [10], "samples": -1})"), ConfigError);
    EXPECT_THROW(parse_sweep_config(R"({"n": [10], "algorithms": ["Adam"]})"), ConfigError);
    EXPECT_THROW(parse_sweep_config(R"({"n": [10], "k": "three"})"), ConfigError);
    EXPECT_THROW(load_sweep_config("/nonexistent/sweep.json"), ConfigError);
}

TEST(Config, MetadataRecordsStopRule) {
    const auto s = small_spec();
    const auto meta = nlohmann::json::parse(sweep_metadata_json(s, "{}", SweepTable{}));
    EXPECT_EQ(meta["format"], "tpca-sweep");
    EXPECT_EQ(meta["resolved"]["max_iters"], 3000);
    EXPECT_DOUBLE_EQ(meta["resolved"]["stop_eps"].get<double>(), 1e-4);
    EXPECT_EQ(meta["config"], "{}");
}

TEST(HalfCrossing, IsotonicThenLinear) {
    EXPECT_NEAR(*half_crossing({1, 2, 3}, {0.0, 0.4, 0.8}, {1, 1, 1}), 2.25, 1e-15);
    // Violator 0.6 > 0.4 pooled to 0.5 at both points.
    EXPECT_NEAR(*half_crossing({1, 2, 3, 4}, {0.1, 0.6, 0.4, 0.9}, {1, 1, 1, 1}), 1.0 + 0.4 / 0.4, 1e-15);
    EXPECT_FALSE(half_crossing({1, 2}, {0.1, 0.3}, {1, 1}).has_value());
    EXPECT_FALSE(half_crossing({1, 2}, {0.6, 0.9}, {1, 1}).has_value());
    EXPECT_FALSE(half_crossing({}, {}, {}).has_value());
}

TEST(LambdaC, RecoversStepPrefactor) {
    SweepTable t;
    // n = 16 -> n^(1/4) = 2, crossing at 0.8; n = 81 -> 3, crossing at 1.2.
    t.rows = {row(16, 0.6, 0.0), row(16, 1.0, 1.0), row(81, 1.0, 0.0), row(81, 1.4, 1.0)};
    const auto est = estimate_lambda_c(t);
    EXPECT_NEAR(est.prefactor, 0.4, 1e-14);
    EXPECT_NEAR(est.ci_low, 0.4, 1e-14);
    EXPECT_NEAR(est.ci_high, 0.4, 1e-14);
    ASSERT_TRUE(est.exponent.has_value());
    EXPECT_NEAR(*est.exponent, 0.25, 1e-12);
    ASSERT_EQ(est.collapse.size(), 4u);
    EXPECT_NEAR(est.collapse[0].shifted_lambda, 0.6 - 0.8, 1e-14);
}

TEST(LambdaC, SingleNHasNoExponent) {
    SweepTable t;
    t.rows = {row(16, 0.6, 0.2), row(16, 1.0, 0.8)};
    const auto est = estimate_lambda_c(t);
    EXPECT_FALSE(est.exponent.has_value());
    EXPECT_FALSE(est.exponent_defined);
    EXPECT_NEAR(est.prefactor, 0.4, 1e-14);
    EXPECT_LT(est.ci_low, est.ci_high);
}

TEST(LambdaC, NoCrossingThrows) {
    SweepTable t;
    t.rows = {row(16, 0.6, 0.1), row(16, 1.0, 0.2)};
    EXPECT_THROW(estimate_lambda_c(t), std::invalid_argument);
}

TEST(LambdaC, MixedAlgorithmsNeedFilter) {
    SweepTable t;
    t.rows = {row(16, 0.6, 0.0), row(16, 1.0, 1.0)};
    auto other = row(16, 0.8, 0.5);
    other.algorithm = Algorithm::SiAGD;
    t.rows.push_back(other);
    EXPECT_THROW(estimate_lambda_c(t), std::invalid_argument);
    LambdaCOptions opt;
    opt.algorithm = Algorithm::iAGD;
    EXPECT_NEAR(estimate_lambda_c(t, opt).prefactor, 0.4, 1e-14);
}

TEST(RFit, RecoversSyntheticCurve) {
    std::vector<RPoint> pts;
    for (double r : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) pts.push_back({r, 0.9 - 0.7 * std::exp(-r / 4.0), 100000});
    const auto fit = fit_success_vs_r(pts, 0.88);
    EXPECT_NEAR(fit.p_inf, 0.9, 1e-4);
    EXPECT_NEAR(fit.amplitude, 0.7, 1e-4);
    EXPECT_NEAR(fit.rate, 4.0, 1e-3);
    EXPECT_FALSE(fit.flagged);
    EXPECT_EQ(fit.dof, 3);
    EXPECT_NEAR(fit.chi2, 0.0, 1e-6);
    EXPECT_EQ(fit.residuals.size(), 6u);
    EXPECT_EQ(*fit.reference, 0.88);
    EXPECT_GT(fit.se_rate, 0.0);
}

TEST(RFit, ConstantCurveIsFlagged) {
    std::vector<RPoint> pts;
    for (double r : {1.0, 2.0, 4.0, 8.0}) pts.push_back({r, 1.0, 100});
    const auto fit = fit_success_vs_r(pts);
    EXPECT_TRUE(fit.flagged);
    EXPECT_NEAR(fit.p_inf - fit.amplitude * std::exp(-1.0 / fit.rate), 1.0, 1e-3);
}

TEST(RFit, NeedsFourDistinctR) {
    std::vector<RPoint> pts{{1, 0.2, 10}, {2, 0.4, 10}, {2, 0.5, 10}, {4, 0.6, 10}};
    EXPECT_THROW(fit_success_vs_r(pts), std::invalid_argument);
}

TEST(RFit, SeriesFromTable) {
    SweepTable t;
    for (std::uint32_t r : {4u, 1u, 2u}) {
        auto x = row(100, 3.0, 0.1 * r);
        x.algorithm = Algorithm::AGD;
        x.replicas = r;
        t.rows.push_back(x);
    }
    t.rows.push_back(row(100, 3.0, 0.9));  // iAGD, ignored
    const auto s = r_series(t, 100, 3.0);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].replicas, 1.0);
    EXPECT_EQ(s[2].replicas, 4.0);
}
