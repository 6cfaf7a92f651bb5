#include "tpca/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include <Eigen/Dense>
#include <json.hpp>

#include "tpca/rng.hpp"

namespace tpca {

namespace {

constexpr std::uint64_t kAlgorithmStream = 0x5157;

bool uses_replicas(Algorithm a) { return a == Algorithm::AGD || a == Algorithm::AGDAuto; }

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_replicas(std::uint32_t r) { return r == 0 ? "inf" : std::to_string(r); }

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::runtime_error("bad number '" + s + "' in CSV");
    return v;
}

std::uint64_t parse_uint(const std::string& s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::runtime_error("bad integer '" + s + "' in CSV");
    return v;
}

std::uint32_t parse_replicas(const std::string& s) {
    return s == "inf" ? 0u : static_cast<std::uint32_t>(parse_uint(s));
}

std::string read_line(std::istream& in) {
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

// ---------------------------------------------------------------------------
// SweepSpec

std::uint64_t SweepSpec::samples_for(std::size_t n_value) const {
    if (samples) return *samples;
    return static_cast<std::uint64_t>(std::ceil(sample_budget / static_cast<double>(n_value)));
}

double SweepSpec::lambda_value(std::size_t n_value, std::size_t grid_index) const {
    const double a = lambda.at(grid_index);
    if (lambda_scale == LambdaScale::Absolute) return a;
    return a * std::pow(static_cast<double>(n_value), 0.25 * (k - 2));
}

RunConfig SweepSpec::run_config(Algorithm algorithm, std::uint32_t r, std::size_t n_value,
                                std::uint64_t rng_seed) const {
    RunConfig c;
    c.algorithm = algorithm;
    c.replicas = r == 0 ? 1 : r;
    c.learning_rate = learning_rate;
    c.euler_step = euler_step;
    c.stop_eps = stop_eps_rel * std::sqrt(static_cast<double>(n_value));
    c.max_iters = max_iters;
    c.spectral_iters = spectral_iters;
    c.spectral_tol = spectral_tol;
    c.rng_seed = rng_seed;
    c.trajectory_stride = record_trajectories ? trajectory_stride : 0;
    c.detection_threshold = detection_threshold;
    return c;
}

void SweepSpec::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError(what); };
    if (k < 2 || k > kMaxOrder) fail("k must be in [2, 8]");
    if (n.empty()) fail("n: at least one dimension is required");
    for (auto v : n) {
        if (v < static_cast<std::size_t>(k)) fail("n: every dimension must be >= k");
    }
    for (double l : lambda) {
        if (!(l >= 0.0) || !std::isfinite(l)) fail("lambda: values must be finite and non-negative");
    }
    if (algorithms.empty()) fail("algorithms: at least one algorithm is required");
    for (auto a : algorithms) {
        if (a == Algorithm::iAGD && k != 3) fail("iAGD is implemented for k = 3 only");
        if (a == Algorithm::AGDAuto && k % 2 != 0) fail("AGD-auto needs even k");
    }
    if (replicas.empty()) fail("replicas: at least one value is required");
    for (auto r : replicas) {
        if (r < 1) fail("replicas: values must be >= 1");
    }
    if (samples && *samples < 1) fail("samples must be >= 1");
    if (!samples && !(sample_budget > 0.0)) fail("sample_budget must be positive");
    if (record_trajectories && trajectory_stride < 1) fail("trajectory_stride must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (!(euler_step > 0.0)) fail("euler_step must be positive");
    if (!(stop_eps_rel > 0.0)) fail("stop_eps must be positive");
    if (max_iters < 1) fail("max_iters must be >= 1");
    if (spectral_iters < 1) fail("spectral_iters must be >= 1");
    if (!(spectral_tol > 0.0)) fail("spectral_tol must be positive");
    if (!(detection_threshold > -1.0 && detection_threshold <= 1.0)) fail("detection_threshold must be in (-1, 1]");
    if (workers < 1) fail("workers must be >= 1");
}

std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t group, std::uint64_t sample) {
    if (group >= (std::uint64_t{1} << 32) || sample >= (std::uint64_t{1} << 32)) {
        throw std::out_of_range("group and sample indices must fit in 32 bits");
    }
    return mix64(mix64(base_seed) ^ ((group << 32) | sample));
}

std::uint64_t sweep_memory_bytes(const SweepSpec& spec) {
    if (spec.n.empty()) return 0;
    const std::size_t largest = *std::max_element(spec.n.begin(), spec.n.end());
    const std::uint64_t per_problem = required_bytes(spec.k, largest, spec.precision);
    std::uint64_t concurrent = spec.workers;
    if (!spec.lambda.empty()) {
        std::uint64_t tasks = 0;
        for (auto v : spec.n) tasks += spec.samples_for(v) * spec.lambda.size();
        concurrent = std::min<std::uint64_t>(concurrent, tasks);
    }
    return per_problem * concurrent;
}

std::uint32_t effective_replicas(Algorithm algorithm, std::uint32_t requested) {
    if (uses_replicas(algorithm)) return requested;
    if (algorithm == Algorithm::iAGD || algorithm == Algorithm::SiAGD) return 0;
    return 1;
}

// ---------------------------------------------------------------------------
// Sweep execution

SweepResult run_sweep(const SweepSpec& spec, const std::function<void(std::size_t, std::size_t)>& progress) {
    spec.validate();
    const std::uint64_t needed = sweep_memory_bytes(spec);
    if (spec.memory_budget_bytes != 0 && needed > spec.memory_budget_bytes) {
        throw ResourceError("sweep needs " + std::to_string(needed) + " bytes of packed storage, budget is " +
                                std::to_string(spec.memory_budget_bytes),
                            needed);
    }

    struct Task {
        std::size_t n;
        double lambda;
        std::uint64_t group;
        std::uint64_t sample;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < spec.n.size(); ++i) {
        for (std::size_t j = 0; j < spec.lambda.size(); ++j) {
            const std::uint64_t group = i * spec.lambda.size() + j;
            const std::uint64_t count = spec.samples_for(spec.n[i]);
            for (std::uint64_t s = spec.first_sample; s < spec.first_sample + count; ++s) {
                tasks.push_back({spec.n[i], spec.lambda_value(spec.n[i], j), group, s});
            }
        }
    }

    // Cells inside a group, in spec order.
    std::vector<std::pair<Algorithm, std::uint32_t>> cells;
    for (auto a : spec.algorithms) {
        if (uses_replicas(a)) {
            for (auto r : spec.replicas) cells.emplace_back(a, r);
        } else {
            cells.emplace_back(a, effective_replicas(a, 1));
        }
    }

    GenerateOptions options;
    options.precision = spec.precision;
    options.convention = spec.convention;

    std::vector<std::vector<SampleRecord>> slots(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::exception_ptr error;
    std::mutex mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) return;
            {
                std::lock_guard lock(mutex);
                if (error) return;
            }
            try {
                const Task& task = tasks[t];
                const std::uint64_t seed = sample_seed(spec.base_seed, task.group, task.sample);
                const SpikedTensorProblem problem = generate(spec.k, task.n, task.lambda, seed, options);
                auto& out = slots[t];
                out.reserve(cells.size());
                for (std::size_t c = 0; c < cells.size(); ++c) {
                    const auto [algorithm, r] = cells[c];
                    const std::uint64_t rng_seed =
                        derive_seed(seed ^ kAlgorithmStream, static_cast<std::uint64_t>(algorithm), r);
                    RunResult res = run(problem, spec.run_config(algorithm, r, task.n, rng_seed));
                    SampleRecord rec;
                    rec.n = task.n;
                    rec.lambda = task.lambda;
                    rec.algorithm = algorithm;
                    rec.replicas = r;
                    rec.group = task.group;
                    rec.sample = task.sample;
                    rec.seed = seed;
                    rec.m_I = res.m_I;
                    rec.m_II = res.m_II;
                    rec.energy_I = res.energy_I;
                    rec.energy_final = res.energy_final;
                    rec.iters_regime1 = res.iters_regime1;
                    rec.iters_regime2 = res.iters_regime2;
                    rec.detected = res.detected;
                    rec.flags = res.flags;
                    rec.trajectory = std::move(res.trajectory);
                    out.push_back(std::move(rec));
                }
                const std::size_t finished = done.fetch_add(1) + 1;
                if (progress) {
                    std::lock_guard lock(mutex);
                    progress(finished, tasks.size());
                }
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };

    const unsigned pool = static_cast<unsigned>(std::min<std::size_t>(spec.workers, std::max<std::size_t>(tasks.size(), 1)));
    if (pool <= 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        threads.reserve(pool);
        for (unsigned w = 0; w < pool; ++w) threads.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);

    SweepResult result;
    for (auto& slot : slots) {
        for (auto& rec : slot) result.samples.push_back(std::move(rec));
    }
    result.table = aggregate(result.samples);
    return result;
}

SweepResult run_sweep(const SweepSpec& spec) { return run_sweep(spec, {}); }

SweepTable aggregate(const std::vector<SampleRecord>& samples) {
    using Key = std::tuple<std::size_t, double, int, std::uint32_t>;
    struct Acc {
        std::uint64_t count = 0;
        double m_I = 0.0;
        double m_II = 0.0;
        double energy_I = 0.0;
        std::uint64_t detected = 0;
        std::uint64_t flagged = 0;
    };
    std::map<Key, Acc> cells;
    for (const auto& s : samples) {
        auto& acc = cells[Key{s.n, s.lambda, static_cast<int>(s.algorithm), s.replicas}];
        ++acc.count;
        acc.m_I += s.m_I;
        acc.m_II += s.m_II;
        acc.energy_I += s.energy_I;
        acc.detected += s.detected ? 1 : 0;
        acc.flagged += s.flags != 0 ? 1 : 0;
    }
    SweepTable table;
    table.rows.reserve(cells.size());
    for (const auto& [key, acc] : cells) {
        SweepRow row;
        row.n = std::get<0>(key);
        row.lambda = std::get<1>(key);
        row.algorithm = static_cast<Algorithm>(std::get<2>(key));
        row.replicas = std::get<3>(key);
        row.samples = acc.count;
        const double c = static_cast<double>(acc.count);
        row.mean_m_I = acc.m_I / c;
        row.mean_m_II = acc.m_II / c;
        row.mean_energy_I = acc.energy_I / c;
        row.detected = acc.detected;
        row.flagged = acc.flagged;
        row.detection_probability = static_cast<double>(acc.detected) / c;
        row.standard_error = std::sqrt(row.detection_probability * (1.0 - row.detection_probability) / c);
        table.rows.push_back(row);
    }
    return table;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr const char* kTableHeader =
    "N,lambda,algorithm,R,samples,mean_m_I,mean_m_II,mean_energy_I,detection_probability,standard_error,detected,"
    "flagged";
constexpr const char* kSamplesHeader =
    "N,lambda,algorithm,R,group,sample,seed,m_I,m_II,energy_I,energy_final,iters_regime1,iters_regime2,detected,"
    "flags";

void expect_header(std::istream& in, const char* header) {
    const std::string line = read_line(in);
    if (line != header) throw std::runtime_error("unexpected CSV header: " + line);
}

}  // namespace

void write_table_csv(const SweepTable& table, std::ostream& out) {
    out << kTableHeader << '\n';
    for (const auto& r : table.rows) {
        out << r.n << ',' << fmt(r.lambda) << ',' << to_string(r.algorithm) << ',' << fmt_replicas(r.replicas) << ','
            << r.samples << ',' << fmt(r.mean_m_I) << ',' << fmt(r.mean_m_II) << ',' << fmt(r.mean_energy_I) << ','
            << fmt(r.detection_probability) << ',' << fmt(r.standard_error) << ',' << r.detected << ',' << r.flagged
            << '\n';
    }
}

SweepTable read_table_csv(std::istream& in) {
    expect_header(in, kTableHeader);
    SweepTable table;
    for (std::string line = read_line(in); !line.empty() || in; line = read_line(in)) {
        if (line.empty()) continue;
        const auto c = split_csv(line);
        if (c.size() != 12) throw std::runtime_error("table row has " + std::to_string(c.size()) + " columns");
        SweepRow r;
        r.n = parse_uint(c[0]);
        r.lambda = parse_double(c[1]);
        r.algorithm = parse_algorithm(c[2]);
        r.replicas = parse_replicas(c[3]);
        r.samples = parse_uint(c[4]);
        r.mean_m_I = parse_double(c[5]);
        r.mean_m_II = parse_double(c[6]);
        r.mean_energy_I = parse_double(c[7]);
        r.detection_probability = parse_double(c[8]);
        r.standard_error = parse_double(c[9]);
        r.detected = parse_uint(c[10]);
        r.flagged = parse_uint(c[11]);
        table.rows.push_back(r);
    }
    return table;
}

void write_samples_csv(const std::vector<SampleRecord>& samples, std::ostream& out) {
    out << kSamplesHeader << '\n';
    for (const auto& s : samples) {
        out << s.n << ',' << fmt(s.lambda) << ',' << to_string(s.algorithm) << ',' << fmt_replicas(s.replicas) << ','
            << s.group << ',' << s.sample << ',' << s.seed << ',' << fmt(s.m_I) << ',' << fmt(s.m_II) << ','
            << fmt(s.energy_I) << ',' << fmt(s.energy_final) << ',' << s.iters_regime1 << ',' << s.iters_regime2 << ','
            << (s.detected ? 1 : 0) << ',' << s.flags << '\n';
    }
}

std::vector<SampleRecord> read_samples_csv(std::istream& in) {
    expect_header(in, kSamplesHeader);
    std::vector<SampleRecord> out;
    for (std::string line = read_line(in); !line.empty() || in; line = read_line(in)) {
        if (line.empty()) continue;
        const auto c = split_csv(line);
        if (c.size() != 15) throw std::runtime_error("sample row has " + std::to_string(c.size()) + " columns");
        SampleRecord s;
        s.n = parse_uint(c[0]);
        s.lambda = parse_double(c[1]);
        s.algorithm = parse_algorithm(c[2]);
        s.replicas = parse_replicas(c[3]);
        s.group = parse_uint(c[4]);
        s.sample = parse_uint(c[5]);
        s.seed = parse_uint(c[6]);
        s.m_I = parse_double(c[7]);
        s.m_II = parse_double(c[8]);
        s.energy_I = parse_double(c[9]);
        s.energy_final = parse_double(c[10]);
        s.iters_regime1 = parse_uint(c[11]);
        s.iters_regime2 = parse_uint(c[12]);
        s.detected = parse_uint(c[13]) != 0;
        s.flags = static_cast<std::uint32_t>(parse_uint(c[14]));
        out.push_back(std::move(s));
    }
    return out;
}

void write_scatter_csv(const std::vector<SampleRecord>& samples, std::ostream& out) {
    out << "group,sample,N,lambda,algorithm,R,lambda_m_I,m_II,detected\n";
    for (const auto& s : samples) {
        out << s.group << ',' << s.sample << ',' << s.n << ',' << fmt(s.lambda) << ',' << to_string(s.algorithm) << ','
            << fmt_replicas(s.replicas) << ',' << fmt(s.lambda * s.m_I) << ',' << fmt(s.m_II) << ','
            << (s.detected ? 1 : 0) << '\n';
    }
}

void write_trajectories_csv(const std::vector<SampleRecord>& samples, std::ostream& out) {
    out << "group,sample,N,lambda,algorithm,R,t,r,m,energy_per_site\n";
    for (const auto& s : samples) {
        for (const auto& p : s.trajectory) {
            out << s.group << ',' << s.sample << ',' << s.n << ',' << fmt(s.lambda) << ',' << to_string(s.algorithm)
                << ',' << fmt_replicas(s.replicas) << ',' << fmt(p.t) << ',' << fmt(p.r) << ',' << fmt(p.m) << ','
                << fmt(p.energy_per_site) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Config

namespace {

using nlohmann::json;

template <class T>
T get_number(const json& v, const std::string& key) {
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(key + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
            if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
                throw ConfigError(key + ": expected a non-negative integer");
            }
        }
        return v.get<T>();
    } else {
        if (!v.is_number()) throw ConfigError(key + ": expected a number");
        return v.get<T>();
    }
}

template <class T>
std::vector<T> get_list(const json& v, const std::string& key) {
    std::vector<T> out;
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(get_number<T>(e, key));
    } else {
        out.push_back(get_number<T>(v, key));
    }
    return out;
}

std::string get_string(const json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError(key + ": expected a string");
    return v.get<std::string>();
}

}  // namespace

SweepSpec parse_sweep_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");

    SweepSpec spec;
    bool have_n = false;
    for (const auto& [key, v] : doc.items()) {
        try {
            if (key == "k") {
                spec.k = get_number<int>(v, key);
            } else if (key == "n") {
                spec.n = get_list<std::size_t>(v, key);
                have_n = true;
            } else if (key == "lambda") {
                spec.lambda = get_list<double>(v, key);
            } else if (key == "lambda_scale") {
                const auto s = get_string(v, key);
                if (s == "absolute") {
                    spec.lambda_scale = LambdaScale::Absolute;
                } else if (s == "critical") {
                    spec.lambda_scale = LambdaScale::Critical;
                } else {
                    throw ConfigError("lambda_scale: expected \"absolute\" or \"critical\"");
                }
            } else if (key == "algorithms") {
                spec.algorithms.clear();
                if (v.is_array()) {
                    for (const auto& e : v) spec.algorithms.push_back(parse_algorithm(get_string(e, key)));
                } else {
                    spec.algorithms.push_back(parse_algorithm(get_string(v, key)));
                }
            } else if (key == "replicas") {
                spec.replicas = get_list<std::uint32_t>(v, key);
            } else if (key == "samples") {
                spec.samples = get_number<std::uint64_t>(v, key);
            } else if (key == "sample_budget") {
                spec.sample_budget = get_number<double>(v, key);
            } else if (key == "first_sample") {
                spec.first_sample = get_number<std::uint64_t>(v, key);
            } else if (key == "seed") {
                spec.base_seed = get_number<std::uint64_t>(v, key);
            } else if (key == "trajectories") {
                if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
                spec.record_trajectories = v.get<bool>();
            } else if (key == "trajectory_stride") {
                spec.trajectory_stride = get_number<std::uint32_t>(v, key);
            } else if (key == "learning_rate") {
                spec.learning_rate = get_number<double>(v, key);
            } else if (key == "euler_step") {
                spec.euler_step = get_number<double>(v, key);
            } else if (key == "stop_eps") {
                spec.stop_eps_rel = get_number<double>(v, key);
            } else if (key == "max_iters") {
                spec.max_iters = get_number<std::uint64_t>(v, key);
            } else if (key == "spectral_iters") {
                spec.spectral_iters = get_number<std::uint32_t>(v, key);
            } else if (key == "spectral_tol") {
                spec.spectral_tol = get_number<double>(v, key);
            } else if (key == "detection_threshold") {
                spec.detection_threshold = get_number<double>(v, key);
            } else if (key == "precision") {
                spec.precision = parse_precision(get_string(v, key));
            } else if (key == "noise_convention") {
                spec.convention = parse_noise_convention(get_string(v, key));
            } else if (key == "workers") {
                spec.workers = get_number<unsigned>(v, key);
            } else if (key == "memory_budget_mb") {
                const double mb = get_number<double>(v, key);
                if (!(mb >= 0.0)) throw ConfigError(key + ": must be non-negative");
                spec.memory_budget_bytes = static_cast<std::uint64_t>(mb * 1024.0 * 1024.0);
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(key + ": " + e.what());
        }
    }
    if (!have_n) throw ConfigError("n: required");
    spec.validate();
    return spec;
}

SweepSpec load_sweep_config(const std::string& path, std::string* raw_text) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (raw_text) *raw_text = ss.str();
    return parse_sweep_config(ss.str());
}

std::string sweep_metadata_json(const SweepSpec& spec, const std::string& raw_config, const SweepTable& table) {
    json resolved;
    resolved["k"] = spec.k;
    resolved["n"] = spec.n;
    resolved["lambda"] = spec.lambda;
    resolved["lambda_scale"] = spec.lambda_scale == LambdaScale::Absolute ? "absolute" : "critical";
    std::vector<std::string> algorithms;
    for (auto a : spec.algorithms) algorithms.emplace_back(to_string(a));
    resolved["algorithms"] = algorithms;
    resolved["replicas"] = spec.replicas;
    json samples = json::object();
    for (auto v : spec.n) samples[std::to_string(v)] = spec.samples_for(v);
    resolved["samples_per_cell"] = samples;
    resolved["first_sample"] = spec.first_sample;
    resolved["seed"] = spec.base_seed;
    resolved["trajectories"] = spec.record_trajectories;
    resolved["trajectory_stride"] = spec.trajectory_stride;
    resolved["learning_rate"] = spec.learning_rate;
    resolved["euler_step"] = spec.euler_step;
    resolved["stop_eps"] = spec.stop_eps_rel;
    resolved["stop_rule"] = "|x(t+1) - x(t)| < stop_eps * sqrt(N) or max_iters";
    resolved["max_iters"] = spec.max_iters;
    resolved["spectral_iters"] = spec.spectral_iters;
    resolved["spectral_tol"] = spec.spectral_tol;
    resolved["detection_threshold"] = spec.detection_threshold;
    resolved["precision"] = to_string(spec.precision);
    resolved["noise_convention"] = to_string(spec.convention);
    resolved["workers"] = spec.workers;
    resolved["memory_budget_bytes"] = spec.memory_budget_bytes;

    json meta;
    meta["format"] = "tpca-sweep";
    meta["format_version"] = 1;
    meta["config"] = raw_config;
    meta["resolved"] = resolved;
    meta["columns"] = split_csv(kTableHeader);
    meta["rows"] = table.rows.size();
    meta["replicas_encoding"] = "inf for iAGD and SiAGD";
    return meta.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Analysis

std::optional<double> half_crossing(const std::vector<double>& lambda, const std::vector<double>& probability,
                                    const std::vector<double>& weight) {
    const std::size_t n = lambda.size();
    if (probability.size() != n || weight.size() != n) throw std::invalid_argument("half_crossing: size mismatch");
    if (n == 0) return std::nullopt;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return lambda[a] < lambda[b]; });

    // Pool adjacent violators into blocks of (mean, weight, count).
    struct Block {
        double value;
        double weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    for (auto i : order) {
        blocks.push_back({probability[i], std::max(weight[i], 1e-300), 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
            Block b = blocks.back();
            blocks.pop_back();
            Block& a = blocks.back();
            const double w = a.weight + b.weight;
            a.value = (a.value * a.weight + b.value * b.weight) / w;
            a.weight = w;
            a.count += b.count;
        }
    }
    std::vector<double> fitted;
    fitted.reserve(n);
    for (const auto& b : blocks) fitted.insert(fitted.end(), b.count, b.value);

    for (std::size_t i = 0; i < n; ++i) {
        if (fitted[i] >= 0.5) {
            if (i == 0) return std::nullopt;
            const double x0 = lambda[order[i - 1]];
            const double x1 = lambda[order[i]];
            const double y0 = fitted[i - 1];
            const double y1 = fitted[i];
            return x0 + (0.5 - y0) / (y1 - y0) * (x1 - x0);
        }
    }
    return std::nullopt;
}

namespace {

struct Curve {
    std::size_t n;
    std::vector<double> lambda;
    std::vector<double> probability;
    std::vector<double> samples;
};

std::optional<double> fit_through_origin(const std::vector<Curve>& curves, const std::vector<std::optional<double>>& x,
                                         int k) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        if (!x[i]) continue;
        const double s = std::pow(static_cast<double>(curves[i].n), 0.25 * (k - 2));
        num += *x[i] * s;
        den += s * s;
    }
    if (den == 0.0) return std::nullopt;
    return num / den;
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

LambdaCEstimate estimate_lambda_c(const SweepTable& table, const LambdaCOptions& options) {
    std::map<std::size_t, Curve> by_n;
    std::optional<std::pair<Algorithm, std::uint32_t>> seen;
    for (const auto& r : table.rows) {
        if (options.algorithm && r.algorithm != *options.algorithm) continue;
        if (options.replicas && r.replicas != *options.replicas) continue;
        if (!seen) {
            seen = std::pair{r.algorithm, r.replicas};
        } else if (*seen != std::pair{r.algorithm, r.replicas}) {
            throw std::invalid_argument("table mixes algorithms; select one for the threshold fit");
        }
        auto& c = by_n[r.n];
        c.n = r.n;
        c.lambda.push_back(r.lambda);
        c.probability.push_back(r.detection_probability);
        c.samples.push_back(static_cast<double>(r.samples));
    }
    std::vector<Curve> curves;
    for (auto& [n, c] : by_n) curves.push_back(std::move(c));

    std::vector<std::optional<double>> cross;
    for (const auto& c : curves) cross.push_back(half_crossing(c.lambda, c.probability, c.samples));
    const auto a = fit_through_origin(curves, cross, options.k);
    if (!a) throw std::invalid_argument("no detection curve crosses 1/2");

    LambdaCEstimate est;
    est.prefactor = *a;
    for (std::size_t i = 0; i < curves.size(); ++i) est.crossings.push_back({curves[i].n, cross[i]});

    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        if (cross[i] && *cross[i] > 0.0) {
            lx.push_back(std::log(static_cast<double>(curves[i].n)));
            ly.push_back(std::log(*cross[i]));
        }
    }
    if (lx.size() >= 2) {
        const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
        const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
        double sxy = 0.0;
        double sxx = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        if (sxx > 0.0) {
            est.exponent = sxy / sxx;
            est.exponent_defined = true;
        }
    }

    // Parametric bootstrap: redraw every point as Binomial(samples, p) / samples.
    std::vector<double> draws;
    if (options.bootstrap > 0) {
        RandomStream rng(options.seed, 0xB007);
        draws.reserve(options.bootstrap);
        for (int b = 0; b < options.bootstrap; ++b) {
            std::vector<std::optional<double>> xb;
            std::vector<Curve> resampled = curves;
            for (auto& c : resampled) {
                for (std::size_t j = 0; j < c.probability.size(); ++j) {
                    const auto m = static_cast<long long>(c.samples[j]);
                    std::binomial_distribution<long long> dist(m, std::clamp(c.probability[j], 0.0, 1.0));
                    c.probability[j] = static_cast<double>(dist(rng)) / c.samples[j];
                }
                xb.push_back(half_crossing(c.lambda, c.probability, c.samples));
            }
            if (auto ab = fit_through_origin(resampled, xb, options.k)) draws.push_back(*ab);
        }
    }
    if (draws.empty()) {
        est.ci_low = est.ci_high = est.prefactor;
    } else {
        const double tail = 0.5 * (1.0 - options.confidence);
        est.ci_low = quantile(draws, tail);
        est.ci_high = quantile(draws, 1.0 - tail);
    }

    for (const auto& r : table.rows) {
        if (options.algorithm && r.algorithm != *options.algorithm) continue;
        if (options.replicas && r.replicas != *options.replicas) continue;
        const double s = std::pow(static_cast<double>(r.n), 0.25 * (options.k - 2));
        est.collapse.push_back({r.n, r.lambda, r.lambda - est.prefactor * s, r.detection_probability, r.standard_error});
    }
    return est;
}

namespace {

struct LinearFit {
    double p_inf;
    double amplitude;
    double chi2;
};

// Best (p_inf, amplitude) for a fixed rate; weights are inverse variances.
LinearFit solve_linear(const std::vector<RPoint>& pts, const std::vector<double>& w, double rate) {
    double s00 = 0.0, s01 = 0.0, s11 = 0.0, t0 = 0.0, t1 = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double e = -std::exp(-pts[i].replicas / rate);
        s00 += w[i];
        s01 += w[i] * e;
        s11 += w[i] * e * e;
        t0 += w[i] * pts[i].probability;
        t1 += w[i] * e * pts[i].probability;
    }
    const double det = s00 * s11 - s01 * s01;
    LinearFit f{};
    if (std::abs(det) <= 1e-14 * s00 * s11) {
        f.p_inf = t0 / s00;
        f.amplitude = 0.0;
    } else {
        f.p_inf = (s11 * t0 - s01 * t1) / det;
        f.amplitude = (s00 * t1 - s01 * t0) / det;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double r = pts[i].probability - (f.p_inf - f.amplitude * std::exp(-pts[i].replicas / rate));
        f.chi2 += w[i] * r * r;
    }
    return f;
}

}  // namespace

RFit fit_success_vs_r(const std::vector<RPoint>& points, std::optional<double> reference) {
    std::vector<double> distinct;
    for (const auto& p : points) distinct.push_back(p.replicas);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 4) throw std::invalid_argument("the R fit needs at least 4 distinct replica counts");

    std::vector<double> w;
    for (const auto& p : points) {
        if (p.samples == 0) throw std::invalid_argument("R fit point without samples");
        const double m = static_cast<double>(p.samples);
        const double shrunk = (p.probability * m + 0.5) / (m + 1.0);
        w.push_back(m / (shrunk * (1.0 - shrunk)));
    }

    // Rate search over a log grid, then golden-section refinement.
    const double lo = std::log(0.05);
    const double hi = std::log(1000.0);
    constexpr int kGrid = 400;
    int best = 0;
    double best_chi2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kGrid; ++i) {
        const double c = std::exp(lo + (hi - lo) * i / kGrid);
        const double chi2 = solve_linear(points, w, c).chi2;
        if (i == 0 || chi2 < best_chi2 - 1e-15 * best_chi2) {
            best_chi2 = chi2;
            best = i;
        }
    }
    RFit fit;
    fit.reference = reference;
    fit.flagged = best == 0 || best == kGrid;
    double a = lo + (hi - lo) * std::max(best - 1, 0) / kGrid;
    double b = lo + (hi - lo) * std::min(best + 1, kGrid) / kGrid;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100 && b - a > 1e-12; ++it) {
        const double x1 = b - phi * (b - a);
        const double x2 = a + phi * (b - a);
        if (solve_linear(points, w, std::exp(x1)).chi2 <= solve_linear(points, w, std::exp(x2)).chi2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    fit.rate = std::exp(0.5 * (a + b));
    const LinearFit lin = solve_linear(points, w, fit.rate);
    fit.p_inf = lin.p_inf;
    fit.amplitude = lin.amplitude;
    fit.chi2 = lin.chi2;
    fit.dof = static_cast<int>(points.size()) - 3;

    Eigen::Matrix3d info = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double e = std::exp(-points[i].replicas / fit.rate);
        fit.residuals.push_back(points[i].probability - (fit.p_inf - fit.amplitude * e));
        const Eigen::Vector3d j(1.0, -e, -fit.amplitude * e * points[i].replicas / (fit.rate * fit.rate));
        info += w[i] * j * j.transpose();
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(info);
    if (lu.rank() < 3) {
        fit.flagged = true;
        fit.se_p_inf = fit.se_amplitude = fit.se_rate = std::numeric_limits<double>::infinity();
    } else {
        const Eigen::Matrix3d cov = lu.inverse();
        fit.se_p_inf = std::sqrt(std::max(cov(0, 0), 0.0));
        fit.se_amplitude = std::sqrt(std::max(cov(1, 1), 0.0));
        fit.se_rate = std::sqrt(std::max(cov(2, 2), 0.0));
    }
    return fit;
}

std::vector<RPoint> r_series(const SweepTable& table, std::size_t n, double lambda, Algorithm algorithm) {
    std::vector<RPoint> out;
    for (const auto& r : table.rows) {
        if (r.n != n || r.algorithm != algorithm) continue;
        if (std::abs(r.lambda - lambda) > 1e-12 * std::max(1.0, std::abs(lambda))) continue;
        out.push_back({static_cast<double>(r.replicas), r.detection_probability, r.samples});
    }
    std::sort(out.begin(), out.end(), [](const RPoint& a, const RPoint& b) { return a.replicas < b.replicas; });
    return out;
}

}  // namespace tpca
