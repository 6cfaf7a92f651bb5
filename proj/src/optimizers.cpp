#include "tpca/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tpca/spectral.hpp"

namespace tpca {

namespace {

constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kReplicaStream = 12;

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

void rescale_to_sphere(std::vector<double>& x) {
    const double r = radius(x);
    if (!(r > 0.0)) throw std::invalid_argument("cannot rescale a zero vector onto the sphere");
    const double inv = 1.0 / r;
    for (double& xi : x) xi *= inv;
}

class Recorder {
public:
    Recorder(const SpikedTensorProblem& problem, const RunConfig& config, RunResult& result)
        : problem_(problem), stride_(config.trajectory_stride), result_(result) {}

    bool wants(std::uint64_t iter) const { return stride_ != 0 && iter % stride_ == 0; }

    void record(double t, std::span<const double> x, double r, double energy) {
        const double n = static_cast<double>(problem_.dim());
        result_.trajectory.push_back({t, r, overlap(problem_, x).m, energy / n});
    }

private:
    const SpikedTensorProblem& problem_;
    std::uint32_t stride_;
    RunResult& result_;
};

// The sign of the signal is unidentifiable for even k, so detection uses |m|.
bool is_detected(const SpikedTensorProblem& problem, double m, const RunResult& result, const RunConfig& config) {
    const double score = problem.order() % 2 == 0 ? std::abs(m) : m;
    return !result.flagged() && score > config.detection_threshold;
}

void end_regime1(const SpikedTensorProblem& problem, std::span<const double> x, RunResult& result) {
    result.m_I = overlap(problem, x).m;
    result.energy_I = energy(problem, x) / static_cast<double>(problem.dim());
}

// Regime 2: GD on the sphere from x until |dx| < eps or max_iters.
void gd_phase(const SpikedTensorProblem& problem, std::vector<double> x, const RunConfig& config, RunResult& result,
              double t0) {
    const std::size_t n = problem.dim();
    const double eps = config.eps(n);
    Recorder rec(problem, config, result);
    std::vector<double> grad(n);
    std::vector<double> prev(n);
    bool converged = false;
    std::uint64_t it = 0;
    while (it < config.max_iters) {
        prev = x;
        const double h = gd_step(problem, x, config.learning_rate, grad);
        if (rec.wants(it)) rec.record(t0 + static_cast<double>(it) * config.learning_rate, prev, 1.0, h);
        ++it;
        if (distance(x, prev) < eps) {
            converged = true;
            break;
        }
    }
    if (!converged) result.flags |= kFlagMaxIters;
    result.iters_regime2 = it;
    result.m_II = overlap(problem, x).m;
    result.energy_final = energy(problem, x) / static_cast<double>(n);
    if (config.trajectory_stride != 0) {
        rec.record(t0 + static_cast<double>(it) * config.learning_rate, x, 1.0, result.energy_final * static_cast<double>(n));
    }
    result.detected = is_detected(problem, result.m_II, result, config);
    result.x_final = std::move(x);
}

void finish_without_regime2(const SpikedTensorProblem& problem, std::vector<double> x, const RunConfig& config,
                            RunResult& result) {
    result.m_II = x.empty() ? 0.0 : overlap(problem, x).m;
    result.energy_final = x.empty() ? 0.0 : energy(problem, x) / static_cast<double>(problem.dim());
    result.detected = is_detected(problem, result.m_II, result, config);
    result.x_final = std::move(x);
}

// After regime 1 left the centre of mass strictly inside the ball.
std::vector<double> land_on_sphere(std::vector<double> x, RunResult& result) {
    if (radius(x) == 0.0) {
        result.flags |= kFlagStationary;
        return {};
    }
    rescale_to_sphere(x);
    return x;
}

// Even-k sign at t = 0: keep the orientation with lower energy at +-w; ties
// keep the eigen-solver's orientation.
void orient_by_energy(const SpikedTensorProblem& problem, std::vector<double>& w, std::span<const double> base,
                      double step) {
    std::vector<double> plus(w.size()), minus(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        plus[i] = base[i] + step * w[i];
        minus[i] = base[i] - step * w[i];
    }
    if (energy(problem, minus) < energy(problem, plus)) {
        for (double& wi : w) wi = -wi;
    }
}

}  // namespace

std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::GD: return "GD";
        case Algorithm::AGD: return "AGD";
        case Algorithm::AGDAuto: return "AGD-auto";
        case Algorithm::iAGD: return "iAGD";
        case Algorithm::SiAGD: return "SiAGD";
        case Algorithm::PowerMethod: return "PowerMethod";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view s) {
    for (Algorithm a : {Algorithm::GD, Algorithm::AGD, Algorithm::AGDAuto, Algorithm::iAGD, Algorithm::SiAGD,
                        Algorithm::PowerMethod}) {
        if (s == to_string(a)) return a;
    }
    if (s == "Power" || s == "Homotopy") return Algorithm::PowerMethod;
    throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

double RunConfig::eps(std::size_t n) const {
    return stop_eps.value_or(1e-8 * std::sqrt(static_cast<double>(n)));
}

void RunConfig::validate() const {
    if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(euler_step > 0.0)) throw std::invalid_argument("euler step must be positive");
    if (stop_eps && !(*stop_eps > 0.0)) throw std::invalid_argument("stop_eps must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (spectral_iters < 1) throw std::invalid_argument("spectral_iters must be >= 1");
    if (!(spectral_tol > 0.0)) throw std::invalid_argument("spectral_tol must be positive");
}

double gd_step(const SpikedTensorProblem& problem, std::vector<double>& x, double eta, std::vector<double>& grad) {
    const double h = energy_and_gradient(problem, x, grad);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= eta * grad[i];
    rescale_to_sphere(x);
    return h;
}

SphereState agd_step(const SpikedTensorProblem& problem, const SphereState& center, std::uint32_t replicas,
                     double eta, RandomStream& rng) {
    const std::size_t n = problem.dim();
    std::vector<double> x(center.x().begin(), center.x().end());
    std::vector<double> grad(n);
    if (center.on_sphere()) {
        gd_step(problem, x, eta, grad);
        return project_to_sphere(std::move(x));
    }
    std::vector<double> points(static_cast<std::size_t>(replicas) * n);
    for (std::uint32_t a = 0; a < replicas; ++a) {
        const auto xa = sample_replica(center, rng);
        std::copy(xa.begin(), xa.end(), points.begin() + static_cast<std::ptrdiff_t>(a * n));
    }
    gradient_sum(problem, points, replicas, grad);
    const double step = eta / static_cast<double>(replicas);
    for (std::size_t i = 0; i < n; ++i) x[i] -= step * grad[i];
    return retract(std::move(x));
}

SphereState iagd_step(const SpikedTensorProblem& problem, std::span<const double> pair_vector,
                      const SphereState& center, double dt) {
    const std::size_t n = problem.dim();
    std::vector<double> x(center.x().begin(), center.x().end());
    std::vector<double> dir(n);
    if (center.on_sphere()) {
        gd_step(problem, x, dt, dir);
        return project_to_sphere(std::move(x));
    }
    averaged_descent_k3(problem, pair_vector, x, center.r(), dir);
    for (std::size_t i = 0; i < n; ++i) x[i] += dt * dir[i];
    return retract(std::move(x));
}

std::vector<double> siagd_landing(const SpikedTensorProblem& problem, const RunConfig& config, RunResult& result) {
    const std::size_t n = problem.dim();
    if (problem.order() % 2 == 1) {
        std::vector<double> d = pair_contraction_vector(problem);
        if (radius(d) == 0.0) {
            result.flags |= kFlagStationary;
            return {};
        }
        rescale_to_sphere(d);
        return d;
    }
    SpectralResult spec = smallest_eigvec(pair_contraction_matrix(problem), config.spectral_iters, config.spectral_tol);
    if (!spec.converged) result.flags |= kFlagSpectralNotConverged;
    const std::vector<double> origin(n, 0.0);
    orient_by_energy(problem, spec.vector, origin, 1.0);
    return std::move(spec.vector);
}

RunResult run_gd(const SpikedTensorProblem& problem, const SphereState& x0, const RunConfig& config) {
    config.validate();
    if (x0.dim() != problem.dim()) throw std::invalid_argument("initial point has wrong length");
    if (std::abs(x0.r() - 1.0) > 1e-9) throw std::invalid_argument("GD must start on the sphere");
    RunResult result;
    std::vector<double> x(x0.x().begin(), x0.x().end());
    end_regime1(problem, x, result);
    gd_phase(problem, std::move(x), config, result, 0.0);
    return result;
}

RunResult run_gd(const SpikedTensorProblem& problem, const RunConfig& config) {
    RandomStream rng(config.rng_seed, kInitStream);
    return run_gd(problem, SphereState(project_to_sphere(uniform_on_sphere(problem.dim(), rng))), config);
}

RunResult run_agd(const SpikedTensorProblem& problem, const RunConfig& config) {
    config.validate();
    const std::size_t n = problem.dim();
    const double eps = config.eps(n);
    RunResult result;
    Recorder rec(problem, config, result);
    RandomStream rng(config.rng_seed, kReplicaStream);
    SphereState center = retract(std::vector<double>(n, 0.0));
    bool stalled = false;
    std::uint64_t it = 0;
    while (it < config.max_iters && !center.on_sphere()) {
        if (rec.wants(it)) {
            rec.record(static_cast<double>(it) * config.learning_rate, center.x(), center.r(),
                       energy(problem, center.x()));
        }
        SphereState next = agd_step(problem, center, config.replicas, config.learning_rate, rng);
        const double moved = distance(next.x(), center.x());
        center = std::move(next);
        ++it;
        if (!center.on_sphere() && moved < eps) {
            stalled = true;
            break;
        }
    }
    result.iters_regime1 = it;
    const bool landed = center.on_sphere();
    std::vector<double> x = std::move(center).release();
    if (!landed) {
        result.flags |= stalled ? kFlagRegime1Stalled : kFlagMaxIters;
        x = land_on_sphere(std::move(x), result);
        if (x.empty()) {
            finish_without_regime2(problem, std::move(x), config, result);
            return result;
        }
    }
    end_regime1(problem, x, result);
    gd_phase(problem, std::move(x), config, result, static_cast<double>(it) * config.learning_rate);
    return result;
}

RunResult run_agd_auto(const SpikedTensorProblem& problem, const RunConfig& config) {
    config.validate();
    const std::size_t n = problem.dim();
    const double nd = static_cast<double>(n);
    const double eps = config.eps(n);
    const double eta = config.learning_rate;
    RunResult result;
    Recorder rec(problem, config, result);
    RandomStream rng(config.rng_seed, kReplicaStream);
    SphereState center = retract(std::vector<double>(n, 0.0));
    std::vector<double> prev_w;
    std::vector<double> points(static_cast<std::size_t>(config.replicas) * n);
    std::vector<double> grad(n);
    bool stalled = false;
    std::uint64_t it = 0;
    while (it < config.max_iters && !center.on_sphere()) {
        const auto x = center.x();
        SymmetricMatrix avg_hess(n);
        for (std::uint32_t a = 0; a < config.replicas; ++a) {
            const auto xa = sample_replica(center, rng);
            std::copy(xa.begin(), xa.end(), points.begin() + static_cast<std::ptrdiff_t>(a * n));
            const SymmetricMatrix h = hessian(problem, xa);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) avg_hess(i, j) += h(i, j) / config.replicas;
            }
        }
        gradient_sum(problem, points, config.replicas, grad);

        SpectralResult spec = smallest_eigvec(avg_hess, config.spectral_iters, config.spectral_tol,
                                              prev_w.empty() ? nullptr : &prev_w);
        if (!spec.converged) result.flags |= kFlagSpectralNotConverged;
        std::vector<double>& w = spec.vector;
        if (prev_w.empty()) {
            orient_by_energy(problem, w, x, eta);
        } else {
            if (dot(prev_w, w) < 0.0) {
                for (double& wi : w) wi = -wi;
            }
            result.min_spectral_alignment = std::min(result.min_spectral_alignment, dot(prev_w, w) / nd);
        }

        std::vector<double> by_grad(x.begin(), x.end());
        std::vector<double> by_spec(x.begin(), x.end());
        for (std::size_t i = 0; i < n; ++i) {
            by_grad[i] -= eta * grad[i] / config.replicas;
            by_spec[i] += eta * w[i];
        }
        SphereState cand_grad = retract(std::move(by_grad));
        SphereState cand_spec = retract(std::move(by_spec));
        const double h_grad = energy(problem, cand_grad.x());
        const double h_spec = energy(problem, cand_spec.x());
        if (rec.wants(it)) rec.record(static_cast<double>(it) * eta, x, center.r(), energy(problem, x));

        SphereState next = h_spec < h_grad ? std::move(cand_spec) : std::move(cand_grad);
        if (h_spec < h_grad) ++result.spectral_steps;
        prev_w = std::move(w);
        const double moved = distance(next.x(), center.x());
        center = std::move(next);
        ++it;
        if (!center.on_sphere() && moved < eps) {
            stalled = true;
            break;
        }
    }
    result.iters_regime1 = it;
    const bool landed = center.on_sphere();
    std::vector<double> x = std::move(center).release();
    if (!landed) {
        result.flags |= stalled ? kFlagRegime1Stalled : kFlagMaxIters;
        x = land_on_sphere(std::move(x), result);
        if (x.empty()) {
            finish_without_regime2(problem, std::move(x), config, result);
            return result;
        }
    }
    end_regime1(problem, x, result);
    gd_phase(problem, std::move(x), config, result, static_cast<double>(it) * eta);
    return result;
}

RunResult run_iagd(const SpikedTensorProblem& problem, const RunConfig& config) {
    config.validate();
    if (problem.order() != 3) {
        throw CapabilityError("iAGD dynamics are implemented for k = 3 only (got k = " +
                              std::to_string(problem.order()) + ")");
    }
    const std::size_t n = problem.dim();
    const double eps = config.eps(n);
    const double dt = config.euler_step;
    RunResult result;
    Recorder rec(problem, config, result);
    const std::vector<double> d = pair_contraction_vector(problem);
    std::vector<double> x(n, 0.0);
    std::vector<double> dir(n);
    double r = 0.0;
    bool stalled = false;
    std::uint64_t it = 0;
    while (it < config.max_iters) {
        const double h = averaged_descent_k3(problem, d, x, r, dir);
        if (rec.wants(it)) rec.record(static_cast<double>(it) * dt, x, r, h);
        double moved2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += dt * dir[i];
            moved2 += dt * dir[i] * dt * dir[i];
        }
        ++it;
        r = radius(x);
        if (r >= 1.0) break;
        if (std::sqrt(moved2) < eps) {
            stalled = true;
            break;
        }
    }
    result.iters_regime1 = it;
    if (r >= 1.0) {
        x = std::move(retract(std::move(x))).release();
    } else {
        result.flags |= stalled ? kFlagRegime1Stalled : kFlagMaxIters;
        x = land_on_sphere(std::move(x), result);
        if (x.empty()) {
            finish_without_regime2(problem, std::move(x), config, result);
            return result;
        }
    }
    end_regime1(problem, x, result);
    gd_phase(problem, std::move(x), config, result, static_cast<double>(it) * dt);
    return result;
}

RunResult run_siagd(const SpikedTensorProblem& problem, const RunConfig& config) {
    config.validate();
    RunResult result;
    std::vector<double> x = siagd_landing(problem, config, result);
    result.iters_regime1 = 1;
    if (x.empty()) {
        finish_without_regime2(problem, std::move(x), config, result);
        return result;
    }
    end_regime1(problem, x, result);
    if (config.trajectory_stride != 0) {
        result.trajectory.push_back({0.0, 0.0, 0.0, 0.0});
    }
    gd_phase(problem, std::move(x), config, result, 1.0);
    return result;
}

RunResult run_power_method(const SpikedTensorProblem& problem, const RunConfig& config) {
    config.validate();
    const std::size_t n = problem.dim();
    const double eps = config.eps(n);
    RunResult result;
    Recorder rec(problem, config, result);
    std::vector<double> x = siagd_landing(problem, config, result);
    result.iters_regime1 = 1;
    if (x.empty()) {
        finish_without_regime2(problem, std::move(x), config, result);
        return result;
    }
    end_regime1(problem, x, result);

    std::vector<double> grad(n);
    std::vector<double> prev;
    bool converged = false;
    std::uint64_t it = 0;
    while (it < config.max_iters) {
        const double h = energy_and_gradient(problem, x, grad);
        if (rec.wants(it)) rec.record(static_cast<double>(it), x, 1.0, h);
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) next[i] = -grad[i];
        if (radius(next) == 0.0) {
            result.flags |= kFlagStationary;
            break;
        }
        rescale_to_sphere(next);
        ++it;
        const double moved = distance(next, x);
        if (moved < eps) {
            x = std::move(next);
            converged = true;
            break;
        }
        // A damped oscillation also brings x(t+1) close to x(t-1); only a
        // two-step distance far below the stopping threshold counts as a cycle.
        if (!prev.empty() && distance(next, prev) < 1e-3 * eps) {
            result.flags |= kFlagTwoCycle;
            x = std::move(next);
            break;
        }
        prev = std::move(x);
        x = std::move(next);
    }
    if (!converged && (result.flags & (kFlagTwoCycle | kFlagStationary)) == 0) result.flags |= kFlagMaxIters;
    result.iters_regime2 = it;
    finish_without_regime2(problem, std::move(x), config, result);
    return result;
}

RunResult run(const SpikedTensorProblem& problem, const RunConfig& config) {
    switch (config.algorithm) {
        case Algorithm::GD: return run_gd(problem, config);
        case Algorithm::AGD: return run_agd(problem, config);
        case Algorithm::AGDAuto: return run_agd_auto(problem, config);
        case Algorithm::iAGD: return run_iagd(problem, config);
        case Algorithm::SiAGD: return run_siagd(problem, config);
        case Algorithm::PowerMethod: return run_power_method(problem, config);
    }
    throw std::invalid_argument("unknown algorithm");
}

}  // namespace tpca
