#include "tpca/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tpca {

namespace {

void require_order(int k) {
    if (k < 3) throw std::invalid_argument("landscape formulas need k >= 3, got " + std::to_string(k));
}

double sigma_unchecked(int k, double theta) {
    return 0.5 * std::log(k - 1.0) + 2.0 / k - 1.75 + (1.0 - 0.25 * theta) * theta - 0.5 * std::log(theta);
}

}  // namespace

std::optional<double> complexity(int k, double theta) {
    require_order(k);
    if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
    if (theta <= 1.0) return std::nullopt;
    return sigma_unchecked(k, theta);
}

double theta_star(int k) {
    require_order(k);
    double lo = 1.0;
    double hi = 10.0;
    if (!(sigma_unchecked(k, lo) > 0.0 && sigma_unchecked(k, hi) < 0.0)) {
        throw std::logic_error("complexity does not change sign on (1, 10]");
    }
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        (sigma_unchecked(k, mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double criterion_constant(int k) { return theta_star(k) / std::sqrt(2.0 * k * (k - 1)); }

double scaled_overlap(int k, double snr, double m) {
    require_order(k);
    return std::sqrt(2.0 * k * (k - 1)) * snr * std::pow(m, k - 2);
}

double ReferenceConstants::lambda_c(double n) const { return lambda_c_prefactor * std::pow(n, 0.25); }

std::vector<ReferenceConstant> ReferenceConstants::entries() const {
    return {
        {"lambda_it_k3", lambda_it_k3, "information-theoretic recovery threshold, k = 3"},
        {"threshold_energy", threshold_energy, "per-site energy above which uncorrelated minima are absent, k = 3"},
        {"lambda_c_prefactor", lambda_c_prefactor, "iAGD 50% detection threshold divided by n^(1/4), k = 3"},
        {"success_threshold", success_threshold, "lambda * m_I above which iAGD and SiAGD detect the signal"},
        {"detection_overlap", detection_overlap, "final overlap above which a run counts as a detection"},
    };
}

ReferenceConstants reference_constants() { return {}; }

ScalingPredictors scaling_predictors(int k, double n, double replicas) {
    require_order(k);
    if (!(n >= 1.0)) throw std::invalid_argument("n must be >= 1");
    if (!(replicas >= 1.0)) throw std::invalid_argument("replicas must be >= 1");
    ScalingPredictors s;
    s.lambda_gd = std::pow(n, 0.5 * (k - 2));
    s.r_opt = std::pow(n, 0.5 * (k - 1));
    const double r = std::min(replicas, s.r_opt);
    s.lambda_sagd = s.lambda_gd * std::pow(r, -0.5 * (k - 2) / (k - 1));
    s.lambda_sagd_best = std::pow(n, 0.25 * (k - 2));
    return s;
}

double bbp_lambda(int k, double n) {
    if (k < 2) throw std::invalid_argument("k must be >= 2");
    double f = 1.0;
    for (int i = 2; i <= k - 2; ++i) f *= i;
    return f * std::pow(n, 0.25 * (k - 2));
}

ComplexityReport complexity_report(int k, double n, double snr, double m, double replicas) {
    ComplexityReport r;
    r.k = k;
    r.n = n;
    r.snr = snr;
    r.m = m;
    r.replicas = replicas;
    r.theta = scaled_overlap(k, snr, m);
    r.sigma = r.theta > 0.0 ? complexity(k, r.theta) : std::nullopt;
    r.theta_star = theta_star(k);
    r.c_k = r.theta_star / std::sqrt(2.0 * k * (k - 1));
    r.bbp_lambda = bbp_lambda(k, n);
    r.scaling = scaling_predictors(k, n, replicas);
    return r;
}

std::vector<ComplexityRow> complexity_table(int k, double theta_min, double theta_max, int points) {
    require_order(k);
    if (points < 1) throw std::invalid_argument("points must be >= 1");
    if (!(theta_min > 0.0) || !(theta_max >= theta_min)) throw std::invalid_argument("need 0 < theta_min <= theta_max");
    std::vector<ComplexityRow> rows;
    rows.reserve(points);
    for (int i = 0; i < points; ++i) {
        const double t = points == 1 ? theta_min : theta_min + (theta_max - theta_min) * i / (points - 1);
        rows.push_back({t, complexity(k, t)});
    }
    return rows;
}

}  // namespace tpca
