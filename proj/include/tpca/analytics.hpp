#pragma once

#include <optional>
#include <string>
#include <vector>

namespace tpca {

/// Annealed complexity of spurious minima at scaled overlap theta,
///   Sigma(theta) = ln(k-1)/2 + 2/k - 7/4 + (1 - theta/4) theta - ln(theta)/2.
/// The closed form holds for theta > 1 only; returns nullopt on (0, 1].
/// Throws std::invalid_argument for k < 3 or theta <= 0.
std::optional<double> complexity(int k, double theta);

/// Root of the complexity on (1, 10], by bisection to 1e-10.
double theta_star(int k);

/// lambda * m^(k-2) at which the complexity vanishes: theta_star(k) / sqrt(2k(k-1)).
double criterion_constant(int k);

/// theta = sqrt(2k(k-1)) * lambda * m^(k-2).
double scaled_overlap(int k, double snr, double m);

struct ReferenceConstant {
    std::string name;
    double value = 0.0;
    std::string description;
};

struct ReferenceConstants {
    double lambda_it_k3 = 2.95545;
    double threshold_energy = -0.27216552697590868;  // -sqrt(2/3)/3
    double lambda_c_prefactor = 0.37;
    double success_threshold = 0.33;
    double detection_overlap = 0.6;

    double lambda_c(double n) const;
    std::vector<ReferenceConstant> entries() const;
};

ReferenceConstants reference_constants();

/// Pure power laws with unit prefactor; only the exponents are meaningful.
struct ScalingPredictors {
    double lambda_gd = 0.0;         ///< n^((k-2)/2)
    double lambda_sagd = 0.0;       ///< n^((k-2)/2) * min(R, r_opt)^(-(k-2)/(2(k-1)))
    double lambda_sagd_best = 0.0;  ///< n^((k-2)/4)
    double r_opt = 0.0;             ///< n^((k-1)/2)
    bool up_to_constants = true;
};

ScalingPredictors scaling_predictors(int k, double n, double replicas);

/// (k-2)! * n^((k-2)/4): the even-k scale above which the averaged-Hessian
/// eigenvector correlates with the signal.
double bbp_lambda(int k, double n);

struct ComplexityReport {
    int k = 3;
    double n = 0.0;
    double snr = 0.0;
    double m = 0.0;
    double replicas = 1.0;

    double theta = 0.0;
    std::optional<double> sigma;
    double theta_star = 0.0;
    double c_k = 0.0;
    double bbp_lambda = 0.0;
    ScalingPredictors scaling;
};

ComplexityReport complexity_report(int k, double n, double snr, double m, double replicas);

struct ComplexityRow {
    double theta = 0.0;
    std::optional<double> sigma;
};

/// Sigma on `points` evenly spaced values of theta in [theta_min, theta_max].
std::vector<ComplexityRow> complexity_table(int k, double theta_min, double theta_max, int points);

}  // namespace tpca
