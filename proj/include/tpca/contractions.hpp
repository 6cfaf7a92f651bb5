#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tpca/problem.hpp"

namespace tpca {

/// Dense symmetric matrix, row-major, both triangles stored.
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;
    explicit SymmetricMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    std::size_t dim() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }
    std::span<const double> data() const { return data_; }

    void multiply(std::span<const double> x, std::span<double> y) const;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

/// H(x) = - sum_{i_1 <= ... <= i_k} T_{i_1..i_k} x_{i_1} ... x_{i_k}.
double energy(const SpikedTensorProblem& problem, std::span<const double> x);

/// Exact gradient of energy().
std::vector<double> gradient(const SpikedTensorProblem& problem, std::span<const double> x);

/// One pass computing both; returns H(x) and writes grad H into `grad`.
double energy_and_gradient(const SpikedTensorProblem& problem, std::span<const double> x, std::span<double> grad);

/// Sum of the gradients at several points, one pass over the tensor.
/// `points` holds the points back to back (points.size() == count * n).
void gradient_sum(const SpikedTensorProblem& problem, std::span<const double> points, std::size_t count,
                  std::span<double> grad_sum);

/// Hessian of energy() at x.
SymmetricMatrix hessian(const SpikedTensorProblem& problem, std::span<const double> x);

/// D_i = sum over ordered j_1..j_p of T_{i, j_1, j_1, ..., j_p, j_p}, p = (k-1)/2.
/// Odd k only.
std::vector<double> pair_contraction_vector(const SpikedTensorProblem& problem);

/// M_ij = - sum over ordered l_1..l_p of T_{i, j, l_1, l_1, ..., l_p, l_p},
/// p = (k-2)/2: the replica-averaged Hessian at the origin. Even k only.
SymmetricMatrix pair_contraction_matrix(const SpikedTensorProblem& problem);

/// How the replica average of the gradient is evaluated for k = 3.
enum class ReplicaAverage {
    /// Leading pairings: (1 - r^2) D - grad H(x_cm). The infinite-R dynamics.
    Paired,
    /// Exact expectation of -grad H over x_cm + sqrt(1 - r^2) u, u uniform on
    /// the tangent sphere of radius sqrt(n): also keeps the diagonal
    /// multiplicity term 2 T_iii and the n/(n-1) tangent covariance.
    Exact,
};

/// Descent direction of the replica-averaged gradient for k = 3 at centre of
/// mass x_cm with radius fraction r. Equals D at x_cm = 0 and -grad H(x_cm)
/// at r = 1 (Paired).
std::vector<double> averaged_gradient_k3(const SpikedTensorProblem& problem, std::span<const double> x_cm, double r,
                                         ReplicaAverage mode = ReplicaAverage::Paired);

/// Paired direction with a precomputed pair vector D, written to `direction`;
/// returns H(x_cm). Used by the iAGD integrator.
double averaged_descent_k3(const SpikedTensorProblem& problem, std::span<const double> pair_vector,
                           std::span<const double> x_cm, double r, std::span<double> direction);

}  // namespace tpca
