#pragma once

#include <cstdint>
#include <vector>

#include "tpca/contractions.hpp"

namespace tpca {

struct SpectralResult {
    double eigenvalue = 0.0;
    /// Eigenvector with norm sqrt(n).
    std::vector<double> vector;
    std::uint32_t iterations = 0;
    bool converged = false;
};

/// Smallest eigenpair of a symmetric matrix by power iteration on c I - M,
/// c the largest absolute row sum. Stops once successive Rayleigh quotients
/// differ by less than `tol`. The sign is fixed so the largest-magnitude
/// component is positive; callers apply their own consistency rule.
SpectralResult smallest_eigvec(const SymmetricMatrix& m, std::uint32_t max_iters, double tol,
                               const std::vector<double>* start = nullptr);

}  // namespace tpca
