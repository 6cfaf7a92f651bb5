#include "tpca/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tpca {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void normalize(std::vector<double>& v) {
    const double norm = std::sqrt(dot(v, v));
    for (double& x : v) x /= norm;
}

}  // namespace

SpectralResult smallest_eigvec(const SymmetricMatrix& m, std::uint32_t max_iters, double tol,
                               const std::vector<double>* start) {
    const std::size_t n = m.dim();
    if (n == 0) throw std::invalid_argument("empty matrix");
    double shift = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (double a : m.row(i)) row += std::abs(a);
        shift = std::max(shift, row);
    }

    std::vector<double> v(n);
    if (start != nullptr && start->size() == n && dot(*start, *start) > 0.0) {
        v = *start;
    } else {
        // Deterministic start with no special alignment to coordinate axes.
        for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * std::sin(1.0 + 2.3 * static_cast<double>(i));
    }
    normalize(v);

    SpectralResult out;
    std::vector<double> mv(n);
    m.multiply(v, mv);
    double rayleigh = dot(v, mv);
    for (std::uint32_t it = 1; it <= max_iters; ++it) {
        // v <- (c I - M) v
        for (std::size_t i = 0; i < n; ++i) v[i] = shift * v[i] - mv[i];
        const double norm = std::sqrt(dot(v, v));
        if (norm == 0.0) break;
        for (double& x : v) x /= norm;
        m.multiply(v, mv);
        const double next = dot(v, mv);
        out.iterations = it;
        const bool done = std::abs(next - rayleigh) < tol;
        rayleigh = next;
        if (done) {
            out.converged = true;
            break;
        }
    }

    std::size_t pivot = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(v[i]) > std::abs(v[pivot])) pivot = i;
    }
    const double scale = (v[pivot] < 0.0 ? -1.0 : 1.0) * std::sqrt(static_cast<double>(n));
    for (double& x : v) x *= scale;
    out.eigenvalue = rayleigh;
    out.vector = std::move(v);
    return out;
}

}  // namespace tpca
