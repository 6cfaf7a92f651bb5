#include "tpca/contractions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tpca {

namespace {

void check_point(const SpikedTensorProblem& problem, std::span<const double> x) {
    if (x.size() != problem.dim()) {
        throw std::invalid_argument("point has length " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(problem.dim()));
    }
}

// k = 3 kernel. Walks packed storage in colex order: for each (j, l) with
// j <= l the entries i = 0..j are contiguous. Accumulates the field
// F = -grad H and returns -H.
template <class Elem>
double field_k3(std::span<const Elem> noise, std::span<const double> v, double a, double b,
                std::span<const double> x, double* field) {
    const std::size_t n = x.size();
    const double* xs = x.data();
    const double* vs = v.data();
    double neg_energy = 0.0;
    std::size_t base = 0;
    for (std::size_t l = 0; l < n; ++l) {
        const double xl = xs[l];
        const double avl = a * vs[l];
        for (std::size_t j = 0; j <= l; ++j) {
            const Elem* s = noise.data() + base;
            const double xjl = xs[j] * xl;
            const double c = avl * vs[j];
            double acc = 0.0;
#pragma omp simd reduction(+ : acc)
            for (std::size_t i = 0; i <= j; ++i) {
                const double t = b * static_cast<double>(s[i]) + c * vs[i];
                field[i] += t * xjl;
                acc += t * xs[i];
            }
            field[j] += acc * xl;
            field[l] += acc * xs[j];
            neg_energy += acc * xjl;
            base += j + 1;
        }
    }
    return neg_energy;
}

// Same walk for several points at once; only the field sum is produced.
// Points are transposed so the per-entry loop over points is contiguous.
template <class Elem>
void field_sum_k3(std::span<const Elem> noise, std::span<const double> v, double a, double b,
                  std::span<const double> points, std::size_t count, std::size_t n, double* field) {
    const double* vs = v.data();
    const double* pts = points.data();
    std::vector<double> t(n);
    std::size_t base = 0;
    for (std::size_t l = 0; l < n; ++l) {
        const double avl = a * vs[l];
        for (std::size_t j = 0; j <= l; ++j) {
            const Elem* s = noise.data() + base;
            const double c = avl * vs[j];
            double xjl_sum = 0.0;
            for (std::size_t q = 0; q < count; ++q) xjl_sum += pts[q * n + j] * pts[q * n + l];
            double* tp = t.data();
#pragma omp simd
            for (std::size_t i = 0; i <= j; ++i) {
                tp[i] = b * static_cast<double>(s[i]) + c * vs[i];
                field[i] += tp[i] * xjl_sum;
            }
            for (std::size_t q = 0; q < count; ++q) {
                const double* xq = pts + q * n;
                double acc = 0.0;
#pragma omp simd reduction(+ : acc)
                for (std::size_t i = 0; i <= j; ++i) acc += tp[i] * xq[i];
                field[j] += acc * xq[l];
                field[l] += acc * xq[j];
            }
            base += j + 1;
        }
    }
}

// Generic order: visits each multiset once and adds T * prod_{q != p} x to
// slot p, which yields the multiplicity factor of repeated indices.
double field_generic(const SpikedTensorProblem& problem, std::span<const double> x, double* field) {
    const int k = problem.order();
    double neg_energy = 0.0;
    std::array<double, kMaxOrder + 1> prefix{};
    std::array<double, kMaxOrder + 1> suffix{};
    for (MultisetCursor cur(problem.dim(), k); !cur.done(); cur.next()) {
        const PackedIndex& idx = cur.current();
        const double t = problem.value_at(idx);
        prefix[0] = 1.0;
        for (int p = 0; p < k; ++p) prefix[p + 1] = prefix[p] * x[idx.indices[p]];
        suffix[k] = 1.0;
        for (int p = k - 1; p >= 0; --p) suffix[p] = suffix[p + 1] * x[idx.indices[p]];
        neg_energy += t * prefix[k];
        if (field != nullptr) {
            for (int p = 0; p < k; ++p) field[idx.indices[p]] += t * prefix[p] * suffix[p + 1];
        }
    }
    return neg_energy;
}

double field(const SpikedTensorProblem& problem, std::span<const double> x, double* out) {
    if (problem.order() == 3) {
        return problem.visit_noise([&](auto noise) {
            return field_k3(noise, problem.signal(), problem.signal_coefficient(), problem.noise_coefficient(), x, out);
        });
    }
    return field_generic(problem, x, out);
}

double factorial(int m) {
    double f = 1.0;
    for (int i = 2; i <= m; ++i) f *= i;
    return f;
}

// Number of ordered tuples (j_1..j_p) whose doubled multiset equals the
// multiset with the given multiplicities; zero when some multiplicity is odd.
double pair_count(std::span<const int> mult, int pairs) {
    double denom = 1.0;
    for (int m : mult) {
        if (m % 2 != 0) return 0.0;
        denom *= factorial(m / 2);
    }
    return factorial(pairs) / denom;
}

}  // namespace

void SymmetricMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < n_; ++i) {
        const double* r = data_.data() + i * n_;
        double acc = 0.0;
        for (std::size_t j = 0; j < n_; ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
}

double energy(const SpikedTensorProblem& problem, std::span<const double> x) {
    check_point(problem, x);
    if (problem.order() == 3) {
        std::vector<double> scratch(problem.dim(), 0.0);
        return -field(problem, x, scratch.data());
    }
    return -field_generic(problem, x, nullptr);
}

double energy_and_gradient(const SpikedTensorProblem& problem, std::span<const double> x, std::span<double> grad) {
    check_point(problem, x);
    if (grad.size() != problem.dim()) throw std::invalid_argument("gradient buffer has wrong length");
    std::fill(grad.begin(), grad.end(), 0.0);
    const double neg_energy = field(problem, x, grad.data());
    for (double& g : grad) g = -g;
    return -neg_energy;
}

std::vector<double> gradient(const SpikedTensorProblem& problem, std::span<const double> x) {
    std::vector<double> g(problem.dim());
    energy_and_gradient(problem, x, g);
    return g;
}

void gradient_sum(const SpikedTensorProblem& problem, std::span<const double> points, std::size_t count,
                  std::span<double> grad_sum) {
    const std::size_t n = problem.dim();
    if (points.size() != count * n) throw std::invalid_argument("points buffer must hold count * n values");
    if (grad_sum.size() != n) throw std::invalid_argument("gradient buffer has wrong length");
    std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
    if (problem.order() == 3 && count > 1) {
        problem.visit_noise([&](auto noise) {
            field_sum_k3(noise, problem.signal(), problem.signal_coefficient(), problem.noise_coefficient(), points,
                         count, n, grad_sum.data());
        });
    } else {
        for (std::size_t q = 0; q < count; ++q) field(problem, points.subspan(q * n, n), grad_sum.data());
    }
    for (double& g : grad_sum) g = -g;
}

SymmetricMatrix hessian(const SpikedTensorProblem& problem, std::span<const double> x) {
    check_point(problem, x);
    const int k = problem.order();
    SymmetricMatrix hess(problem.dim());
    for (MultisetCursor cur(problem.dim(), k); !cur.done(); cur.next()) {
        const PackedIndex& idx = cur.current();
        const double t = problem.value_at(idx);
        if (t == 0.0) continue;
        for (int p = 0; p < k; ++p) {
            for (int q = 0; q < k; ++q) {
                if (p == q) continue;
                double prod = t;
                for (int s = 0; s < k; ++s) {
                    if (s != p && s != q) prod *= x[idx.indices[s]];
                }
                hess(idx.indices[p], idx.indices[q]) -= prod;
            }
        }
    }
    return hess;
}

std::vector<double> pair_contraction_vector(const SpikedTensorProblem& problem) {
    const int k = problem.order();
    if (k % 2 == 0) throw std::invalid_argument("pair contraction vector requires odd k, got " + std::to_string(k));
    const int pairs = (k - 1) / 2;
    std::vector<double> d(problem.dim(), 0.0);
    std::array<int, kMaxOrder> mult{};
    for (MultisetCursor cur(problem.dim(), k); !cur.done(); cur.next()) {
        const PackedIndex& idx = cur.current();
        const int distinct = idx.distinct;
        for (int a = 0; a < distinct; ++a) mult[a] = idx.multiplicities[a];
        double t = 0.0;
        bool have_t = false;
        for (int a = 0; a < distinct; ++a) {
            --mult[a];
            const double count = pair_count({mult.data(), static_cast<std::size_t>(distinct)}, pairs);
            ++mult[a];
            if (count == 0.0) continue;
            if (!have_t) {
                t = problem.value_at(idx);
                have_t = true;
            }
            d[idx.distinct_index(a)] += count * t;
        }
    }
    return d;
}

SymmetricMatrix pair_contraction_matrix(const SpikedTensorProblem& problem) {
    const int k = problem.order();
    if (k % 2 != 0) throw std::invalid_argument("pair contraction matrix requires even k, got " + std::to_string(k));
    const int pairs = (k - 2) / 2;
    SymmetricMatrix m(problem.dim());
    std::array<int, kMaxOrder> mult{};
    for (MultisetCursor cur(problem.dim(), k); !cur.done(); cur.next()) {
        const PackedIndex& idx = cur.current();
        const int distinct = idx.distinct;
        for (int a = 0; a < distinct; ++a) mult[a] = idx.multiplicities[a];
        double t = 0.0;
        bool have_t = false;
        for (int a = 0; a < distinct; ++a) {
            for (int b = 0; b < distinct; ++b) {
                --mult[a];
                --mult[b];
                const bool valid = mult[a] >= 0 && mult[b] >= 0;
                const double count =
                    valid ? pair_count({mult.data(), static_cast<std::size_t>(distinct)}, pairs) : 0.0;
                ++mult[a];
                ++mult[b];
                if (count == 0.0) continue;
                if (!have_t) {
                    t = problem.value_at(idx);
                    have_t = true;
                }
                m(idx.distinct_index(a), idx.distinct_index(b)) -= count * t;
            }
        }
    }
    return m;
}

double averaged_descent_k3(const SpikedTensorProblem& problem, std::span<const double> pair_vector,
                           std::span<const double> x_cm, double r, std::span<double> direction) {
    if (problem.order() != 3) throw std::invalid_argument("averaged gradient is implemented for k = 3 only");
    if (!(r >= 0.0) || r > 1.0 + 1e-12) throw std::invalid_argument("radius fraction r must lie in [0, 1]");
    check_point(problem, x_cm);
    std::fill(direction.begin(), direction.end(), 0.0);
    const double neg_energy = field(problem, x_cm, direction.data());
    const double w = std::max(0.0, 1.0 - r * r);
    if (w > 0.0) {
        for (std::size_t i = 0; i < direction.size(); ++i) direction[i] += w * pair_vector[i];
    }
    return -neg_energy;
}

std::vector<double> averaged_gradient_k3(const SpikedTensorProblem& problem, std::span<const double> x_cm, double r,
                                         ReplicaAverage mode) {
    if (problem.order() != 3) throw std::invalid_argument("averaged gradient is implemented for k = 3 only");
    const std::size_t n = problem.dim();
    std::vector<double> d = pair_contraction_vector(problem);
    std::vector<double> out(n);
    if (mode == ReplicaAverage::Paired) {
        averaged_descent_k3(problem, d, x_cm, r, out);
        return out;
    }

    if (!(r >= 0.0) || r > 1.0 + 1e-12) throw std::invalid_argument("radius fraction r must lie in [0, 1]");
    check_point(problem, x_cm);
    // -grad H is a quadratic form q(y); E[q(x + s u)] = q(x) + s^2 E[q(u)] and
    // E[u_a u_b] = c (delta_ab - xhat_a xhat_b), c = n/(n-1) when x != 0.
    std::fill(out.begin(), out.end(), 0.0);
    field(problem, x_cm, out.data());
    const double s2 = std::max(0.0, 1.0 - r * r);
    if (s2 == 0.0) return out;
    double norm2 = 0.0;
    for (double xi : x_cm) norm2 += xi * xi;
    std::vector<double> trace(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t diag[3] = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i),
                                       static_cast<std::uint32_t>(i)};
        trace[i] = d[i] + 2.0 * problem.value(diag);
    }
    if (norm2 == 0.0) {
        for (std::size_t i = 0; i < n; ++i) out[i] += s2 * trace[i];
        return out;
    }
    const double c = static_cast<double>(n) / static_cast<double>(n - 1);
    // q(xhat) = q(x) / |x|^2, and out currently holds q(x).
    for (std::size_t i = 0; i < n; ++i) {
        const double q_hat = out[i] / norm2;
        out[i] += s2 * c * (trace[i] - q_hat);
    }
    return out;
}

}  // namespace tpca
