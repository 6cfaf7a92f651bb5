#pragma once

// Full-loop reference implementations. They read tensor entries one tuple at
// a time through SpikedTensorProblem::value and share no traversal code with
// the packed kernels.

#include <cstdint>
#include <functional>
#include <vector>

#include "tpca/problem.hpp"

namespace tpca::naive {

inline double entry(const SpikedTensorProblem& p, const std::vector<std::uint32_t>& t) {
    return p.value(std::span<const std::uint32_t>(t));
}

/// Calls f on every non-decreasing k-tuple.
inline void for_each_sorted(std::size_t n, int k, const std::function<void(const std::vector<std::uint32_t>&)>& f) {
    std::vector<std::uint32_t> t(static_cast<std::size_t>(k), 0);
    std::function<void(int, std::uint32_t)> rec = [&](int pos, std::uint32_t lo) {
        if (pos == k) {
            f(t);
            return;
        }
        for (std::uint32_t i = lo; i < n; ++i) {
            t[pos] = i;
            rec(pos + 1, i);
        }
    };
    rec(0, 0);
}

/// Calls f on every ordered m-tuple.
inline void for_each_ordered(std::size_t n, int m, const std::function<void(const std::vector<std::uint32_t>&)>& f) {
    std::vector<std::uint32_t> t(static_cast<std::size_t>(m), 0);
    std::function<void(int)> rec = [&](int pos) {
        if (pos == m) {
            f(t);
            return;
        }
        for (std::uint32_t i = 0; i < n; ++i) {
            t[pos] = i;
            rec(pos + 1);
        }
    };
    rec(0);
}

inline double energy(const SpikedTensorProblem& p, const std::vector<double>& x) {
    double h = 0.0;
    for_each_sorted(p.dim(), p.order(), [&](const auto& t) {
        double prod = entry(p, t);
        for (auto i : t) prod *= x[i];
        h -= prod;
    });
    return h;
}

inline std::vector<double> gradient(const SpikedTensorProblem& p, const std::vector<double>& x) {
    std::vector<double> g(p.dim(), 0.0);
    const int k = p.order();
    for_each_sorted(p.dim(), k, [&](const auto& t) {
        const double v = entry(p, t);
        for (int q = 0; q < k; ++q) {
            double prod = v;
            for (int s = 0; s < k; ++s) {
                if (s != q) prod *= x[t[s]];
            }
            g[t[q]] -= prod;
        }
    });
    return g;
}

/// D_i = sum over ordered pair indices of T(i, j1, j1, j2, j2, ...), odd k.
inline std::vector<double> pair_vector(const SpikedTensorProblem& p) {
    const int pairs = (p.order() - 1) / 2;
    std::vector<double> d(p.dim(), 0.0);
    for (std::uint32_t i = 0; i < p.dim(); ++i) {
        for_each_ordered(p.dim(), pairs, [&](const auto& js) {
            std::vector<std::uint32_t> t{i};
            for (auto j : js) {
                t.push_back(j);
                t.push_back(j);
            }
            d[i] += entry(p, t);
        });
    }
    return d;
}

/// M_ij = -sum over ordered pair indices of T(i, j, l1, l1, ...), even k.
/// Row-major n x n.
inline std::vector<double> pair_matrix(const SpikedTensorProblem& p) {
    const int pairs = (p.order() - 2) / 2;
    const std::size_t n = p.dim();
    std::vector<double> m(n * n, 0.0);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < n; ++j) {
            for_each_ordered(n, pairs, [&](const auto& ls) {
                std::vector<std::uint32_t> t{i, j};
                for (auto l : ls) {
                    t.push_back(l);
                    t.push_back(l);
                }
                m[i * n + j] -= entry(p, t);
            });
        }
    }
    return m;
}

}  // namespace tpca::naive
