#include "tpca/packed_index.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace tpca {

namespace {

// C(m, r) with overflow detection; exact at every step because the running
// product of i consecutive integers is divisible by i!.
bool checked_binomial(std::uint64_t m, std::uint64_t r, std::uint64_t& out) {
    if (r > m) {
        out = 0;
        return true;
    }
    r = std::min(r, m - r);
    unsigned __int128 acc = 1;
    for (std::uint64_t i = 1; i <= r; ++i) {
        acc = acc * (m - r + i) / i;
        if (acc > std::numeric_limits<std::uint64_t>::max()) return false;
    }
    out = static_cast<std::uint64_t>(acc);
    return true;
}

}  // namespace

std::uint64_t packed_size(std::uint64_t n, int k) {
    if (k < 1 || k > kMaxOrder) throw std::invalid_argument("tensor order must be in [1, " + std::to_string(kMaxOrder) + "]");
    std::uint64_t out = 0;
    if (n + k - 1 < n || !checked_binomial(n + k - 1, static_cast<std::uint64_t>(k), out)) {
        throw std::overflow_error("packed size C(" + std::to_string(n) + "+" + std::to_string(k) + "-1, " +
                                  std::to_string(k) + ") overflows 64 bits");
    }
    return out;
}

std::uint32_t PackedIndex::distinct_index(int a) const {
    int pos = 0;
    for (int d = 0; d < a; ++d) pos += multiplicities[d];
    return indices[pos];
}

PackedLayout::PackedLayout(std::uint64_t n, int k) : n_(n), k_(k), size_(packed_size(n, k)) {
    const std::uint64_t width = n + k + 1;
    table_.resize(static_cast<std::size_t>(k) * width);
    for (int j = 0; j < k; ++j) {
        for (std::uint64_t m = 0; m < width; ++m) {
            std::uint64_t c = 0;
            // Entries beyond the last valid rank may overflow; they are never read.
            if (!checked_binomial(m, static_cast<std::uint64_t>(j + 1), c)) c = std::numeric_limits<std::uint64_t>::max();
            table_[static_cast<std::size_t>(j) * width + m] = c;
        }
    }
}

std::uint64_t PackedLayout::offset_sorted(std::span<const std::uint32_t> sorted) const {
    std::uint64_t off = 0;
    for (int j = 0; j < k_; ++j) off += binom(j, sorted[j] + static_cast<std::uint64_t>(j));
    return off;
}

std::uint64_t PackedLayout::offset(std::span<const std::uint32_t> tuple) const {
    std::array<std::uint32_t, kMaxOrder> sorted{};
    std::copy(tuple.begin(), tuple.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.begin() + k_);
    return offset_sorted({sorted.data(), static_cast<std::size_t>(k_)});
}

PackedIndex PackedLayout::unrank(std::uint64_t offset) const {
    if (offset >= size_) throw std::out_of_range("packed offset out of range");
    PackedIndex idx;
    idx.order = k_;
    idx.offset = offset;
    std::uint64_t rest = offset;
    std::uint64_t upper = n_ + k_ - 1;  // c_{k-1} < n + k - 1
    for (int j = k_ - 1; j >= 0; --j) {
        // Largest c < upper with C(c, j + 1) <= rest.
        std::uint64_t lo = static_cast<std::uint64_t>(j), hi = upper;
        while (hi - lo > 1) {
            const std::uint64_t mid = lo + (hi - lo) / 2;
            if (binom(j, mid) <= rest) lo = mid; else hi = mid;
        }
        rest -= binom(j, lo);
        idx.indices[j] = static_cast<std::uint32_t>(lo - j);
        upper = lo;
    }
    compute_multiplicities(idx);
    return idx;
}

void compute_multiplicities(PackedIndex& idx) {
    idx.distinct = 0;
    for (int p = 0; p < idx.order; ++p) {
        if (p == 0 || idx.indices[p] != idx.indices[p - 1]) {
            idx.multiplicities[idx.distinct++] = 1;
        } else {
            ++idx.multiplicities[idx.distinct - 1];
        }
    }
}

double multiplicity_factorial(const PackedIndex& idx) {
    static constexpr double fact[kMaxOrder + 1] = {1, 1, 2, 6, 24, 120, 720, 5040, 40320};
    double out = 1.0;
    for (int d = 0; d < idx.distinct; ++d) out *= fact[idx.multiplicities[d]];
    return out;
}

MultisetCursor::MultisetCursor(std::uint64_t n, int k) : n_(n) {
    if (k < 1 || k > kMaxOrder) throw std::invalid_argument("tensor order out of range");
    idx_.order = k;
    done_ = (n == 0);
    compute_multiplicities(idx_);
}

void MultisetCursor::next() {
    const int k = idx_.order;
    int j = 0;
    ++idx_.indices[0];
    while (j < k - 1 && idx_.indices[j] > idx_.indices[j + 1]) {
        idx_.indices[j] = 0;
        ++idx_.indices[++j];
    }
    if (idx_.indices[k - 1] >= n_) {
        done_ = true;
        return;
    }
    // Indices below j were reset to zero.
    for (int p = 0; p < j; ++p) idx_.indices[p] = 0;
    ++idx_.offset;
    compute_multiplicities(idx_);
}

}  // namespace tpca
