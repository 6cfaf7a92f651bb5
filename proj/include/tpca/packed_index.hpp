#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace tpca {

/// Largest tensor order supported by the packed layout.
inline constexpr int kMaxOrder = 8;

/// Number of unordered index multisets, C(n + k - 1, k). Throws
/// std::overflow_error when the count does not fit in 64 bits.
std::uint64_t packed_size(std::uint64_t n, int k);

/// Sorted index multiset i_0 <= i_1 <= ... <= i_{k-1} together with its
/// multiplicity profile and its position in packed storage.
struct PackedIndex {
    std::array<std::uint32_t, kMaxOrder> indices{};
    std::array<std::uint8_t, kMaxOrder> multiplicities{};  // one entry per distinct index
    int order = 0;
    int distinct = 0;
    std::uint64_t offset = 0;

    std::span<const std::uint32_t> multiset() const { return {indices.data(), static_cast<std::size_t>(order)}; }
    std::uint32_t distinct_index(int a) const;
};

/// Colexicographic packed layout of a symmetric order-k tensor over n indices.
///
/// The offset of i_0 <= ... <= i_{k-1} is sum_j C(i_j + j, j + 1): the
/// combinadic rank of the strictly increasing tuple (i_j + j). Consecutive
/// offsets advance the smallest index first, so for fixed (i_1, ..., i_{k-1})
/// the entries i_0 = 0..i_1 are contiguous.
class PackedLayout {
public:
    PackedLayout() = default;
    PackedLayout(std::uint64_t n, int k);

    std::uint64_t dim() const { return n_; }
    int order() const { return k_; }
    std::uint64_t size() const { return size_; }

    /// C(m, j + 1) for m <= n + k.
    std::uint64_t binom(int j, std::uint64_t m) const { return table_[static_cast<std::size_t>(j) * (n_ + k_ + 1) + m]; }

    /// Offset of an index tuple in any order; the tuple is sorted internally.
    std::uint64_t offset(std::span<const std::uint32_t> tuple) const;
    /// Offset of an already sorted tuple.
    std::uint64_t offset_sorted(std::span<const std::uint32_t> sorted) const;

    PackedIndex unrank(std::uint64_t offset) const;

private:
    std::uint64_t n_ = 0;
    int k_ = 0;
    std::uint64_t size_ = 0;
    std::vector<std::uint64_t> table_;
};

/// Fills the multiplicity profile of a sorted multiset.
void compute_multiplicities(PackedIndex& idx);

/// prod_j m_j! over the multiplicity profile.
double multiplicity_factorial(const PackedIndex& idx);

/// Walks every multiset in packed-storage order.
class MultisetCursor {
public:
    MultisetCursor(std::uint64_t n, int k);

    bool done() const { return done_; }
    const PackedIndex& current() const { return idx_; }
    void next();

private:
    std::uint64_t n_;
    PackedIndex idx_;
    bool done_ = false;
};

}  // namespace tpca
