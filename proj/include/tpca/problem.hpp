#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tpca/packed_index.hpp"

namespace tpca {

/// Storage precision of the packed noise. Contractions always accumulate in
/// double; Float32 halves the footprint of large k = 3 instances.
enum class Precision : std::uint8_t { Float64 = 0, Float32 = 1 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& s);

/// Variance rule for the packed noise S_tau.
///   Symmetrized: (prod_j m_j!) / k!, the law of averaging i.i.d. unit normals
///                over the k! index permutations.
///   Uniform:     1 / k! for every multiset, repeated indices included.
/// The two agree on all-distinct multisets and differ only on the O(1/n)
/// fraction with repeats, which is exactly what the pair contractions read.
enum class NoiseConvention : std::uint8_t { Symmetrized = 0, Uniform = 1 };

std::string to_string(NoiseConvention c);
NoiseConvention parse_noise_convention(const std::string& s);

/// Thrown when an instance would not fit the configured memory budget or
/// the addressable range.
class ResourceError : public std::runtime_error {
public:
    ResourceError(const std::string& what, std::uint64_t required_bytes)
        : std::runtime_error(what), required_bytes_(required_bytes) {}
    std::uint64_t required_bytes() const { return required_bytes_; }

private:
    std::uint64_t required_bytes_;
};

struct GenerateOptions {
    Precision precision = Precision::Float64;
    NoiseConvention convention = NoiseConvention::Symmetrized;
    /// Multiplies the noise term; 0 gives the pure-signal tensor.
    double noise_scale = 1.0;
    /// Planted direction; drawn uniformly on the sphere when absent. Rescaled
    /// to norm sqrt(n) either way.
    std::optional<std::vector<double>> signal;
    /// 0 means no budget beyond addressable memory.
    std::uint64_t memory_budget_bytes = 0;
};

/// Bytes needed for the packed noise of an order-k, dimension-n instance.
std::uint64_t required_bytes(int k, std::uint64_t n, Precision precision);

/// One spiked tensor instance.
///
/// The effective entry of the symmetric tensor at the multiset tau is
///   T_tau = snr / n^(k-1) * prod_{i in tau} v_i + noise_scale * n^(-(k-1)/2) * S_tau,
/// with S_tau a centered Gaussian whose variance follows the NoiseConvention
/// (by default (prod_j m_j!) / k!).
/// The energy sums T_tau over unordered multisets; the pair contractions sum
/// over ordered pair indices.
class SpikedTensorProblem {
public:
    int order() const { return k_; }
    std::size_t dim() const { return n_; }
    double snr() const { return snr_; }
    std::uint64_t seed() const { return seed_; }
    Precision precision() const { return precision_; }
    double noise_scale() const { return noise_scale_; }
    NoiseConvention convention() const { return convention_; }

    std::span<const double> signal() const { return signal_; }
    const PackedLayout& layout() const { return layout_; }
    std::uint64_t packed_size() const { return layout_.size(); }

    /// snr / n^(k-1)
    double signal_coefficient() const { return signal_coeff_; }
    /// noise_scale / n^((k-1)/2)
    double noise_coefficient() const { return noise_coeff_; }

    /// Raw symmetrized noise S_tau at a packed offset.
    double noise_at(std::uint64_t offset) const;
    /// Effective tensor entry at a multiset given in any order.
    double value(std::span<const std::uint32_t> tuple) const;
    double value_at(const PackedIndex& idx) const;

    /// Calls f with a std::span<const double> or std::span<const float>
    /// over the packed noise.
    template <class F>
    decltype(auto) visit_noise(F&& f) const {
        return std::visit([&](const auto& vec) -> decltype(auto) { return f(std::span(vec)); }, noise_);
    }

    friend SpikedTensorProblem generate(int k, std::size_t n, double snr, std::uint64_t seed,
                                        const GenerateOptions& options);
    friend SpikedTensorProblem from_packed(int k, std::size_t n, double snr, std::vector<double> signal,
                                           std::vector<double> packed_noise, double noise_scale);

private:
    SpikedTensorProblem() = default;
    void set_coefficients();

    int k_ = 0;
    std::size_t n_ = 0;
    double snr_ = 0.0;
    std::uint64_t seed_ = 0;
    Precision precision_ = Precision::Float64;
    NoiseConvention convention_ = NoiseConvention::Symmetrized;
    double noise_scale_ = 1.0;
    double signal_coeff_ = 0.0;
    double noise_coeff_ = 0.0;
    std::vector<double> signal_;
    PackedLayout layout_;
    std::variant<std::vector<double>, std::vector<float>> noise_;
};

/// Builds an instance; a pure function of (k, n, snr, seed, options).
/// Requires k >= 2, n >= k, snr >= 0.
SpikedTensorProblem generate(int k, std::size_t n, double snr, std::uint64_t seed,
                             const GenerateOptions& options = {});

/// Instance with explicit packed noise values (tests, hand-built examples).
/// The signal is used as given, without rescaling.
SpikedTensorProblem from_packed(int k, std::size_t n, double snr, std::vector<double> signal,
                                std::vector<double> packed_noise, double noise_scale = 1.0);

// Snapshot container: a 16-byte header ("TPCASNAP", u32 format version,
// u32 reserved) followed by little-endian k, n, snr, seed, precision,
// noise convention, noise_scale and the signal. The packed noise is regenerated from the seed.
inline constexpr std::uint32_t kSnapshotVersion = 1;

void save_snapshot(const SpikedTensorProblem& problem, std::ostream& out);
SpikedTensorProblem load_snapshot(std::istream& in, std::uint64_t memory_budget_bytes = 0);
void save_snapshot(const SpikedTensorProblem& problem, const std::string& path);
SpikedTensorProblem load_snapshot(const std::string& path, std::uint64_t memory_budget_bytes = 0);

}  // namespace tpca
