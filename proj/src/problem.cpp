#include "tpca/problem.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "tpca/rng.hpp"

namespace tpca {

namespace {

constexpr std::uint64_t kSignalStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::array<char, 8> kSnapshotMagic = {'T', 'P', 'C', 'A', 'S', 'N', 'A', 'P'};

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

void validate_shape(int k, std::size_t n, double snr) {
    if (k < 2 || k > kMaxOrder) throw std::invalid_argument("tensor order k must be in [2, 8], got " + std::to_string(k));
    if (n < static_cast<std::size_t>(k)) {
        throw std::invalid_argument("dimension n = " + std::to_string(n) + " must be at least k = " + std::to_string(k));
    }
    if (!(snr >= 0.0) || !std::isfinite(snr)) throw std::invalid_argument("snr must be finite and non-negative");
}

std::uint64_t checked_bytes(int k, std::uint64_t n, Precision precision, std::uint64_t budget) {
    std::uint64_t bytes = 0;
    try {
        bytes = required_bytes(k, n, precision);
    } catch (const std::overflow_error&) {
        throw ResourceError("packed size for k=" + std::to_string(k) + ", n=" + std::to_string(n) +
                                " overflows addressable memory",
                            std::numeric_limits<std::uint64_t>::max());
    }
    if (bytes > static_cast<std::uint64_t>(std::numeric_limits<std::ptrdiff_t>::max()) ||
        (budget != 0 && bytes > budget)) {
        throw ResourceError("instance k=" + std::to_string(k) + ", n=" + std::to_string(n) + " needs " +
                                std::to_string(bytes) + " bytes of packed storage (budget " +
                                std::to_string(budget) + ")",
                            bytes);
    }
    return bytes;
}

}  // namespace

std::string to_string(Precision p) { return p == Precision::Float32 ? "float32" : "float64"; }

Precision parse_precision(const std::string& s) {
    if (s == "float64" || s == "f64" || s == "double") return Precision::Float64;
    if (s == "float32" || s == "f32" || s == "float") return Precision::Float32;
    throw std::invalid_argument("unknown precision '" + s + "'");
}

std::string to_string(NoiseConvention c) { return c == NoiseConvention::Uniform ? "uniform" : "symmetrized"; }

NoiseConvention parse_noise_convention(const std::string& s) {
    if (s == "symmetrized") return NoiseConvention::Symmetrized;
    if (s == "uniform") return NoiseConvention::Uniform;
    throw std::invalid_argument("unknown noise convention '" + s + "'");
}

std::uint64_t required_bytes(int k, std::uint64_t n, Precision precision) {
    const std::uint64_t entries = packed_size(n, k);
    const std::uint64_t width = precision == Precision::Float32 ? 4 : 8;
    if (entries > std::numeric_limits<std::uint64_t>::max() / width) throw std::overflow_error("byte count overflows");
    return entries * width;
}

void SpikedTensorProblem::set_coefficients() {
    const double nd = static_cast<double>(n_);
    signal_coeff_ = snr_ / std::pow(nd, k_ - 1);
    noise_coeff_ = noise_scale_ / std::pow(nd, 0.5 * (k_ - 1));
}

double SpikedTensorProblem::noise_at(std::uint64_t offset) const {
    return visit_noise([offset](auto span) { return static_cast<double>(span[offset]); });
}

double SpikedTensorProblem::value_at(const PackedIndex& idx) const {
    double prod = signal_coeff_;
    for (int p = 0; p < k_; ++p) prod *= signal_[idx.indices[p]];
    return prod + noise_coeff_ * noise_at(idx.offset);
}

double SpikedTensorProblem::value(std::span<const std::uint32_t> tuple) const {
    if (tuple.size() != static_cast<std::size_t>(k_)) throw std::invalid_argument("tuple length must equal k");
    PackedIndex idx;
    idx.order = k_;
    std::copy(tuple.begin(), tuple.end(), idx.indices.begin());
    std::sort(idx.indices.begin(), idx.indices.begin() + k_);
    for (int p = 0; p < k_; ++p) {
        if (idx.indices[p] >= n_) throw std::out_of_range("tensor index out of range");
    }
    idx.offset = layout_.offset_sorted(idx.multiset());
    return value_at(idx);
}

namespace {

template <class Elem>
std::vector<Elem> sample_noise(int k, std::size_t n, std::uint64_t size, std::uint64_t seed, double scale,
                               NoiseConvention convention) {
    std::vector<Elem> out(size);
    if (scale == 0.0) return out;
    RandomStream rng(seed, kNoiseStream);
    const double kfact = factorial(k);
    // Standard deviations by multiplicity profile are few; cache per entry
    // would cost a division and sqrt, which is cheap next to the normal draw.
    for (MultisetCursor cur(n, k); !cur.done(); cur.next()) {
        const PackedIndex& idx = cur.current();
        const double sd = (idx.distinct == k || convention == NoiseConvention::Uniform)
                              ? 1.0 / std::sqrt(kfact)
                              : std::sqrt(multiplicity_factorial(idx) / kfact);
        out[idx.offset] = static_cast<Elem>(sd * rng.normal());
    }
    return out;
}

}  // namespace

SpikedTensorProblem generate(int k, std::size_t n, double snr, std::uint64_t seed, const GenerateOptions& options) {
    validate_shape(k, n, snr);
    if (!(options.noise_scale >= 0.0) || !std::isfinite(options.noise_scale)) {
        throw std::invalid_argument("noise_scale must be finite and non-negative");
    }
    checked_bytes(k, n, options.precision, options.memory_budget_bytes);

    SpikedTensorProblem p;
    p.k_ = k;
    p.n_ = n;
    p.snr_ = snr;
    p.seed_ = seed;
    p.precision_ = options.precision;
    p.convention_ = options.convention;
    p.noise_scale_ = options.noise_scale;
    p.layout_ = PackedLayout(n, k);

    if (options.signal) {
        if (options.signal->size() != n) throw std::invalid_argument("signal length must equal n");
        p.signal_ = *options.signal;
    } else {
        RandomStream rng(seed, kSignalStream);
        p.signal_.resize(n);
        for (auto& s : p.signal_) s = rng.normal();
    }
    double norm2 = 0.0;
    for (double s : p.signal_) norm2 += s * s;
    if (!(norm2 > 0.0) || !std::isfinite(norm2)) throw std::invalid_argument("signal must be finite and non-zero");
    if (std::abs(norm2 - static_cast<double>(n)) > 1e-12 * static_cast<double>(n)) {
        const double scale = std::sqrt(static_cast<double>(n) / norm2);
        for (auto& s : p.signal_) s *= scale;
    }

    if (options.precision == Precision::Float32) {
        p.noise_ = sample_noise<float>(k, n, p.layout_.size(), seed, options.noise_scale,
                                         options.convention);
    } else {
        p.noise_ = sample_noise<double>(k, n, p.layout_.size(), seed, options.noise_scale,
                                         options.convention);
    }
    p.set_coefficients();
    return p;
}

SpikedTensorProblem from_packed(int k, std::size_t n, double snr, std::vector<double> signal,
                                std::vector<double> packed_noise, double noise_scale) {
    validate_shape(k, n, snr);
    if (signal.size() != n) throw std::invalid_argument("signal length must equal n");
    SpikedTensorProblem p;
    p.k_ = k;
    p.n_ = n;
    p.snr_ = snr;
    p.noise_scale_ = noise_scale;
    p.layout_ = PackedLayout(n, k);
    if (packed_noise.empty()) packed_noise.assign(p.layout_.size(), 0.0);
    if (packed_noise.size() != p.layout_.size()) {
        throw std::invalid_argument("packed noise length " + std::to_string(packed_noise.size()) +
                                    " differs from C(n+k-1, k) = " + std::to_string(p.layout_.size()));
    }
    p.signal_ = std::move(signal);
    p.noise_ = std::move(packed_noise);
    p.set_coefficients();
    return p;
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {

template <class T>
void put(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("truncated problem snapshot");
    return value;
}

}  // namespace

void save_snapshot(const SpikedTensorProblem& problem, std::ostream& out) {
    out.write(kSnapshotMagic.data(), kSnapshotMagic.size());
    put<std::uint32_t>(out, kSnapshotVersion);
    put<std::uint32_t>(out, 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(problem.order()));
    put<std::uint64_t>(out, problem.dim());
    put<double>(out, problem.snr());
    put<std::uint64_t>(out, problem.seed());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(problem.precision()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(problem.convention()));
    put<double>(out, problem.noise_scale());
    for (double s : problem.signal()) put<double>(out, s);
    if (!out) throw std::runtime_error("failed to write problem snapshot");
}

SpikedTensorProblem load_snapshot(std::istream& in, std::uint64_t memory_budget_bytes) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kSnapshotMagic) throw std::runtime_error("not a problem snapshot (bad magic)");
    const auto version = get<std::uint32_t>(in);
    if (version != kSnapshotVersion) throw std::runtime_error("unsupported snapshot version " + std::to_string(version));
    (void)get<std::uint32_t>(in);
    const auto k = static_cast<int>(get<std::uint32_t>(in));
    const auto n = get<std::uint64_t>(in);
    const auto snr = get<double>(in);
    const auto seed = get<std::uint64_t>(in);
    const auto precision = get<std::uint8_t>(in);
    const auto convention = get<std::uint8_t>(in);
    const auto noise_scale = get<double>(in);
    if (precision > 1) throw std::runtime_error("bad precision tag in snapshot");
    if (convention > 1) throw std::runtime_error("bad noise convention tag in snapshot");
    if (n > (std::uint64_t{1} << 32)) throw std::runtime_error("snapshot dimension out of range");
    std::vector<double> signal(n);
    for (auto& s : signal) s = get<double>(in);

    GenerateOptions options;
    options.precision = static_cast<Precision>(precision);
    options.convention = static_cast<NoiseConvention>(convention);
    options.noise_scale = noise_scale;
    options.signal = std::move(signal);
    options.memory_budget_bytes = memory_budget_bytes;
    return generate(k, n, snr, seed, options);
}

void save_snapshot(const SpikedTensorProblem& problem, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    save_snapshot(problem, out);
}

SpikedTensorProblem load_snapshot(const std::string& path, std::uint64_t memory_budget_bytes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return load_snapshot(in, memory_budget_bytes);
}

}  // namespace tpca
