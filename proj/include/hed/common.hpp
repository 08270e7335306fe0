#pragma once

/// \file common.hpp
/// \brief Error type, deterministic random numbers and hashing shared by all modules.

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hed {

enum class Errc {
    MalformedRecord,
    UnknownLabel,
    MissingManifest,
    InconsistentCount,
    TooFewVideos,
    OutOfBounds,
    NotEnoughKeypoints,
    DegenerateData,
    NonFinite,
    DimensionMismatch,
    SingleClass,
    NoEmergencySamples,
    NoEmergencyTruth,
    LengthMismatch,
    LabelOutOfRange,
    NoPositives,
    EmptySubset,
    InvalidSpec,
    InvalidArgument,
    SplitLeak,
    Io,
};

std::string_view errc_name(Errc code) noexcept;

/// All recoverable failures in the library are reported as hed::Error.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Seeded generator with distribution transforms that are identical on every
/// platform. The std:: distributions are implementation-defined, which would
/// break byte-identical artifacts across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1).
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;
    double normal() noexcept;
    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }
    bool bernoulli(double p) noexcept { return uniform() < p; }

    template <typename Container>
    void shuffle(Container& c) noexcept {
        for (std::size_t i = c.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(c[i - 1], c[j]);
        }
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Mix a base seed with a stream index into an independent seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// 64-bit FNV-1a, used for split and artifact fingerprints.
class Fnv1a {
public:
    void update(std::string_view bytes) noexcept;
    void update_u64(std::uint64_t v) noexcept;
    std::uint64_t digest() const noexcept { return h_; }
    std::string hex() const;

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

} // namespace hed
