#include "hed/common.hpp"

#include <cmath>
#include <cstdio>

namespace hed {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::MissingManifest: return "MissingManifest";
    case Errc::InconsistentCount: return "InconsistentCount";
    case Errc::TooFewVideos: return "TooFewVideos";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::NotEnoughKeypoints: return "NotEnoughKeypoints";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SingleClass: return "SingleClass";
    case Errc::NoEmergencySamples: return "NoEmergencySamples";
    case Errc::NoEmergencyTruth: return "NoEmergencyTruth";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::NoPositives: return "NoPositives";
    case Errc::EmptySubset: return "EmptySubset";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::SplitLeak: return "SplitLeak";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

namespace {

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t Rng::next_u64() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
    // rejection sampling removes modulo bias
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL));
}

void Fnv1a::update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
        h_ ^= c;
        h_ *= 0x100000001b3ULL;
    }
}

void Fnv1a::update_u64(std::uint64_t v) noexcept {
    for (int i = 0; i < 8; ++i) {
        h_ ^= (v >> (8 * i)) & 0xffU;
        h_ *= 0x100000001b3ULL;
    }
}

std::string Fnv1a::hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
}

} // namespace hed
