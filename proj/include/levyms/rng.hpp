#ifndef LEVYMS_RNG_HPP
#define LEVYMS_RNG_HPP

#include <cstdint>
#include <random>

namespace levyms {

/// Role tags mixed into derived stream ids, so the slow noise, the fast noise
/// and each micro run of a path never share a substream.
enum class StreamRole : std::uint64_t {
    Slow = 1,
    Fast = 2,
    Micro = 3,
    Effective = 4,
    Probe = 5,
    Sample = 6,
    Estimator = 7,
};

/// splitmix64 finalizer; used only for seed and stream-id derivation.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// stream_id = mix(mix(mix(path) ^ step) ^ role). Stable across platforms and
/// builds; alternate implementations can reproduce every substream from it.
constexpr std::uint64_t derive_stream_id(std::uint64_t path, std::uint64_t step, StreamRole role) noexcept {
    return mix64(mix64(mix64(path) ^ step) ^ static_cast<std::uint64_t>(role));
}

/// A reproducible random stream identified by (master_seed, stream_id).
///
/// Streams are plain values: copying one forks an identical sequence. Equal
/// (master_seed, stream_id) pairs always yield bit-identical draws.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : master_seed_(master_seed),
          stream_id_(stream_id),
          engine_(mix64(master_seed ^ mix64(stream_id ^ 0x5851f42d4c957f2dULL))) {}

    static RngStream derive(std::uint64_t master_seed, std::uint64_t path, std::uint64_t step, StreamRole role) {
        return RngStream(master_seed, derive_stream_id(path, step, role));
    }

    /// Substream for one role (and step) of the path this stream identifies.
    RngStream child(StreamRole role, std::uint64_t step = 0) const {
        return RngStream(master_seed_, mix64(stream_id_ ^ derive_stream_id(0, step, role)));
    }

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open_low() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

}  // namespace levyms

#endif  // LEVYMS_RNG_HPP
