#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace spdelab {

// splitmix64 finalizer; used for all seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream domains. Combined with (master, replica, stream) they identify a
// substream; derivation order is fixed so results are schedule-independent.
enum class StreamDomain : std::uint32_t {
  kSlowNoise = 1,
  kFastNoise = 2,
  kFrozenNoise = 3,
  kEstimator = 4,
  kZvonkin = 5,
  kMixing = 6,
  kGeneric = 7,
};

struct SeedLineage {
  std::uint64_t master = 0;
  std::uint32_t replica = 0;
  StreamDomain domain = StreamDomain::kGeneric;
  std::uint32_t stream = 0;

  std::uint64_t derive() const {
    std::uint64_t s = mix64(master);
    s = mix64(s ^ static_cast<std::uint64_t>(domain));
    s = mix64(s ^ (static_cast<std::uint64_t>(replica) << 1));
    s = mix64(s ^ (static_cast<std::uint64_t>(stream) << 1));
    return s;
  }
};

// Sequential random stream. Wraps mt19937_64; the uniform/exponential
// helpers are hand-rolled from raw 64-bit words so that output is
// bit-identical across standard library implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}
  explicit RngStream(const SeedLineage& lineage) : gen_(lineage.derive()) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0,1)
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // uniform on (0,1), symmetric around 1/2
  double uniform_open() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // standard exponential
  double exp1() { return -std::log(uniform_open()); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace spdelab
