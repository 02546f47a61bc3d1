#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream tag, substream, position), so work split across threads or
// reordered still reproduces the same values bit for bit.

#include <array>
#include <cstdint>

namespace cope {

// Philox4x32-10 block cipher (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// splitmix64 finalizer; used to derive child seeds.
std::uint64_t mix64(std::uint64_t x);

// Domain-separation tags for the independent streams used in this project.
enum class StreamTag : std::uint32_t {
  multipliers = 1,
  noise = 2,
  surrogate = 3,
  selftest = 4,
  test = 5,
};

// Sequential reader over the Philox stream keyed by seed, addressed by
// (tag, substream). Cheap to construct; not shared between threads.
class KeyedStream {
 public:
  KeyedStream(std::uint64_t seed, StreamTag tag, std::uint64_t substream);

  std::uint32_t next_u32();
  // Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform();
  double normal();
  // Laplace with scale b: density exp(-|x|/b) / (2b), variance 2 b^2.
  double laplace(double b);
  // Student t with nu degrees of freedom (integer nu, as Z / sqrt(chi2/nu)).
  double student_t(int nu);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint32_t tag_;
  std::uint64_t substream_;
  std::uint32_t block_{0};
  std::array<std::uint32_t, 4> buffer_{};
  unsigned used_{4};
  bool have_spare_{false};
  double spare_{0.0};
};

}  // namespace cope
