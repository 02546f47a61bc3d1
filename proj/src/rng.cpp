#include "cope/rng.hpp"

#include <cmath>
#include <numbers>

namespace cope {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

KeyedStream::KeyedStream(std::uint64_t seed, StreamTag tag, std::uint64_t substream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      tag_(static_cast<std::uint32_t>(tag)),
      substream_(substream) {}

void KeyedStream::refill() {
  buffer_ = philox4x32({block_, tag_, static_cast<std::uint32_t>(substream_),
                        static_cast<std::uint32_t>(substream_ >> 32)},
                       key_);
  ++block_;
  used_ = 0;
}

std::uint32_t KeyedStream::next_u32() {
  if (used_ == 4) refill();
  return buffer_[used_++];
}

double KeyedStream::uniform() {
  const std::uint64_t hi = next_u32() >> 5;  // 27 bits
  const std::uint64_t lo = next_u32() >> 6;  // 26 bits
  const std::uint64_t bits = (hi << 26) | lo;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double KeyedStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

double KeyedStream::laplace(double b) {
  const double u = uniform() - 0.5;
  const double s = u < 0.0 ? -1.0 : 1.0;
  return -b * s * std::log(1.0 - 2.0 * std::fabs(u));
}

double KeyedStream::student_t(int nu) {
  const double z = normal();
  double chi2 = 0.0;
  for (int k = 0; k < nu; ++k) {
    const double w = normal();
    chi2 += w * w;
  }
  return z / std::sqrt(chi2 / nu);
}

}  // namespace cope
