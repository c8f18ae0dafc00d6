#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>

namespace curvflow {

/// Philox 4x32-10 block cipher.  Counter-based: the k-th draw of any stream is
/// a pure function of (seed, stream, k), so parallel path simulation needs no
/// shared generator state and results do not depend on scheduling.
struct Philox4x32 {
  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t prodA = std::uint64_t(kMulA) * ctr[0];
      const std::uint64_t prodB = std::uint64_t(kMulB) * ctr[2];
      const std::array<std::uint32_t, 4> next = {
          static_cast<std::uint32_t>(prodB >> 32) ^ ctr[1] ^ key[0],
          static_cast<std::uint32_t>(prodB),
          static_cast<std::uint32_t>(prodA >> 32) ^ ctr[3] ^ key[1],
          static_cast<std::uint32_t>(prodA)};
      ctr = next;
      key[0] += kWeylA;
      key[1] += kWeylB;
    }
    return ctr;
  }
};

/// Stream of standard normals (and uniforms) addressed by (seed, stream id).
/// One Philox block yields two uniforms, hence one Box-Muller pair.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  /// Uniform double in the open interval (0, 1).
  double uniform() {
    const auto words = nextBlock();
    return toUnit((std::uint64_t(words[0]) << 32) | words[1]);
  }

  /// Uniform integer in [0, bound).
  std::uint64_t uniformIndex(std::uint64_t bound) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound)) % bound;
  }

  double gaussian() {
    if (haveSpare_) {
      haveSpare_ = false;
      return spare_;
    }
    const auto words = nextBlock();
    const double u1 = toUnit((std::uint64_t(words[0]) << 32) | words[1]);
    const double u2 = toUnit((std::uint64_t(words[2]) << 32) | words[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    haveSpare_ = true;
    return radius * std::cos(angle);
  }

  void fillGaussian(Eigen::Ref<Eigen::VectorXd> out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = gaussian();
  }

 private:
  std::array<std::uint32_t, 4> nextBlock() {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(draw_), static_cast<std::uint32_t>(draw_ >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    ++draw_;
    return Philox4x32::block(ctr, key_);
  }

  static double toUnit(std::uint64_t bits) {
    // 53 significant bits, offset by half a ulp so 0 and 1 are never hit.
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_ = 0;
  std::uint64_t draw_ = 0;
  bool haveSpare_ = false;
  double spare_ = 0.0;
};

/// Stream id layout shared by the simulator: purpose tag in the top byte so
/// path noise, bootstrap draws and optimizer seeds never collide.
inline std::uint64_t make_stream(std::uint8_t purpose, std::uint32_t major, std::uint32_t minor) {
  return (std::uint64_t(purpose) << 56) | (std::uint64_t(major & 0xFFFFFFu) << 32) |
         std::uint64_t(minor);
}

/// Derive a decorrelated child seed from (master, index); splitmix64 finalizer.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace curvflow
