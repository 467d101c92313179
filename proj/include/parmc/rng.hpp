#ifndef PARMC_RNG_HPP
#define PARMC_RNG_HPP

#include <array>
#include <cstdint>

namespace parmc {

// Counter-based stream (Philox4x32-10). A stream is addressed by a 64-bit
// seed (the key) and a 64-bit lane; draws within a stream advance a 64-bit
// block counter. Streams with distinct (seed, lane) never overlap, so
// replications can run on any number of threads and still produce the same
// numbers.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t lane) noexcept;

  std::uint64_t next_u64();

  // Uniform on the open interval (0,1); safe to pass to log().
  double uniform();

  // Standard normal via Box-Muller. Consumes two uniforms per call, no
  // cached spare, so consumption per call is fixed.
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> block_;
  int block_pos_;
};

// Packs a (processor, replication) pair into a stream lane.
std::uint64_t lane_of(std::uint32_t hi, std::uint32_t lo) noexcept;

}  // namespace parmc

#endif
