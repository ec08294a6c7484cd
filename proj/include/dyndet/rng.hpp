#pragma once

#include <cstdint>

#include "dyndet/matcore.hpp"

namespace dyndet {

// Counter-based generator: every draw is a pure function of
// (master_seed, run_index, stream, sample index, component), so runs can be
// simulated in any order or on any thread and still reproduce bit-for-bit.
struct NoisePlan {
  std::uint64_t master_seed = 0;
  std::uint64_t run_index = 0;
};

enum class NoiseStream : std::uint64_t {
  initial_state = 1,
  process = 2,
  measurement = 3,
  watermark = 4,
  optimizer = 5,
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t counter_bits(const NoisePlan& plan, NoiseStream stream, std::uint64_t index,
                           std::uint64_t component);

// Uniform on (0, 1].
double counter_uniform(const NoisePlan& plan, NoiseStream stream, std::uint64_t index,
                       std::uint64_t component);

// Standard normal vector of length dim (Box-Muller on consecutive uniform pairs).
Vector standard_normal(const NoisePlan& plan, NoiseStream stream, std::uint64_t index,
                       Eigen::Index dim);

// Symmetric square root factor S with S S' = cov; cov must be PSD.
Matrix covariance_factor(const Matrix& cov);

}  // namespace dyndet
