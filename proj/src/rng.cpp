#include "dyndet/rng.hpp"

#include <cmath>
#include <numbers>

namespace dyndet {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t counter_bits(const NoisePlan& plan, NoiseStream stream, std::uint64_t index,
                           std::uint64_t component) {
  std::uint64_t h = mix64(plan.master_seed);
  h = mix64(h ^ plan.run_index);
  h = mix64(h ^ static_cast<std::uint64_t>(stream));
  h = mix64(h ^ index);
  return mix64(h ^ component);
}

double counter_uniform(const NoisePlan& plan, NoiseStream stream, std::uint64_t index,
                       std::uint64_t component) {
  return static_cast<double>((counter_bits(plan, stream, index, component) >> 11) + 1) *
         0x1.0p-53;
}

Vector standard_normal(const NoisePlan& plan, NoiseStream stream, std::uint64_t index,
                       Eigen::Index dim) {
  Vector out(dim);
  for (Eigen::Index j = 0; j < dim; j += 2) {
    const auto pair = static_cast<std::uint64_t>(j);
    const double u1 = counter_uniform(plan, stream, index, pair);
    const double u2 = counter_uniform(plan, stream, index, pair + 1);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out(j) = radius * std::cos(angle);
    if (j + 1 < dim) out(j + 1) = radius * std::sin(angle);
  }
  return out;
}

Matrix covariance_factor(const Matrix& cov) {
  if (cov.size() == 0) return cov;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(cov));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace dyndet
