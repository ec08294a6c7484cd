#pragma once

// Shared fixtures for the unit and acceptance binaries.

#include <cmath>
#include <cstdint>
#include <random>

#include "dyndet/config.hpp"
#include "dyndet/plant.hpp"
#include "dyndet/simulate.hpp"
#include "dyndet/watermark.hpp"

namespace dyndet::test {

inline double phi() { return (1.0 + std::sqrt(5.0)) / 2.0; }

inline DiscretePlant scalar_plant() {
  const Matrix one = Matrix::Ones(1, 1);
  return DiscretePlant{one, one, one, one, one, 1.0};
}

inline CostWeights scalar_weights() { return {Matrix::Ones(1, 1), Matrix::Ones(1, 1)}; }

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

inline double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

inline Matrix gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

// Random matrix rescaled to the given spectral radius.
inline Matrix with_radius(std::mt19937_64& rng, Eigen::Index n, double radius) {
  Matrix a = gaussian(rng, n, n);
  return a * (radius / spectral_radius(a));
}

struct RandomInstance {
  DiscretePlant plant;
  CostWeights weights;
  LqgSynthesis syn;
};

// A plant whose LQG synthesis succeeds, drawn with a mix of stable and
// unstable open-loop modes.
inline RandomInstance random_instance(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m,
                                      Eigen::Index p) {
  std::uniform_real_distribution<double> rad(0.3, 1.6);
  for (;;) {
    RandomInstance inst;
    inst.plant.a = with_radius(rng, n, rad(rng));
    inst.plant.b = gaussian(rng, n, m);
    inst.plant.c = gaussian(rng, p, n);
    const Matrix gq = gaussian(rng, n, n, 0.5);
    inst.plant.q = gq * gq.transpose() + 0.1 * Matrix::Identity(n, n);
    inst.plant.r = Matrix::Identity(p, p);
    inst.weights = {Matrix::Identity(n, n), Matrix::Identity(m, m)};
    try {
      inst.syn = synthesize_lqg(inst.plant, inst.weights);
    } catch (const Error&) {
      continue;
    }
    if (std::abs(inst.syn.gamma.determinant()) < 1e-6) continue;
    return inst;
  }
}

inline DynamicDetectorDesign random_design(std::mt19937_64& rng, Eigen::Index nz, Eigen::Index m,
                                           Eigen::Index p, double radius = 0.8) {
  return {with_radius(rng, nz, radius), gaussian(rng, nz, p), gaussian(rng, m, nz)};
}

struct MotorSetup {
  ExperimentConfig cfg;
  DiscretePlant plant;
  CostWeights weights;
  LqgSynthesis syn;
};

inline MotorSetup motor() {
  MotorSetup s;
  s.cfg = dc_motor_preset();
  s.plant = s.cfg.discrete_plant();
  s.weights = s.cfg.cost();
  s.syn = synthesize_lqg(s.plant, s.weights);
  return s;
}

}  // namespace dyndet::test
