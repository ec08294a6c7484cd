#pragma once

#include "dyndet/matcore.hpp"

namespace dyndet {

// dx/dt = Ac x + Bc u, y = Cc x
struct ContinuousPlant {
  Matrix ac;
  Matrix bc;
  Matrix cc;
};

struct StateSpace {
  Matrix a;
  Matrix b;
  Matrix c;
};

// x(t+1) = A x + B u + w,  y = C x + v,  w ~ N(0,Q), v ~ N(0,R).
struct DiscretePlant {
  Matrix a;
  Matrix b;
  Matrix c;
  Matrix q;
  Matrix r;
  double ts = 1.0;  // informational, seconds

  Eigen::Index n() const { return a.rows(); }
  Eigen::Index m() const { return b.cols(); }
  Eigen::Index p() const { return c.rows(); }
};

struct CostWeights {
  Matrix w;
  Matrix u;
};

struct InitialState {
  Vector mean;
  Matrix cov;
};

struct LqgSynthesis {
  Matrix p;        // control Riccati solution
  Matrix k;        // LQR gain, u = K xhat
  Matrix sigma_e;  // filter Riccati solution (prediction error covariance)
  Matrix l;        // Kalman gain
  Matrix h;        // innovation covariance C Sigma_e C' + R
  Matrix gamma;    // (A + BK)(I - LC)
};

struct StealthReport {
  bool stealthy = false;
  Spectrum gamma_spectrum;
};

// Rank threshold for the Kalman and PBH rank tests, relative to the largest singular value.
inline constexpr double kRankTolerance = 1e-9;

StateSpace discretize_zoh(const ContinuousPlant& cp, double ts);

void validate(const DiscretePlant& plant);
void validate(const CostWeights& weights, const DiscretePlant& plant);
void validate(const InitialState& init, const DiscretePlant& plant);

LqgSynthesis synthesize_lqg(const DiscretePlant& plant, const CostWeights& weights);

// Stealthy iff rho(Gamma) < 1: without a watermark the replayed residue converges
// back to its nominal distribution.
StealthReport replay_stealthy(const LqgSynthesis& synthesis);

}  // namespace dyndet
