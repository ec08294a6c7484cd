#include "dyndet/plant.hpp"

#include <complex>
#include <optional>
#include <sstream>

#include "dyndet/errors.hpp"

namespace dyndet {

namespace {

// Eigenvalue at which [A - lambda I, B] loses rank, if any. The Kalman matrix
// squares the spread of the modes and misjudges stiff plants whose fast modes
// sample to nearly zero; this per-mode test confirms its verdict.
std::optional<std::complex<double>> pbh_defect(const Matrix& a, const Matrix& b) {
  const auto n = a.rows();
  for (const auto& lam : eigenvalues(a).eigenvalues) {
    Eigen::MatrixXcd m(n, n + b.cols());
    m.leftCols(n) = a.cast<std::complex<double>>() - lam * Eigen::MatrixXcd::Identity(n, n);
    m.rightCols(b.cols()) = b.cast<std::complex<double>>();
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const auto& sv = svd.singularValues();
    if (!(sv(n - 1) >= kRankTolerance * sv(0)) || sv(0) == 0.0) return lam;
  }
  return std::nullopt;
}

}  // namespace

StateSpace discretize_zoh(const ContinuousPlant& cp, double ts) {
  require_square(cp.ac, "discretize_zoh: Ac");
  const auto n = cp.ac.rows();
  if (cp.bc.rows() != n || cp.cc.cols() != n) {
    throw DimensionError("discretize_zoh: Bc/Cc do not match Ac");
  }
  if (!(ts > 0.0)) throw ArgumentError("discretize_zoh: sample period must be positive");
  const auto m = cp.bc.cols();
  // exp([[Ac, Bc], [0, 0]] Ts) = [[A, B], [0, I]]
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = cp.ac * ts;
  aug.topRightCorner(n, m) = cp.bc * ts;
  const Matrix e = matrix_exponential(aug);
  return StateSpace{e.topLeftCorner(n, n), e.topRightCorner(n, m), cp.cc};
}

void validate(const DiscretePlant& plant) {
  require_square(plant.a, "plant: A");
  const auto n = plant.n();
  if (n == 0) throw DimensionError("plant: empty state");
  if (plant.b.rows() != n) throw DimensionError("plant: B must have n rows");
  if (plant.c.cols() != n) throw DimensionError("plant: C must have n columns");
  if (plant.q.rows() != n || plant.q.cols() != n) throw DimensionError("plant: Q must be n x n");
  if (plant.r.rows() != plant.p() || plant.r.cols() != plant.p()) {
    throw DimensionError("plant: R must be p x p");
  }
  for (const auto* m : {&plant.a, &plant.b, &plant.c, &plant.q, &plant.r}) {
    require_finite(*m, "plant");
  }
  if (!is_psd(plant.q)) throw ArgumentError("plant: Q must be symmetric positive semidefinite");
  if (!is_pd(plant.r)) throw ArgumentError("plant: R must be symmetric positive definite");
}

void validate(const CostWeights& weights, const DiscretePlant& plant) {
  if (weights.w.rows() != plant.n() || weights.w.cols() != plant.n()) {
    throw DimensionError("weights: W must be n x n");
  }
  if (weights.u.rows() != plant.m() || weights.u.cols() != plant.m()) {
    throw DimensionError("weights: U must be m x m");
  }
  require_finite(weights.w, "weights: W");
  require_finite(weights.u, "weights: U");
  if (!is_psd(weights.w)) throw ArgumentError("weights: W must be symmetric positive semidefinite");
  if (!is_pd(weights.u)) throw ArgumentError("weights: U must be symmetric positive definite");
}

void validate(const InitialState& init, const DiscretePlant& plant) {
  if (init.mean.size() != plant.n()) throw DimensionError("initial state: mean must have n entries");
  if (init.cov.rows() != plant.n() || init.cov.cols() != plant.n()) {
    throw DimensionError("initial state: covariance must be n x n");
  }
  require_finite(init.mean, "initial state: mean");
  require_finite(init.cov, "initial state: covariance");
  if (!is_psd(init.cov)) {
    throw ArgumentError("initial state: covariance must be symmetric positive semidefinite");
  }
}

LqgSynthesis synthesize_lqg(const DiscretePlant& plant, const CostWeights& weights) {
  validate(plant);
  validate(weights, plant);
  const auto n = plant.n();

  const int rc = numeric_rank(controllability_matrix(plant.a, plant.b), kRankTolerance);
  if (rc < n) {
    if (const auto lam = pbh_defect(plant.a, plant.b)) {
      std::ostringstream os;
      os << "synthesis: (A,B) is not controllable (controllability matrix rank " << rc << " < " << n
         << ", PBH test fails at eigenvalue " << *lam << ")";
      throw SynthesisError(os.str());
    }
  }
  const int ro = numeric_rank(observability_matrix(plant.a, plant.c), kRankTolerance);
  if (ro < n) {
    if (const auto lam = pbh_defect(plant.a.transpose(), plant.c.transpose())) {
      std::ostringstream os;
      os << "synthesis: (A,C) is not observable (observability matrix rank " << ro << " < " << n
         << ", PBH test fails at eigenvalue " << *lam << ")";
      throw SynthesisError(os.str());
    }
  }

  LqgSynthesis s;
  try {
    s.p = solve_dare(plant.a, plant.b, weights.w, weights.u);
    s.sigma_e = solve_dare(plant.a.transpose(), plant.c.transpose(), plant.q, plant.r);
  } catch (const NumericError& e) {
    throw SynthesisError(std::string("synthesis: ") + e.what());
  }
  const Matrix btp = plant.b.transpose() * s.p;
  s.k = -(btp * plant.b + weights.u).ldlt().solve(btp * plant.a);
  s.h = symmetrize(plant.c * s.sigma_e * plant.c.transpose() + plant.r);
  s.l = s.h.ldlt().solve(plant.c * s.sigma_e).transpose();
  const Matrix eye = Matrix::Identity(n, n);
  s.gamma = (plant.a + plant.b * s.k) * (eye - s.l * plant.c);

  const double rho_ctrl = spectral_radius(plant.a + plant.b * s.k);
  const double rho_est = spectral_radius((eye - s.l * plant.c) * plant.a);
  if (rho_ctrl >= 1.0 || rho_est >= 1.0 || !is_pd(s.h)) {
    std::ostringstream os;
    os << "synthesis: closed loop not stable (rho(A+BK)=" << rho_ctrl
       << ", rho((I-LC)A)=" << rho_est << ")";
    throw SynthesisError(os.str());
  }
  return s;
}

StealthReport replay_stealthy(const LqgSynthesis& synthesis) {
  StealthReport report;
  report.gamma_spectrum = eigenvalues(synthesis.gamma);
  report.stealthy = report.gamma_spectrum.spectral_radius < 1.0;
  return report;
}

}  // namespace dyndet
