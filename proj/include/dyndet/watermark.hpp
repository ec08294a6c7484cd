#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dyndet/plant.hpp"
#include "dyndet/report.hpp"
#include "dyndet/simulate.hpp"

namespace dyndet {

// Block matrices of the watermarked loop, state ordered (x, zeta, e) with
// e = x - xhat(t) for theta / psi / g and (sigma1, sigma2) for delta.
struct AssembledMatrices {
  Matrix theta;  // closed loop, block upper triangular
  Matrix delta;  // replay discrepancy dynamics
  Matrix psi;    // driving-noise covariance, v(t) correlation left out, see lag
  Matrix g;      // stage cost x~' G x~
  Matrix lag;    // E[x~(t) Phi(t)'] : nonzero only in block (e, zeta) = -L R Mt'
};

// Smallest/largest singular value ratio below which At counts as rank deficient.
inline constexpr double kFullRankTolerance = 1e-8;

bool is_full_rank(const Matrix& a_tilde);

void validate_design(const DynamicDetectorDesign& design, const DiscretePlant& plant);

AssembledMatrices assemble(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                           const CostWeights& weights, const DynamicDetectorDesign& design);

// Only the delta block; cheap enough for inner optimization loops.
Matrix detection_matrix(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                        const DynamicDetectorDesign& design);

struct Detectability {
  bool detectable = false;
  double rho_delta = 0.0;
};

Detectability detectability(const AssembledMatrices& am, double delta_min);

// det(Gamma) det(At + Mt C (I - LC) Gamma^-1 B Kt); Gamma must be invertible.
double determinant_identity_rhs(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                                const DynamicDetectorDesign& design);

// Constructive design: one nonzero entry m in Mt (position i,j) and one k in Kt
// (position r,s). det(Delta) is affine in the product m k,
//   det(Delta) = det(Gamma) det(At) + m k d_{ijrs},
// so m k is solved for directly. With invertible Gamma,
//   d_{ijrs} = det(Gamma) cof_{is}(At) [C (I - LC) Gamma^-1 B]_{jr}.
struct ConstructedDesign {
  DynamicDetectorDesign design;
  double mk = 0.0;
  Eigen::Index i = 0, j = 0, r = 0, s = 0;
  double coefficient = 0.0;  // d_{ijrs}
  double base_det = 0.0;     // det(Gamma) det(At)
};

ConstructedDesign construct_detectable_design(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                                  const Matrix& a_tilde, double target_det);

struct LossReport {
  double j_lqg = 0.0;
  double j_tilde = 0.0;
  double delta_loss = 0.0;
  double rho_delta = 0.0;
};

// Steady-state LQG cost without watermark.
double lqg_cost(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                const CostWeights& weights);

// tr(G cov) with cov the stationary covariance of (x, zeta, e). The driving term
// includes the one-step correlation between M v(t) in zeta(t+1) and -L v(t) in e(t),
// cov = Theta cov Theta' + Psi + Theta S + S' Theta'.
double watermarked_cost(const AssembledMatrices& am);

// The same quantity with Psi alone (no correlation term).
double watermarked_cost_uncorrected(const AssembledMatrices& am);

LossReport performance_loss(const AssembledMatrices& am, const DiscretePlant& plant,
                            const LqgSynthesis& synthesis, const CostWeights& weights);

LossReport performance_loss(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                            const CostWeights& weights, const DynamicDetectorDesign& design);

struct OptimizeOptions {
  int starts = 16;                // first start is always the constructive seed
  std::uint64_t seed = 1;
  int max_evals_per_round = 6000;
  int penalty_rounds = 4;
  double schur_rescale = 0.98;
  std::optional<Eigen::Index> n_zeta;  // defaults to n
  std::vector<DynamicDetectorDesign> warm_starts;
  Execution exec = Execution::parallel;
};

struct OptimizeResult {
  DynamicDetectorDesign design;
  LossReport loss;
  int best_start = 0;                 // index into [seed, pole seed, warm starts..., random...]
  std::vector<double> start_losses;   // NaN where a start ended infeasible
  DynamicDetectorDesign seed_design;  // the constructive seed
  LossReport seed_loss;
};

OptimizeResult optimize_design(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                               const CostWeights& weights, double delta,
                               const OptimizeOptions& options = {});

// Loss of u = K xhat + xi with xi ~ N(0, qw) white.
double iid_cost(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                const CostWeights& weights, const Matrix& qw);

// Scales the identity direction c I until the i.i.d. loss increase matches target_loss.
IidWatermark iid_baseline_matched(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                                  const CostWeights& weights, double target_loss);

// ---- design artifacts ----

struct DesignRecord {
  DynamicDetectorDesign design;
  double delta = 0.0;
  double rho_delta = 0.0;
  double j_tilde = 0.0;
  double j_lqg = 0.0;
  double delta_loss = 0.0;
};

// Provenance, when given, is stored under "provenance" and ignored on reading.
std::string design_record_to_json(const DesignRecord& record, const Provenance* prov = nullptr);
DesignRecord design_record_from_json(const std::string& text);

struct SweepRow {
  double delta = 0.0;
  double rho_delta = 0.0;
  double loss = 0.0;
  double delta_loss = 0.0;
};

// Optimizes each grid point; larger deltas run first and seed the smaller ones.
std::vector<SweepRow> loss_sweep(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                                 const CostWeights& weights, const std::vector<double>& grid,
                                 const OptimizeOptions& options = {});

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace dyndet
