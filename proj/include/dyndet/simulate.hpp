#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "dyndet/detect.hpp"
#include "dyndet/plant.hpp"
#include "dyndet/rng.hpp"

namespace dyndet {

// zeta(t+1) = At zeta(t) + Mt (y(t) - C xhat(t)),  xi(t) = Kt zeta(t)
struct DynamicDetectorDesign {
  Matrix a_tilde;
  Matrix m_tilde;
  Matrix k_tilde;

  Eigen::Index n_zeta() const { return a_tilde.rows(); }
};

struct NoWatermark {};

// xi(t) ~ N(0, cov), independent across samples.
struct IidWatermark {
  Matrix cov;
};

using WatermarkMode = std::variant<NoWatermark, DynamicDetectorDesign, IidWatermark>;

Eigen::Index watermark_state_dim(const WatermarkMode& mode);

// Checks dimensions against the plant and the Schur requirement on At (or PSD-ness
// of the i.i.d. covariance). Throws ArgumentError / DomainError.
void validate(const WatermarkMode& mode, const DiscretePlant& plant);

struct FProfile {
  enum class Kind { zero, constant, ramp };
  Kind kind = Kind::zero;
  Vector value;  // constant level or ramp slope per sample

  // f at replay step k (k = 0 at attack start), sized for a channel of width dim.
  Vector at(std::size_t k, Eigen::Index dim) const;
};

struct AttackScenario {
  std::size_t tau = 1;           // record / replay horizon in samples
  Matrix ba;                     // disruption channel, n x m_a
  FProfile f;
  std::size_t attack_start = 0;  // sample index after warm-up; must be >= tau
};

struct SimulationOptions {
  std::size_t warmup = 500;  // samples simulated before t = 0 and not recorded
  double alpha = 0.01;       // alarm threshold for the trace's alarm flags
};

struct LoopState {
  Vector x;
  Vector xpred;  // xhat(t|t-1)
  Vector zeta;
};

// Standard normal draws; the closed loop scales them by the covariance factors.
struct NoiseSample {
  Vector w;
  Vector v;
  Vector xi;  // i.i.d. watermark only
};

struct StepRecord {
  Vector x;
  Vector xpred;
  Vector xfilt;  // xhat(t)
  Vector zeta;
  Vector u;
  Vector xi;
  Vector y;      // output as seen by the estimator
  Vector y_true; // C x(t) + v(t)
  Vector r;
  double g = 0.0;
};

// Precomputed closed loop: factored covariances and H^-1 are built once and the
// object is then shared read-only between simulation workers.
class ClosedLoop {
 public:
  ClosedLoop(const DiscretePlant& plant, const LqgSynthesis& synthesis, WatermarkMode mode);

  const DiscretePlant& plant() const { return plant_; }
  const LqgSynthesis& synthesis() const { return synthesis_; }
  const WatermarkMode& mode() const { return mode_; }
  Eigen::Index zeta_dim() const { return nz_; }

  LoopState initial_state(const InitialState& init, const NoisePlan& plan) const;
  NoiseSample draw(const NoisePlan& plan, std::uint64_t index) const;

  // Advances state by one sample. spoofed_y replaces the true measurement (replay);
  // disturbance is added to x(t+1) (the attacker's Ba f(t)).
  StepRecord step(LoopState& state, const NoiseSample& noise, const Vector* spoofed_y = nullptr,
                  const Vector* disturbance = nullptr) const;

 private:
  DiscretePlant plant_;
  LqgSynthesis synthesis_;
  WatermarkMode mode_;
  Eigen::Index nz_ = 0;
  Matrix q_factor_;
  Matrix r_factor_;
  Matrix xi_factor_;
  GStatistic gstat_;
};

StepRecord step_closed_loop(LoopState& state, const DiscretePlant& plant,
                            const LqgSynthesis& synthesis, const WatermarkMode& mode,
                            const NoiseSample& noise);

struct SigmaDiagnostics {
  Matrix sigma1;  // replay step x n: xhat^a(t|t-1) - xhat^tau(t|t-1)
  Matrix sigma2;  // replay step x n_zeta: zeta^a(t) - zeta^tau(t)
};

// Row t holds sample t after warm-up.
struct SimulationTrace {
  Matrix x, xpred, xfilt, zeta, u, xi, y, r;
  std::vector<double> g;
  std::vector<std::uint8_t> alarm;
  double eta = 0.0;
  double ts = 1.0;
  std::size_t warmup = 0;
  bool attacked = false;
  std::size_t attack_start = 0;
  std::size_t tau = 0;
  std::optional<SigmaDiagnostics> sigma;

  std::size_t length() const { return g.size(); }
};

SimulationTrace run_trace(const ClosedLoop& loop, std::size_t horizon, const InitialState& init,
                          const NoisePlan& noise, const SimulationOptions& options = {});

SimulationTrace run_trace(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                          const WatermarkMode& mode, std::size_t horizon,
                          const InitialState& init, const NoisePlan& noise,
                          const SimulationOptions& options = {});

// Two-phase replay: outputs of [attack_start - tau, attack_start) are recorded and
// fed back during [attack_start, attack_start + tau). With paired = true the
// estimator and detector discrepancies against the recorded phase are emitted.
SimulationTrace run_replay_attack(const ClosedLoop& loop, const AttackScenario& scenario,
                                  const InitialState& init, const NoisePlan& noise, bool paired,
                                  const SimulationOptions& options = {});

SimulationTrace run_replay_attack(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                                  const WatermarkMode& mode, const AttackScenario& scenario,
                                  const InitialState& init, const NoisePlan& noise, bool paired,
                                  const SimulationOptions& options = {});

// Sample average of x'Wx + u'Uu over rows [begin, end).
double empirical_cost(const SimulationTrace& trace, const CostWeights& weights, std::size_t begin,
                      std::size_t end);

void write_trace_csv(std::ostream& os, const SimulationTrace& trace);

// ---- Monte Carlo ensembles ----

enum class Execution { serial, parallel };

struct ExperimentSpec {
  DiscretePlant plant;
  LqgSynthesis synthesis;
  WatermarkMode mode;
  CostWeights weights;
  InitialState initial;
  std::optional<AttackScenario> attack;  // none: nominal runs of `horizon` samples
  std::size_t horizon = 1000;
  double alpha = 0.01;
  std::size_t window = 100;
  std::vector<std::size_t> betas{1};
  SimulationOptions sim;
  std::uint64_t master_seed = 0;
  std::size_t alarm_skip = 0;  // replay samples excluded from the alarm rate
};

struct RunResult {
  std::vector<std::optional<std::size_t>> detection_samples;  // one per beta
  std::size_t alarms = 0;          // over the evaluation span
  std::size_t alarm_samples = 0;
  double cost_sum = 0.0;           // over the attack-free stationary span
  std::size_t cost_samples = 0;
  double g_sum = 0.0;
};

struct EnsembleSummary {
  std::size_t runs = 0;
  std::vector<DetectionSummary> detection;  // one per beta (attack experiments only)
  double alarm_rate = 0.0;       // replay window under attack, whole trace otherwise
  std::size_t alarms = 0;
  std::size_t alarm_samples = 0;
  double empirical_cost = 0.0;   // per-sample average over attack-free samples
  double mean_g = 0.0;
};

RunResult run_experiment_once(const ClosedLoop& loop, const ExperimentSpec& spec,
                              std::size_t run_index);

// Runs use NoisePlan(master_seed, i). Per-run results are merged in run order,
// so the summary is identical for serial and parallel execution.
EnsembleSummary monte_carlo(const ExperimentSpec& spec, std::size_t runs,
                            Execution exec = Execution::parallel);

}  // namespace dyndet
