#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dyndet/plant.hpp"
#include "dyndet/simulate.hpp"
#include "dyndet/watermark.hpp"

namespace dyndet {

// Physical constants of the armature-controlled DC motor, SI units.
struct DcMotorParams {
  double b = 3.5e-6;    // viscous friction, N m s
  double j = 3.23e-6;   // rotor inertia, kg m^2
  double l = 2.75e-6;   // armature inductance, H
  double kb = 0.0274;   // back-emf constant, V / (rad/s)
  double kt = 0.0274;   // torque constant, N m / A
  double r = 4.0;       // armature resistance, Ohm
};

// States (theta, dtheta/dt, i), input voltage, output theta.
ContinuousPlant dc_motor_model(const DcMotorParams& p);

// Fully resolved experiment description. Every field carries a value after
// parsing, so the canonical dump doubles as the metadata of emitted files.
struct ExperimentConfig {
  std::string plant_model = "dc_motor";  // dc_motor | continuous | discrete
  double ts = 0.01;
  DcMotorParams motor;
  ContinuousPlant continuous;  // dc_motor and continuous models
  StateSpace discrete;         // discrete model (and the ZOH result otherwise)

  Matrix q, r;                 // process / measurement noise covariances
  Matrix w, u;                 // cost weights as given
  bool cost_scale_by_ts = false;

  Vector x0_mean;
  Matrix x0_cov;

  double alpha = 0.01;
  std::size_t window = 100;
  std::vector<std::size_t> betas{1, 3, 5, 10, 30};

  std::size_t tau = 1500;
  std::size_t attack_start = 1500;
  Matrix ba;
  FProfile f;

  std::string watermark_mode = "dynamic";  // none | dynamic | iid
  double delta = 1.03;
  Eigen::Index n_zeta = 0;
  std::optional<DynamicDetectorDesign> design;  // explicit matrices
  std::string design_file;
  std::optional<Matrix> iid_cov;                // absent: matched to the dynamic design's loss

  std::size_t warmup = 500;
  std::size_t horizon = 3000;

  std::size_t runs = 1000;
  std::uint64_t seed = 1;

  int opt_starts = 16;
  int opt_max_evals = 3000;
  int opt_penalty_rounds = 3;
  std::uint64_t opt_seed = 1;

  std::size_t control_beta = 30;
  double control_target_s = 0.5;
  std::size_t control_runs = 100;

  std::vector<double> sweep_grid{1.01, 1.03, 1.05, 1.1};

  std::string out_dir = "out";

  DiscretePlant discrete_plant() const;
  CostWeights cost() const;  // Ts-scaled when cost_scale_by_ts
  InitialState initial() const;
  AttackScenario attack() const;
  OptimizeOptions optimizer() const;
};

ExperimentConfig dc_motor_preset();
// A = B = C = Q = R = W = U = 1.
ExperimentConfig scalar_preset();

// The hand-tuned DC motor design (At, Mt, Kt) for delta = 1.03.
DynamicDetectorDesign reference_dc_motor_design();

// JSON document; absent keys keep the DC motor preset values. Numbers may be given
// as strings with trailing units ("3.5e-6 N.m.s"). Throws ConfigError with the
// offending field path.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Canonical dump with every field present; parse_config(config_to_json(c)) == c.
std::string config_to_json(const ExperimentConfig& config);
// FNV-1a of the canonical dump, output directory excluded.
std::string config_hash(const ExperimentConfig& config);

}  // namespace dyndet
