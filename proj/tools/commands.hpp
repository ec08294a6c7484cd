#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dyndet/config.hpp"

namespace dyndet::cli {

struct Options {
  std::string config_path;  // empty: DC motor preset
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::string> out;
  bool use_paper_design = false;
  std::optional<double> delta;
  std::vector<std::size_t> betas;
  std::vector<double> grid;
  std::string preset = "dc_motor";
};

// Config file (or preset) with command line overrides applied.
ExperimentConfig resolve_config(const Options& opts);

int cmd_preset(const Options& opts, std::ostream& out);
int cmd_synthesize(const Options& opts, std::ostream& out);
int cmd_design(const Options& opts, std::ostream& out);
int cmd_simulate(const Options& opts, std::ostream& out);
int cmd_attack(const Options& opts, std::ostream& out);
int cmd_detection_curve(const Options& opts, std::ostream& out);
int cmd_control_signal(const Options& opts, std::ostream& out);
int cmd_loss_sweep(const Options& opts, std::ostream& out);

}  // namespace dyndet::cli
