#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "dyndet/errors.hpp"
#include "dyndet/report.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

void add_common(CLI::App* sub, dyndet::cli::Options& o) {
  sub->add_option("--config", o.config_path, "JSON experiment config (default: DC motor preset)");
  sub->add_option("--seed", o.seed, "master seed for noise streams");
  sub->add_option("--runs", o.runs, "Monte Carlo runs per point");
  sub->add_option("--out", o.out, "output directory");
  sub->add_flag("--use-paper-design", o.use_paper_design,
                "use the hand-tuned DC motor detector matrices instead of optimizing");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dyndet::cli;
  CLI::App app{"Replay attack detection with a dynamic watermark generator"};
  app.set_version_flag("--version", std::string(dyndet::kToolVersion));
  app.require_subcommand(1);

  Options o;
  int (*run)(const Options&, std::ostream&) = nullptr;
  auto sub = [&](const char* name, const char* help, int (*fn)(const Options&, std::ostream&)) {
    CLI::App* s = app.add_subcommand(name, help);
    add_common(s, o);
    s->callback([&run, fn] { run = fn; });
    return s;
  };

  auto* preset = app.add_subcommand("preset", "print a preset config (dc_motor or scalar)");
  preset->add_option("name", o.preset, "preset name")->capture_default_str();
  preset->callback([&run] { run = cmd_preset; });

  sub("synthesize", "LQG synthesis report and replay stealthiness verdict", cmd_synthesize);
  sub("design", "optimize (or evaluate) a detector design", cmd_design)
      ->add_option("--delta", o.delta, "lower bound on the spectral radius of Delta");
  sub("simulate", "attack-free closed-loop trace", cmd_simulate);
  sub("attack", "single replay attack trace with detection times", cmd_attack);
  sub("detection-curve", "detection rate and time versus beta, dynamic vs i.i.d.",
      cmd_detection_curve)
      ->add_option("--betas", o.betas, "alarm thresholds")
      ->delimiter(',');
  sub("control-signal", "control signals calibrated to equal detection time", cmd_control_signal);
  sub("loss-sweep", "optimized performance loss versus delta", cmd_loss_sweep)
      ->add_option("--grid", o.grid, "delta values")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    return run(o, std::cout);
  } catch (const dyndet::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const dyndet::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}
