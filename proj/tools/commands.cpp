#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "dyndet/errors.hpp"
#include "dyndet/experiments.hpp"
#include "dyndet/report.hpp"

namespace dyndet::cli {

namespace fs = std::filesystem;

ExperimentConfig resolve_config(const Options& opts) {
  ExperimentConfig c = opts.config_path.empty() ? dc_motor_preset() : load_config(opts.config_path);
  if (opts.seed) c.seed = *opts.seed;
  if (opts.runs) {
    if (*opts.runs == 0) throw ConfigError("--runs must be at least 1");
    c.runs = *opts.runs;
    c.control_runs = *opts.runs;
  }
  if (opts.out) c.out_dir = *opts.out;
  if (opts.delta) {
    if (!(*opts.delta > 1.0)) throw ConfigError("--delta: δ must exceed 1");
    c.delta = *opts.delta;
  }
  if (!opts.betas.empty()) {
    for (const auto b : opts.betas) {
      if (b == 0 || b > c.window) throw ConfigError("--betas: every beta must lie in [1, window]");
    }
    c.betas = opts.betas;
  }
  if (!opts.grid.empty()) {
    for (const double d : opts.grid) {
      if (!(d > 1.0)) throw ConfigError("--grid: δ must exceed 1");
    }
    c.sweep_grid = opts.grid;
  }
  if (opts.use_paper_design) {
    const auto d = reference_dc_motor_design();
    if (c.discrete.a.rows() != d.n_zeta() || c.discrete.b.cols() != 1 || c.discrete.c.rows() != 1) {
      throw ConfigError("--use-paper-design needs a 3-state single-input single-output plant");
    }
    c.design = d;
    c.n_zeta = d.n_zeta();
  }
  return c;
}

namespace {

struct Context {
  ExperimentConfig cfg;
  DiscretePlant plant;
  CostWeights weights;
  LqgSynthesis syn;
  Provenance prov;
};

Context make_context(const Options& opts) {
  Context ctx;
  ctx.cfg = resolve_config(opts);
  ctx.plant = ctx.cfg.discrete_plant();
  ctx.weights = ctx.cfg.cost();
  ctx.syn = synthesize_lqg(ctx.plant, ctx.weights);
  ctx.prov = {config_hash(ctx.cfg), ctx.cfg.seed};
  return ctx;
}

std::ofstream open_output(const Context& ctx, const std::string& name) {
  std::error_code ec;
  fs::create_directories(ctx.cfg.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + ctx.cfg.out_dir + ": " + ec.message());
  const fs::path path = fs::path(ctx.cfg.out_dir) / name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  return os;
}

void write_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
  os << name << " =\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << "  ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << format_number(m(i, j));
    os << '\n';
  }
}

DynamicDetectorDesign obtain_design(const Context& ctx, std::ostream& log) {
  if (ctx.cfg.design) {
    validate_design(*ctx.cfg.design, ctx.plant);
    return *ctx.cfg.design;
  }
  if (!ctx.cfg.design_file.empty()) {
    std::ifstream in(ctx.cfg.design_file, std::ios::binary);
    if (!in) throw ConfigError("cannot open design file " + ctx.cfg.design_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    DynamicDetectorDesign d = design_record_from_json(ss.str()).design;
    validate_design(d, ctx.plant);
    return d;
  }
  log << "optimizing detector for delta = " << format_number(ctx.cfg.delta) << '\n';
  return optimize_design(ctx.plant, ctx.syn, ctx.weights, ctx.cfg.delta, ctx.cfg.optimizer()).design;
}

IidWatermark obtain_baseline(const Context& ctx, const DynamicDetectorDesign& design) {
  if (ctx.cfg.iid_cov) return {*ctx.cfg.iid_cov};
  const LossReport loss = performance_loss(ctx.plant, ctx.syn, ctx.weights, design);
  return iid_baseline_matched(ctx.plant, ctx.syn, ctx.weights, std::max(0.0, loss.delta_loss));
}

WatermarkMode configured_mode(const Context& ctx, std::ostream& log) {
  if (ctx.cfg.watermark_mode == "none") return NoWatermark{};
  if (ctx.cfg.watermark_mode == "iid" && ctx.cfg.iid_cov) return IidWatermark{*ctx.cfg.iid_cov};
  const DynamicDetectorDesign d = obtain_design(ctx, log);
  if (ctx.cfg.watermark_mode == "iid") return obtain_baseline(ctx, d);
  return d;
}

ExperimentSpec base_spec(const Context& ctx) {
  ExperimentSpec s;
  s.plant = ctx.plant;
  s.synthesis = ctx.syn;
  s.weights = ctx.weights;
  s.initial = ctx.cfg.initial();
  s.attack = ctx.cfg.attack();
  s.horizon = ctx.cfg.horizon;
  s.alpha = ctx.cfg.alpha;
  s.window = ctx.cfg.window;
  s.betas = ctx.cfg.betas;
  s.sim.warmup = ctx.cfg.warmup;
  s.sim.alpha = ctx.cfg.alpha;
  s.master_seed = ctx.cfg.seed;
  return s;
}

}  // namespace

int cmd_preset(const Options& opts, std::ostream& out) {
  ExperimentConfig c;
  if (opts.preset == "dc_motor") {
    c = dc_motor_preset();
  } else if (opts.preset == "scalar") {
    c = scalar_preset();
  } else {
    throw ConfigError("unknown preset \"" + opts.preset + "\" (expected dc_motor or scalar)");
  }
  out << config_to_json(c);
  return 0;
}

int cmd_synthesize(const Options& opts, std::ostream& out) {
  const Context ctx = make_context(opts);
  const StealthReport st = replay_stealthy(ctx.syn);
  std::ostringstream rep;
  write_provenance(rep, ctx.prov);
  write_matrix(rep, "A", ctx.plant.a);
  write_matrix(rep, "B", ctx.plant.b);
  write_matrix(rep, "C", ctx.plant.c);
  write_matrix(rep, "P", ctx.syn.p);
  write_matrix(rep, "K", ctx.syn.k);
  write_matrix(rep, "Sigma_e", ctx.syn.sigma_e);
  write_matrix(rep, "L", ctx.syn.l);
  write_matrix(rep, "H", ctx.syn.h);
  write_matrix(rep, "Gamma", ctx.syn.gamma);
  rep << "eig(Gamma) =\n";
  for (const auto& z : st.gamma_spectrum.eigenvalues) {
    rep << "  " << format_number(z.real()) << (z.imag() < 0 ? " - " : " + ")
        << format_number(std::abs(z.imag())) << "i  |" << format_number(std::abs(z)) << "|\n";
  }
  rep << "rho(Gamma) = " << format_number(st.gamma_spectrum.spectral_radius) << '\n';
  rep << "J_lqg = " << format_number(lqg_cost(ctx.plant, ctx.syn, ctx.weights)) << '\n';
  rep << "replay verdict = " << (st.stealthy ? "stealthy" : "detectable") << '\n';
  out << rep.str();
  auto os = open_output(ctx, "synthesis.txt");
  os << rep.str();
  return 0;
}

int cmd_design(const Options& opts, std::ostream& out) {
  const Context ctx = make_context(opts);
  DesignRecord rec;
  rec.delta = ctx.cfg.delta;
  if (ctx.cfg.design) {
    validate_design(*ctx.cfg.design, ctx.plant);
    rec.design = *ctx.cfg.design;
    out << "evaluating the given design (no optimization)\n";
  } else {
    out << "optimizing detector for delta = " << format_number(ctx.cfg.delta) << '\n';
    const OptimizeResult res =
        optimize_design(ctx.plant, ctx.syn, ctx.weights, ctx.cfg.delta, ctx.cfg.optimizer());
    rec.design = res.design;
    out << "best start " << res.best_start << " of " << res.start_losses.size()
        << "; constructive seed J_tilde = " << format_number(res.seed_loss.j_tilde) << '\n';
  }
  const LossReport loss = performance_loss(ctx.plant, ctx.syn, ctx.weights, rec.design);
  rec.rho_delta = loss.rho_delta;
  rec.j_lqg = loss.j_lqg;
  rec.j_tilde = loss.j_tilde;
  rec.delta_loss = loss.delta_loss;
  out << "rho(Delta) = " << format_number(loss.rho_delta) << (loss.rho_delta >= ctx.cfg.delta ? "" : "  (below delta)")
      << "\nJ_lqg = " << format_number(loss.j_lqg) << "\nJ_tilde = " << format_number(loss.j_tilde)
      << "\ndelta_loss = " << format_number(loss.delta_loss) << '\n';
  auto os = open_output(ctx, "design.json");
  os << design_record_to_json(rec, &ctx.prov);
  return 0;
}

int cmd_simulate(const Options& opts, std::ostream& out) {
  const Context ctx = make_context(opts);
  const WatermarkMode mode = configured_mode(ctx, out);
  SimulationOptions sim{ctx.cfg.warmup, ctx.cfg.alpha};
  const SimulationTrace tr = run_trace(ctx.plant, ctx.syn, mode, ctx.cfg.horizon, ctx.cfg.initial(),
                                       NoisePlan{ctx.cfg.seed, 0}, sim);
  std::size_t alarms = 0;
  for (const auto a : tr.alarm) alarms += a;
  out << "samples = " << tr.length() << "\nalarm rate = "
      << format_number(static_cast<double>(alarms) / static_cast<double>(tr.length()))
      << "\nempirical cost = " << format_number(empirical_cost(tr, ctx.weights, 0, tr.length()))
      << '\n';
  auto os = open_output(ctx, "trace.csv");
  write_provenance(os, ctx.prov);
  write_trace_csv(os, tr);
  return 0;
}

int cmd_attack(const Options& opts, std::ostream& out) {
  const Context ctx = make_context(opts);
  const WatermarkMode mode = configured_mode(ctx, out);
  SimulationOptions sim{ctx.cfg.warmup, ctx.cfg.alpha};
  const SimulationTrace tr =
      run_replay_attack(ctx.plant, ctx.syn, mode, ctx.cfg.attack(), ctx.cfg.initial(),
                        NoisePlan{ctx.cfg.seed, 0}, /*paired=*/true, sim);
  const AlarmSeries series = windowed_alarms(tr.g, tr.eta, ctx.cfg.window);
  for (const auto beta : ctx.cfg.betas) {
    const auto d = detection_time(series.counts, beta, tr.attack_start, tr.tau, ctx.plant.ts);
    out << "beta = " << beta << ": "
        << (d.detected ? "detected after " + format_number(d.detection_seconds) + " s" : "not detected")
        << '\n';
  }
  {
    auto os = open_output(ctx, "attack_trace.csv");
    write_provenance(os, ctx.prov);
    write_trace_csv(os, tr);
  }
  {
    // Row t of attack_trace.csv is sample t after warm-up; replay covers
    // [attack_start, attack_start + tau).
    nlohmann::ordered_json meta;
    meta["trace"] = "attack_trace.csv";
    meta["warmup"] = tr.warmup;
    meta["attack_start"] = tr.attack_start;
    meta["tau"] = tr.tau;
    meta["replay_end"] = tr.attack_start + tr.tau;
    meta["ts"] = tr.ts;
    meta["eta"] = tr.eta;
    meta["window"] = ctx.cfg.window;
    meta["config_hash"] = ctx.prov.config_hash;
    meta["seed"] = ctx.prov.master_seed;
    meta["tool_version"] = std::string(kToolVersion);
    auto os = open_output(ctx, "attack_trace.meta.json");
    os << meta.dump(2) << '\n';
  }
  if (tr.sigma) {
    auto os = open_output(ctx, "sigma.csv");
    write_provenance(os, ctx.prov);
    os << "k";
    for (Eigen::Index j = 0; j < tr.sigma->sigma1.cols(); ++j) os << ",sigma1_" << j + 1;
    for (Eigen::Index j = 0; j < tr.sigma->sigma2.cols(); ++j) os << ",sigma2_" << j + 1;
    os << '\n';
    for (Eigen::Index k = 0; k < tr.sigma->sigma1.rows(); ++k) {
      os << k;
      for (Eigen::Index j = 0; j < tr.sigma->sigma1.cols(); ++j) os << ',' << format_number(tr.sigma->sigma1(k, j));
      for (Eigen::Index j = 0; j < tr.sigma->sigma2.cols(); ++j) os << ',' << format_number(tr.sigma->sigma2(k, j));
      os << '\n';
    }
  }
  return 0;
}

int cmd_detection_curve(const Options& opts, std::ostream& out) {
  const Context ctx = make_context(opts);
  const DynamicDetectorDesign design = obtain_design(ctx, out);
  const IidWatermark baseline = obtain_baseline(ctx, design);
  const auto curves = detection_curves(base_spec(ctx), design, baseline, ctx.cfg.runs);
  std::ostringstream table;
  write_detection_curve_csv(table, curves);
  out << table.str();
  auto os = open_output(ctx, "detection_curve.csv");
  write_provenance(os, ctx.prov);
  os << table.str();
  return 0;
}

int cmd_control_signal(const Options& opts, std::ostream& out) {
  const Context ctx = make_context(opts);
  const DynamicDetectorDesign design = obtain_design(ctx, out);
  const IidWatermark matched = obtain_baseline(ctx, design);
  const Eigen::Index m = ctx.plant.m();
  // Direction of the i.i.d. covariance; identity when the matched loss is zero.
  const Matrix dir = matched.cov.trace() > 0.0 ? Matrix(matched.cov) : Matrix::Identity(m, m);

  ExperimentSpec spec = base_spec(ctx);
  const std::size_t beta = ctx.cfg.control_beta;
  const double target = ctx.cfg.control_target_s;
  const Calibration dyn = calibrate_detection_time(
      spec, [&](double s) { return WatermarkMode(scale_gain(design, s)); }, beta, target,
      ctx.cfg.control_runs);
  const Calibration iid = calibrate_detection_time(
      spec, [&](double s) { return WatermarkMode(IidWatermark{s * dir}); }, beta, target,
      ctx.cfg.control_runs);

  SimulationOptions sim{ctx.cfg.warmup, ctx.cfg.alpha};
  const NoisePlan plan{ctx.cfg.seed, 0};
  const SimulationTrace td = run_trace(ctx.plant, ctx.syn, scale_gain(design, dyn.scale),
                                       ctx.cfg.horizon, ctx.cfg.initial(), plan, sim);
  const SimulationTrace ti = run_trace(ctx.plant, ctx.syn, IidWatermark{iid.scale * dir},
                                       ctx.cfg.horizon, ctx.cfg.initial(), plan, sim);
  const SignalStats sd = signal_stats(td.u), si = signal_stats(ti.u);

  std::ostringstream summary;
  summary << "method,scale,calibrated,mean_detection_time_s,detection_rate,u_range,u_energy\n";
  auto row = [&](const char* name, const Calibration& c, const SignalStats& s) {
    summary << name << ',' << format_number(c.scale) << ',' << (c.converged ? 1 : 0) << ','
            << format_number(c.mean_detection_time_s) << ',' << format_number(c.detection_rate)
            << ',' << format_number(s.range) << ',' << format_number(s.energy) << '\n';
  };
  row("dynamic", dyn, sd);
  row("iid", iid, si);
  out << summary.str();
  if (!dyn.converged) out << "note: dynamic calibration: " << dyn.note << '\n';
  if (!iid.converged) out << "note: iid calibration: " << iid.note << '\n';
  {
    auto os = open_output(ctx, "control_summary.csv");
    write_provenance(os, ctx.prov);
    os << summary.str();
  }
  auto os = open_output(ctx, "control_signal.csv");
  write_provenance(os, ctx.prov);
  os << 't';
  for (Eigen::Index j = 0; j < m; ++j) os << ",u_dynamic_" << j + 1;
  for (Eigen::Index j = 0; j < m; ++j) os << ",u_iid_" << j + 1;
  os << '\n';
  for (Eigen::Index t = 0; t < td.u.rows(); ++t) {
    os << format_number(static_cast<double>(t) * ctx.plant.ts);
    for (Eigen::Index j = 0; j < m; ++j) os << ',' << format_number(td.u(t, j));
    for (Eigen::Index j = 0; j < m; ++j) os << ',' << format_number(ti.u(t, j));
    os << '\n';
  }
  return 0;
}

int cmd_loss_sweep(const Options& opts, std::ostream& out) {
  const Context ctx = make_context(opts);
  const auto rows = loss_sweep(ctx.plant, ctx.syn, ctx.weights, ctx.cfg.sweep_grid, ctx.cfg.optimizer());
  std::ostringstream table;
  write_sweep_csv(table, rows);
  out << table.str();
  auto os = open_output(ctx, "loss_sweep.csv");
  write_provenance(os, ctx.prov);
  os << table.str();
  return 0;
}

}  // namespace dyndet::cli
