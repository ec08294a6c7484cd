#include <exception>

#include "dyndet/errors.hpp"
#include "dyndet/simulate.hpp"

#ifdef DYNDET_OPENMP
#include <omp.h>
#endif

namespace dyndet {

RunResult run_experiment_once(const ClosedLoop& loop, const ExperimentSpec& spec,
                              std::size_t run_index) {
  const NoisePlan plan{spec.master_seed, run_index};
  SimulationOptions sim = spec.sim;
  sim.alpha = spec.alpha;
  RunResult out;
  const auto& w = spec.weights;

  SimulationTrace tr;
  std::size_t alarm_begin = 0;
  std::size_t cost_end = 0;
  if (spec.attack) {
    tr = run_replay_attack(loop, *spec.attack, spec.initial, plan, /*paired=*/false, sim);
    alarm_begin = tr.attack_start + spec.alarm_skip;
    cost_end = tr.attack_start;
  } else {
    tr = run_trace(loop, spec.horizon, spec.initial, plan, sim);
    cost_end = tr.length();
  }

  for (std::size_t t = 0; t < cost_end; ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    out.cost_sum += tr.x.row(i).dot(tr.x.row(i) * w.w) + tr.u.row(i).dot(tr.u.row(i) * w.u);
  }
  out.cost_samples = cost_end;

  for (std::size_t t = alarm_begin; t < tr.length(); ++t) {
    out.alarms += tr.alarm[t];
    out.g_sum += tr.g[t];
  }
  out.alarm_samples = tr.length() > alarm_begin ? tr.length() - alarm_begin : 0;

  if (spec.attack) {
    const AlarmSeries series = windowed_alarms(tr.g, tr.eta, spec.window);
    out.detection_samples.reserve(spec.betas.size());
    for (const std::size_t beta : spec.betas) {
      const auto outcome =
          detection_time(series.counts, beta, tr.attack_start, tr.tau, spec.plant.ts);
      out.detection_samples.push_back(outcome.detection_samples);
    }
  }
  return out;
}

namespace {

// Order-dependent fold; both execution paths feed it runs 0, 1, 2, ... in turn.
class SummaryFold {
 public:
  SummaryFold(const ExperimentSpec& spec, std::size_t runs) : spec_(spec) {
    if (spec.attack) times_.assign(spec.betas.size(), {});
    for (auto& v : times_) v.reserve(runs);
  }

  void add(const RunResult& r) {
    ++runs_;
    alarms_ += r.alarms;
    alarm_samples_ += r.alarm_samples;
    cost_sum_ += r.cost_sum;
    cost_samples_ += r.cost_samples;
    g_sum_ += r.g_sum;
    for (std::size_t b = 0; b < times_.size(); ++b) {
      const auto& d = r.detection_samples[b];
      times_[b].push_back(d ? std::optional<double>(static_cast<double>(*d) * spec_.plant.ts)
                            : std::nullopt);
    }
  }

  EnsembleSummary finish() const {
    EnsembleSummary s;
    s.runs = runs_;
    s.alarms = alarms_;
    s.alarm_samples = alarm_samples_;
    s.alarm_rate = alarm_samples_ ? static_cast<double>(alarms_) / static_cast<double>(alarm_samples_)
                                  : 0.0;
    s.mean_g = alarm_samples_ ? g_sum_ / static_cast<double>(alarm_samples_) : 0.0;
    s.empirical_cost = cost_samples_ ? cost_sum_ / static_cast<double>(cost_samples_) : 0.0;
    for (std::size_t b = 0; b < times_.size(); ++b) {
      s.detection.push_back(summarize_detections(spec_.betas[b], times_[b]));
    }
    return s;
  }

 private:
  const ExperimentSpec& spec_;
  std::size_t runs_ = 0;
  std::size_t alarms_ = 0;
  std::size_t alarm_samples_ = 0;
  double cost_sum_ = 0.0;
  std::size_t cost_samples_ = 0;
  double g_sum_ = 0.0;
  std::vector<std::vector<std::optional<double>>> times_;
};

EnsembleSummary monte_carlo_serial(const ClosedLoop& loop, const ExperimentSpec& spec,
                                   std::size_t runs) {
  SummaryFold fold(spec, runs);
  for (std::size_t i = 0; i < runs; ++i) fold.add(run_experiment_once(loop, spec, i));
  return fold.finish();
}

EnsembleSummary monte_carlo_parallel(const ClosedLoop& loop, const ExperimentSpec& spec,
                                     std::size_t runs) {
  std::vector<RunResult> results(runs);
  std::exception_ptr failure;
  const auto n = static_cast<long long>(runs);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] =
          run_experiment_once(loop, spec, static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(dyndet_mc_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  SummaryFold fold(spec, runs);
  for (const auto& r : results) fold.add(r);
  return fold.finish();
}

}  // namespace

EnsembleSummary monte_carlo(const ExperimentSpec& spec, std::size_t runs, Execution exec) {
  if (runs == 0) throw ArgumentError("monte_carlo: runs must be at least one");
  for (const std::size_t beta : spec.betas) {
    if (beta == 0 || beta > spec.window) {
      throw ArgumentError("monte_carlo: every beta must lie in [1, window]");
    }
  }
  const ClosedLoop loop(spec.plant, spec.synthesis, spec.mode);
  return exec == Execution::serial ? monte_carlo_serial(loop, spec, runs)
                                   : monte_carlo_parallel(loop, spec, runs);
}

}  // namespace dyndet
