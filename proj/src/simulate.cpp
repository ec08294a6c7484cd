#include "dyndet/simulate.hpp"

#include <ostream>
#include <sstream>

#include "dyndet/errors.hpp"
#include "dyndet/report.hpp"

namespace dyndet {

Eigen::Index watermark_state_dim(const WatermarkMode& mode) {
  if (const auto* d = std::get_if<DynamicDetectorDesign>(&mode)) return d->n_zeta();
  return 0;
}

void validate(const WatermarkMode& mode, const DiscretePlant& plant) {
  if (const auto* d = std::get_if<DynamicDetectorDesign>(&mode)) {
    require_square(d->a_tilde, "watermark: A_tilde");
    const auto nz = d->n_zeta();
    if (nz == 0) throw DimensionError("watermark: A_tilde is empty");
    if (d->m_tilde.rows() != nz || d->m_tilde.cols() != plant.p()) {
      throw DimensionError("watermark: M_tilde must be n_zeta x p");
    }
    if (d->k_tilde.rows() != plant.m() || d->k_tilde.cols() != nz) {
      throw DimensionError("watermark: K_tilde must be m x n_zeta");
    }
    for (const auto* m : {&d->a_tilde, &d->m_tilde, &d->k_tilde}) require_finite(*m, "watermark");
    const double rho = spectral_radius(d->a_tilde);
    if (rho >= 1.0) {
      std::ostringstream os;
      os << "watermark: A_tilde is not Schur (spectral radius " << rho << ")";
      throw DomainError(os.str());
    }
  } else if (const auto* w = std::get_if<IidWatermark>(&mode)) {
    if (w->cov.rows() != plant.m() || w->cov.cols() != plant.m()) {
      throw DimensionError("watermark: i.i.d. covariance must be m x m");
    }
    require_finite(w->cov, "watermark: i.i.d. covariance");
    if (!is_psd(w->cov)) {
      throw ArgumentError("watermark: i.i.d. covariance must be symmetric positive semidefinite");
    }
  }
}

Vector FProfile::at(std::size_t k, Eigen::Index dim) const {
  switch (kind) {
    case Kind::zero:
      return Vector::Zero(dim);
    case Kind::constant:
      return value;
    case Kind::ramp:
      return value * static_cast<double>(k);
  }
  return Vector::Zero(dim);
}

ClosedLoop::ClosedLoop(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                       WatermarkMode mode)
    : plant_(plant), synthesis_(synthesis), mode_(std::move(mode)), gstat_(synthesis.h) {
  validate(plant_);
  validate(mode_, plant_);
  if (synthesis_.k.rows() != plant_.m() || synthesis_.k.cols() != plant_.n() ||
      synthesis_.l.rows() != plant_.n() || synthesis_.l.cols() != plant_.p()) {
    throw DimensionError("closed loop: synthesis does not match the plant");
  }
  nz_ = watermark_state_dim(mode_);
  q_factor_ = covariance_factor(plant_.q);
  r_factor_ = covariance_factor(plant_.r);
  if (const auto* w = std::get_if<IidWatermark>(&mode_)) xi_factor_ = covariance_factor(w->cov);
}

LoopState ClosedLoop::initial_state(const InitialState& init, const NoisePlan& plan) const {
  validate(init, plant_);
  LoopState s;
  s.x = init.mean +
        covariance_factor(init.cov) * standard_normal(plan, NoiseStream::initial_state, 0, plant_.n());
  s.xpred = init.mean;
  s.zeta = Vector::Zero(nz_);
  return s;
}

NoiseSample ClosedLoop::draw(const NoisePlan& plan, std::uint64_t index) const {
  NoiseSample ns;
  ns.w = standard_normal(plan, NoiseStream::process, index, plant_.n());
  ns.v = standard_normal(plan, NoiseStream::measurement, index, plant_.p());
  if (std::holds_alternative<IidWatermark>(mode_)) {
    ns.xi = standard_normal(plan, NoiseStream::watermark, index, plant_.m());
  }
  return ns;
}

StepRecord ClosedLoop::step(LoopState& state, const NoiseSample& noise, const Vector* spoofed_y,
                            const Vector* disturbance) const {
  const auto& a = plant_.a;
  const auto& b = plant_.b;
  const auto& c = plant_.c;
  StepRecord rec;
  rec.x = state.x;
  rec.xpred = state.xpred;
  rec.zeta = state.zeta;
  rec.y_true = c * state.x + r_factor_ * noise.v;
  rec.y = spoofed_y ? *spoofed_y : rec.y_true;
  rec.r = rec.y - c * state.xpred;
  rec.g = gstat_(rec.r);
  rec.xfilt = state.xpred + synthesis_.l * rec.r;

  if (const auto* d = std::get_if<DynamicDetectorDesign>(&mode_)) {
    rec.xi = d->k_tilde * state.zeta;
    state.zeta = d->a_tilde * state.zeta + d->m_tilde * (rec.y - c * rec.xfilt);
  } else if (std::holds_alternative<IidWatermark>(mode_)) {
    rec.xi = xi_factor_ * noise.xi;
  } else {
    rec.xi = Vector::Zero(plant_.m());
  }
  rec.u = synthesis_.k * rec.xfilt + rec.xi;

  state.xpred = a * rec.xfilt + b * rec.u;
  state.x = a * state.x + b * rec.u + q_factor_ * noise.w;
  if (disturbance) state.x += *disturbance;
  return rec;
}

StepRecord step_closed_loop(LoopState& state, const DiscretePlant& plant,
                            const LqgSynthesis& synthesis, const WatermarkMode& mode,
                            const NoiseSample& noise) {
  const ClosedLoop loop(plant, synthesis, mode);
  if (state.x.size() != plant.n() || state.xpred.size() != plant.n() ||
      state.zeta.size() != loop.zeta_dim() || noise.w.size() != plant.n() ||
      noise.v.size() != plant.p() ||
      (std::holds_alternative<IidWatermark>(mode) && noise.xi.size() != plant.m())) {
    throw DimensionError("step_closed_loop: state or noise dimensions do not match the loop");
  }
  return loop.step(state, noise);
}

namespace {

SimulationTrace allocate_trace(const ClosedLoop& loop, std::size_t len, double eta,
                               const SimulationOptions& options) {
  const auto& p = loop.plant();
  const auto rows = static_cast<Eigen::Index>(len);
  SimulationTrace tr;
  tr.x.resize(rows, p.n());
  tr.xpred.resize(rows, p.n());
  tr.xfilt.resize(rows, p.n());
  tr.zeta.resize(rows, loop.zeta_dim());
  tr.u.resize(rows, p.m());
  tr.xi.resize(rows, p.m());
  tr.y.resize(rows, p.p());
  tr.r.resize(rows, p.p());
  tr.g.resize(len);
  tr.alarm.resize(len);
  tr.eta = eta;
  tr.ts = p.ts;
  tr.warmup = options.warmup;
  return tr;
}

void store(SimulationTrace& tr, std::size_t t, const StepRecord& rec) {
  const auto i = static_cast<Eigen::Index>(t);
  tr.x.row(i) = rec.x.transpose();
  tr.xpred.row(i) = rec.xpred.transpose();
  tr.xfilt.row(i) = rec.xfilt.transpose();
  tr.zeta.row(i) = rec.zeta.transpose();
  tr.u.row(i) = rec.u.transpose();
  tr.xi.row(i) = rec.xi.transpose();
  tr.y.row(i) = rec.y.transpose();
  tr.r.row(i) = rec.r.transpose();
  tr.g[t] = rec.g;
  tr.alarm[t] = rec.g > tr.eta ? 1 : 0;
}

LoopState warm_up(const ClosedLoop& loop, const InitialState& init, const NoisePlan& noise,
                  std::size_t warmup) {
  LoopState state = loop.initial_state(init, noise);
  for (std::size_t k = 0; k < warmup; ++k) loop.step(state, loop.draw(noise, k));
  return state;
}

}  // namespace

SimulationTrace run_trace(const ClosedLoop& loop, std::size_t horizon, const InitialState& init,
                          const NoisePlan& noise, const SimulationOptions& options) {
  const double eta = calibrate_threshold(static_cast<int>(loop.plant().p()), options.alpha);
  SimulationTrace tr = allocate_trace(loop, horizon, eta, options);
  LoopState state = warm_up(loop, init, noise, options.warmup);
  for (std::size_t t = 0; t < horizon; ++t) {
    store(tr, t, loop.step(state, loop.draw(noise, options.warmup + t)));
  }
  return tr;
}

SimulationTrace run_trace(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                          const WatermarkMode& mode, std::size_t horizon,
                          const InitialState& init, const NoisePlan& noise,
                          const SimulationOptions& options) {
  return run_trace(ClosedLoop(plant, synthesis, mode), horizon, init, noise, options);
}

SimulationTrace run_replay_attack(const ClosedLoop& loop, const AttackScenario& scenario,
                                  const InitialState& init, const NoisePlan& noise, bool paired,
                                  const SimulationOptions& options) {
  const auto& plant = loop.plant();
  if (scenario.tau == 0) throw ArgumentError("attack: tau must be at least one sample");
  if (scenario.attack_start < scenario.tau) {
    std::ostringstream os;
    os << "attack: horizon too short, attack_start=" << scenario.attack_start
       << " leaves no room to record tau=" << scenario.tau << " samples";
    throw ArgumentError(os.str());
  }
  if (scenario.ba.rows() != plant.n()) throw DimensionError("attack: Ba must have n rows");
  if (scenario.f.kind != FProfile::Kind::zero && scenario.f.value.size() != scenario.ba.cols()) {
    throw DimensionError("attack: f profile width must match the columns of Ba");
  }

  const std::size_t start = scenario.attack_start;
  const std::size_t tau = scenario.tau;
  const std::size_t horizon = start + tau;
  const double eta = calibrate_threshold(static_cast<int>(plant.p()), options.alpha);
  SimulationTrace tr = allocate_trace(loop, horizon, eta, options);
  tr.attacked = true;
  tr.attack_start = start;
  tr.tau = tau;

  std::vector<Vector> recorded_y(tau);
  std::vector<Vector> recorded_xpred;
  std::vector<Vector> recorded_zeta;
  if (paired) {
    recorded_xpred.resize(tau);
    recorded_zeta.resize(tau);
    tr.sigma.emplace();
    tr.sigma->sigma1.resize(static_cast<Eigen::Index>(tau), plant.n());
    tr.sigma->sigma2.resize(static_cast<Eigen::Index>(tau), loop.zeta_dim());
  }

  LoopState state = warm_up(loop, init, noise, options.warmup);
  for (std::size_t t = 0; t < horizon; ++t) {
    const NoiseSample ns = loop.draw(noise, options.warmup + t);
    if (t < start) {
      const StepRecord rec = loop.step(state, ns);
      if (t >= start - tau) {
        const std::size_t k = t - (start - tau);
        recorded_y[k] = rec.y_true;
        if (paired) {
          recorded_xpred[k] = rec.xpred;
          recorded_zeta[k] = rec.zeta;
        }
      }
      store(tr, t, rec);
    } else {
      const std::size_t k = t - start;
      if (paired) {
        const auto row = static_cast<Eigen::Index>(k);
        tr.sigma->sigma1.row(row) = (state.xpred - recorded_xpred[k]).transpose();
        tr.sigma->sigma2.row(row) = (state.zeta - recorded_zeta[k]).transpose();
      }
      const Vector disturbance = scenario.ba * scenario.f.at(k, scenario.ba.cols());
      store(tr, t, loop.step(state, ns, &recorded_y[k], &disturbance));
    }
  }
  return tr;
}

SimulationTrace run_replay_attack(const DiscretePlant& plant, const LqgSynthesis& synthesis,
                                  const WatermarkMode& mode, const AttackScenario& scenario,
                                  const InitialState& init, const NoisePlan& noise, bool paired,
                                  const SimulationOptions& options) {
  return run_replay_attack(ClosedLoop(plant, synthesis, mode), scenario, init, noise, paired,
                           options);
}

double empirical_cost(const SimulationTrace& trace, const CostWeights& weights, std::size_t begin,
                      std::size_t end) {
  end = std::min(end, trace.length());
  if (begin >= end) return 0.0;
  double sum = 0.0;
  for (std::size_t t = begin; t < end; ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    const Vector x = trace.x.row(i).transpose();
    const Vector u = trace.u.row(i).transpose();
    sum += x.dot(weights.w * x) + u.dot(weights.u * u);
  }
  return sum / static_cast<double>(end - begin);
}

void write_trace_csv(std::ostream& os, const SimulationTrace& trace) {
  auto header = [&os](const char* name, Eigen::Index count) {
    for (Eigen::Index j = 0; j < count; ++j) os << ',' << name << '_' << (j + 1);
  };
  os << 't';
  header("x", trace.x.cols());
  header("xhat", trace.xpred.cols());
  header("zeta", trace.zeta.cols());
  header("u", trace.u.cols());
  header("xi", trace.xi.cols());
  header("y", trace.y.cols());
  header("r", trace.r.cols());
  os << ",g,alarm\n";
  auto cells = [&os](const Matrix& m, Eigen::Index i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << format_number(m(i, j));
  };
  for (std::size_t t = 0; t < trace.length(); ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    os << t;
    cells(trace.x, i);
    cells(trace.xpred, i);
    cells(trace.zeta, i);
    cells(trace.u, i);
    cells(trace.xi, i);
    cells(trace.y, i);
    cells(trace.r, i);
    os << ',' << format_number(trace.g[t]) << ',' << static_cast<int>(trace.alarm[t]) << '\n';
  }
}

}  // namespace dyndet
