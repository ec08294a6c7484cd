#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "dyndet/errors.hpp"
#include "dyndet/report.hpp"
#include "dyndet/rng.hpp"
#include "dyndet/watermark.hpp"

#ifdef DYNDET_OPENMP
#include <omp.h>
#endif

namespace dyndet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
// Aim slightly above delta so rounding in the eigen solver cannot flip feasibility.
constexpr double kDeltaMargin = 1e-6;
constexpr double kMaxCancellation = 1e6;

struct Layout {
  Eigen::Index nz, p, m;
  Eigen::Index size() const { return nz * nz + nz * p + m * nz; }
};

Vector pack(const DynamicDetectorDesign& d) {
  const Layout lay{d.n_zeta(), d.m_tilde.cols(), d.k_tilde.rows()};
  Vector x(lay.size());
  Eigen::Index o = 0;
  x.segment(o, d.a_tilde.size()) = d.a_tilde.reshaped();
  o += d.a_tilde.size();
  x.segment(o, d.m_tilde.size()) = d.m_tilde.reshaped();
  o += d.m_tilde.size();
  x.segment(o, d.k_tilde.size()) = d.k_tilde.reshaped();
  return x;
}

DynamicDetectorDesign unpack(const Vector& x, const Layout& lay) {
  DynamicDetectorDesign d;
  Eigen::Index o = 0;
  d.a_tilde = x.segment(o, lay.nz * lay.nz).reshaped(lay.nz, lay.nz);
  o += lay.nz * lay.nz;
  d.m_tilde = x.segment(o, lay.nz * lay.p).reshaped(lay.nz, lay.p);
  o += lay.nz * lay.p;
  d.k_tilde = x.segment(o, lay.m * lay.nz).reshaped(lay.m, lay.nz);
  return d;
}

struct Evaluation {
  bool admissible = false;  // At Schur after repair, full rank, loss finite
  double j_tilde = kInf;
  double rho_delta = 0.0;
  DynamicDetectorDesign design;  // after radial repair
};

class Problem {
 public:
  Problem(const DiscretePlant& plant, const LqgSynthesis& syn, const CostWeights& wts, double delta,
          double rescale)
      : plant_(plant), syn_(syn), wts_(wts), delta_(delta), rescale_(rescale) {
    j_lqg_ = lqg_cost(plant, syn, wts);
  }

  double j_lqg() const { return j_lqg_; }
  double target() const { return delta_ * (1.0 + kDeltaMargin); }

  Evaluation evaluate(DynamicDetectorDesign d) const {
    Evaluation ev;
    if (!d.a_tilde.allFinite() || !d.m_tilde.allFinite() || !d.k_tilde.allFinite()) return ev;
    const double rho_a = spectral_radius(d.a_tilde);
    if (rho_a >= 1.0) d.a_tilde *= rescale_ / rho_a;
    if (!is_full_rank(d.a_tilde)) return ev;
    const AssembledMatrices am = assemble(plant_, syn_, wts_, d);
    Matrix cov;
    try {
      const Matrix ts = am.theta * am.lag;
      cov = solve_dlyap(am.theta, am.psi + ts + ts.transpose());
    } catch (const NumericError&) {
      return ev;
    }
    // Realizations with huge internal states and a small output cancel in
    // tr(G cov); their value is rounding noise, so they are not admissible.
    const Matrix terms = am.g.cwiseProduct(cov.transpose());
    const double j = terms.sum();
    if (!std::isfinite(j) || j < j_lqg_ * (1.0 - 1e-9)) return ev;
    if (terms.cwiseAbs().sum() > kMaxCancellation * std::abs(j)) return ev;
    ev.admissible = true;
    ev.j_tilde = j;
    ev.rho_delta = spectral_radius(am.delta);
    ev.design = std::move(d);
    return ev;
  }

  // Exterior quadratic penalty on the shortfall, measured in units of (delta - 1).
  double objective(const Evaluation& ev, double mu) const {
    if (!ev.admissible) return kInf;
    const double shortfall = std::max(0.0, target() - ev.rho_delta) / (delta_ - 1.0);
    return ev.j_tilde + mu * j_lqg_ * shortfall * shortfall;
  }

  bool feasible(const Evaluation& ev) const { return ev.admissible && ev.rho_delta >= delta_; }

 private:
  const DiscretePlant& plant_;
  const LqgSynthesis& syn_;
  const CostWeights& wts_;
  double delta_;
  double rescale_;
  double j_lqg_;
};

// Plain Nelder-Mead with a fixed evaluation budget. Returns the best vertex.
template <class F>
Vector nelder_mead(const F& f, const Vector& x0, const Vector& step, int max_evals) {
  const Eigen::Index n = x0.size();
  std::vector<Vector> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> val(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)](i) += step(i);
  int evals = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    val[i] = f(pts[i]);
    ++evals;
  }
  std::vector<std::size_t> idx(pts.size());
  while (evals < max_evals) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];
    if (std::isfinite(val[worst]) &&
        val[worst] - val[best] <= 1e-12 * (std::abs(val[best]) + 1e-300)) {
      break;
    }
    Vector centroid = Vector::Zero(n);
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) centroid += pts[idx[k]];
    centroid /= static_cast<double>(n);

    const Vector xr = centroid + (centroid - pts[worst]);
    const double fr = f(xr);
    ++evals;
    if (fr < val[best]) {
      const Vector xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid))
                              : Vector(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = f(xc);
    ++evals;
    if (fc < std::min(fr, val[worst])) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (std::size_t k = 1; k < idx.size(); ++k) {
      const std::size_t i = idx[k];
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      val[i] = f(pts[i]);
      ++evals;
    }
  }
  const auto it = std::min_element(val.begin(), val.end());
  return pts[static_cast<std::size_t>(it - val.begin())];
}

Vector initial_step(const DynamicDetectorDesign& d) {
  const Layout lay{d.n_zeta(), d.m_tilde.cols(), d.k_tilde.rows()};
  Vector x = pack(d);
  Vector step(x.size());
  const double ms = std::max(d.m_tilde.cwiseAbs().maxCoeff(), 1e-3);
  const double ks = std::max(d.k_tilde.cwiseAbs().maxCoeff(), 1e-3);
  const Eigen::Index na = lay.nz * lay.nz, nm = lay.nz * lay.p;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double block = i < na ? 0.05 : (i < na + nm ? 0.1 * ms : 0.1 * ks);
    step(i) = 0.1 * std::abs(x(i)) + block;
  }
  return step;
}

// Minimum-variance first-order design placing a real root of det(zI - Delta) at
// z0 = delta: with F(z) = Kt (zI - At)^-1 Mt and T(z) = C(I-LC)(zI - Gamma)^-1 B,
// a root needs F(z0) T(z0) to have eigenvalue -1. A single pole at 1/z0 aligned
// with the top singular pair of T(z0) does so at the least watermark variance.
std::optional<DynamicDetectorDesign> single_pole_seed(const DiscretePlant& plant,
                                                      const LqgSynthesis& syn, Eigen::Index nz,
                                                      double z0) {
  const auto n = plant.n();
  const Matrix c_ilc = plant.c * (Matrix::Identity(n, n) - syn.l * plant.c);
  const Matrix resolvent = (z0 * Matrix::Identity(n, n) - syn.gamma).partialPivLu().solve(plant.b);
  const Matrix t = c_ilc * resolvent;
  if (!t.allFinite()) return std::nullopt;
  const Eigen::JacobiSVD<Matrix> svd(t, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double s1 = svd.singularValues()(0);
  if (!(s1 > 0.0) || !std::isfinite(s1)) return std::nullopt;
  const double pole = 1.0 / z0;
  const double km = -(z0 - pole) / s1;
  const double m = std::sqrt(std::abs(km));
  const double k = km >= 0.0 ? m : -m;

  DynamicDetectorDesign d;
  d.a_tilde = Matrix::Zero(nz, nz);
  d.a_tilde(0, 0) = pole;
  // Unused states: distinct stable poles keep At full rank and out of the loop.
  for (Eigen::Index i = 1; i < nz; ++i) d.a_tilde(i, i) = 0.5 / static_cast<double>(i);
  d.m_tilde = Matrix::Zero(nz, plant.p());
  d.m_tilde.row(0) = m * svd.matrixU().col(0).transpose();
  d.k_tilde = Matrix::Zero(plant.m(), nz);
  d.k_tilde.col(0) = k * svd.matrixV().col(0);
  return d;
}

Matrix random_schur(const NoisePlan& plan, std::uint64_t index, Eigen::Index nz) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    const Vector g = standard_normal(plan, NoiseStream::optimizer, index * 64 + attempt, nz * nz);
    Matrix a = g.reshaped(nz, nz);
    const double rho = spectral_radius(a);
    const double target = 0.3 + 0.65 * counter_uniform(plan, NoiseStream::optimizer,
                                                       index * 64 + attempt, 1u << 20);
    if (rho > 0.0) a *= target / rho;
    if (is_full_rank(a) || attempt == 63) return a;
  }
}

struct StartResult {
  std::optional<Evaluation> best;  // feasible only
};

// K_t scaling pushes an almost-feasible end point over the rho(Delta) boundary.
std::optional<Evaluation> repair(const Problem& prob, const Evaluation& ev) {
  if (prob.feasible(ev)) return ev;
  if (!ev.admissible) return std::nullopt;
  for (int j = 0; j < 16; ++j) {
    DynamicDetectorDesign d = ev.design;
    d.k_tilde *= 1.0 + 1e-4 * std::ldexp(1.0, j);
    Evaluation e2 = prob.evaluate(std::move(d));
    if (prob.feasible(e2)) return e2;
  }
  return std::nullopt;
}

void keep_better(std::optional<Evaluation>& slot, std::optional<Evaluation> cand) {
  if (!cand) return;
  if (!slot || cand->j_tilde < slot->j_tilde) slot = std::move(cand);
}

StartResult run_start(const Problem& prob, const DynamicDetectorDesign& start,
                      const OptimizeOptions& opt) {
  StartResult out;
  const Layout lay{start.n_zeta(), start.m_tilde.cols(), start.k_tilde.rows()};
  Evaluation current = prob.evaluate(start);
  keep_better(out.best, repair(prob, current));
  if (!current.admissible) return out;

  double mu = 10.0;
  Vector x = pack(current.design);
  for (int round = 0; round < opt.penalty_rounds; ++round, mu *= 10.0) {
    const auto f = [&](const Vector& v) { return prob.objective(prob.evaluate(unpack(v, lay)), mu); };
    x = nelder_mead(f, x, initial_step(unpack(x, lay)), opt.max_evals_per_round);
    current = prob.evaluate(unpack(x, lay));
    if (!current.admissible) break;
    x = pack(current.design);
    keep_better(out.best, repair(prob, current));
  }
  return out;
}

}  // namespace

OptimizeResult optimize_design(const DiscretePlant& plant, const LqgSynthesis& syn,
                               const CostWeights& wts, double delta,
                               const OptimizeOptions& opt) {
  if (!(delta > 1.0) || !std::isfinite(delta)) {
    std::ostringstream os;
    os << "optimize_design: delta must exceed 1, got " << format_number(delta);
    throw ArgumentError(os.str());
  }
  if (opt.starts < 1) throw ArgumentError("optimize_design: at least one start is required");
  if (opt.penalty_rounds < 1 || opt.max_evals_per_round < 1) {
    throw ArgumentError("optimize_design: penalty rounds and evaluation budget must be positive");
  }
  if (!(opt.schur_rescale > 0.0 && opt.schur_rescale < 1.0)) {
    throw ArgumentError("optimize_design: schur_rescale must lie in (0, 1)");
  }
  const Eigen::Index n = plant.n();
  const Eigen::Index nz = opt.n_zeta.value_or(n);
  if (nz < 1) throw ArgumentError("optimize_design: n_zeta must be positive");
  for (const auto& w : opt.warm_starts)
    if (w.n_zeta() != nz) throw DimensionError("optimize_design: warm start has the wrong n_zeta");

  const Problem prob(plant, syn, wts, delta, opt.schur_rescale);

  // The determinant bound delta^(n + n_zeta) forces some |eigenvalue| >= delta.
  const double target_det = std::pow(prob.target(), static_cast<double>(n + nz));
  const Matrix seed_a = 0.5 * Matrix::Identity(nz, nz);
  const ConstructedDesign seed = construct_detectable_design(plant, syn, seed_a, target_det);

  std::vector<DynamicDetectorDesign> starts;
  starts.push_back(seed.design);
  const auto pole = single_pole_seed(plant, syn, nz, prob.target());
  starts.push_back(pole ? *pole : seed.design);
  for (const auto& w : opt.warm_starts) starts.push_back(w);
  const NoisePlan plan{opt.seed, 0};
  for (std::uint64_t j = 0; starts.size() < static_cast<std::size_t>(std::max(opt.starts, 2)); ++j) {
    if (j % 2 == 0 || !pole) {
      starts.push_back(construct_detectable_design(plant, syn, random_schur(plan, j, nz), target_det).design);
    } else {
      // Perturbation of the pole seed, entries scaled multiplicatively.
      DynamicDetectorDesign d = *pole;
      Vector x = pack(d);
      const Vector g = standard_normal(plan, NoiseStream::optimizer, (1ull << 32) + j, x.size());
      const Vector step = initial_step(d);
      x += (g.array() * step.array()).matrix();
      starts.push_back(unpack(x, Layout{nz, plant.p(), plant.m()}));
    }
  }

  std::vector<StartResult> results(starts.size());
  std::exception_ptr failure;
  const auto count = static_cast<long long>(starts.size());
  if (opt.exec == Execution::serial) {
    for (long long i = 0; i < count; ++i) {
      results[static_cast<std::size_t>(i)] = run_start(prob, starts[static_cast<std::size_t>(i)], opt);
    }
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
      try {
        results[static_cast<std::size_t>(i)] =
            run_start(prob, starts[static_cast<std::size_t>(i)], opt);
      } catch (...) {
#pragma omp critical(dyndet_opt_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  OptimizeResult out;
  out.seed_design = seed.design;
  out.seed_loss = performance_loss(plant, syn, wts, seed.design);
  out.start_losses.assign(results.size(), kNan);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].best) continue;
    out.start_losses[i] = results[i].best->j_tilde;
    if (!best || results[i].best->j_tilde < results[*best].best->j_tilde) best = i;
  }
  if (!best) {
    throw NumericError("optimize_design: no start produced a feasible design");
  }
  out.best_start = static_cast<int>(*best);
  out.design = results[*best].best->design;
  out.loss = performance_loss(plant, syn, wts, out.design);
  return out;
}

}  // namespace dyndet
