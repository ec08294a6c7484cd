#include "dyndet/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dyndet/errors.hpp"
#include "dyndet/report.hpp"

namespace dyndet {

namespace {

Matrix identity(Eigen::Index n) { return Matrix::Identity(n, n); }

void check_shapes(const DynamicDetectorDesign& d, const DiscretePlant& plant) {
  const auto nz = d.a_tilde.rows();
  if (nz == 0 || d.a_tilde.cols() != nz) {
    throw DimensionError("design: At must be square and non-empty");
  }
  if (d.m_tilde.rows() != nz || d.m_tilde.cols() != plant.p()) {
    std::ostringstream os;
    os << "design: Mt must be " << nz << "x" << plant.p() << ", got " << d.m_tilde.rows() << "x"
       << d.m_tilde.cols();
    throw DimensionError(os.str());
  }
  if (d.k_tilde.rows() != plant.m() || d.k_tilde.cols() != nz) {
    std::ostringstream os;
    os << "design: Kt must be " << plant.m() << "x" << nz << ", got " << d.k_tilde.rows() << "x"
       << d.k_tilde.cols();
    throw DimensionError(os.str());
  }
  require_finite(d.a_tilde, "At");
  require_finite(d.m_tilde, "Mt");
  require_finite(d.k_tilde, "Kt");
}

// Blocks shared by Theta and Delta.
struct LoopBlocks {
  Matrix abk;     // A + BK
  Matrix ilc;     // I - LC
  Matrix est;     // (I - LC) A
  Matrix c_ilc;   // C (I - LC)
};

LoopBlocks loop_blocks(const DiscretePlant& plant, const LqgSynthesis& syn) {
  LoopBlocks lb;
  lb.abk = plant.a + plant.b * syn.k;
  lb.ilc = identity(plant.n()) - syn.l * plant.c;
  lb.est = lb.ilc * plant.a;
  lb.c_ilc = plant.c * lb.ilc;
  return lb;
}

double determinant(const Matrix& m) { return m.partialPivLu().determinant(); }

// Delta with single entries m at Mt(i,j) and k at Kt(r,s).
Matrix single_entry_delta(const DiscretePlant& plant, const LqgSynthesis& syn, const Matrix& at,
                          Eigen::Index i, Eigen::Index j, Eigen::Index r, Eigen::Index s,
                          double m, double k) {
  DynamicDetectorDesign d{at, Matrix::Zero(at.rows(), plant.p()),
                          Matrix::Zero(plant.m(), at.rows())};
  d.m_tilde(i, j) = m;
  d.k_tilde(r, s) = k;
  return detection_matrix(plant, syn, d);
}

// Stationary covariance and cost for an (x, e) loop driven by white noise only.
struct XeLoop {
  Matrix theta, psi, g;
};

XeLoop xe_loop(const DiscretePlant& plant, const LqgSynthesis& syn, const CostWeights& wts,
               const Matrix& qw) {
  const auto n = plant.n();
  const LoopBlocks lb = loop_blocks(plant, syn);
  XeLoop out;
  out.theta = Matrix::Zero(2 * n, 2 * n);
  out.theta.topLeftCorner(n, n) = lb.abk;
  out.theta.topRightCorner(n, n) = -plant.b * syn.k;
  out.theta.bottomRightCorner(n, n) = lb.est;

  out.psi = Matrix::Zero(2 * n, 2 * n);
  out.psi.topLeftCorner(n, n) = plant.q + plant.b * qw * plant.b.transpose();
  out.psi.topRightCorner(n, n) = plant.q * lb.ilc.transpose();
  out.psi.bottomLeftCorner(n, n) = lb.ilc * plant.q;
  out.psi.bottomRightCorner(n, n) =
      lb.ilc * plant.q * lb.ilc.transpose() + syn.l * plant.r * syn.l.transpose();

  const Matrix kuk = syn.k.transpose() * wts.u * syn.k;
  out.g = Matrix::Zero(2 * n, 2 * n);
  out.g.topLeftCorner(n, n) = wts.w + kuk;
  out.g.topRightCorner(n, n) = -kuk;
  out.g.bottomLeftCorner(n, n) = -kuk;
  out.g.bottomRightCorner(n, n) = kuk;
  return out;
}

double trace_product(const Matrix& a, const Matrix& b) { return (a.array() * b.transpose().array()).sum(); }

}  // namespace

bool is_full_rank(const Matrix& a_tilde) {
  if (a_tilde.size() == 0) return false;
  const Eigen::JacobiSVD<Matrix> svd(a_tilde);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1) >= kFullRankTolerance * sv(0) && sv(0) > 0.0;
}

void validate_design(const DynamicDetectorDesign& design, const DiscretePlant& plant) {
  check_shapes(design, plant);
  const double rho = spectral_radius(design.a_tilde);
  if (rho >= 1.0) {
    std::ostringstream os;
    os << "design: At must be Schur, spectral radius is " << format_number(rho);
    throw DomainError(os.str());
  }
  if (!is_full_rank(design.a_tilde)) throw DomainError("design: At must be full rank");
}

Matrix detection_matrix(const DiscretePlant& plant, const LqgSynthesis& syn,
                        const DynamicDetectorDesign& d) {
  check_shapes(d, plant);
  const auto n = plant.n();
  const auto nz = d.n_zeta();
  Matrix delta(n + nz, n + nz);
  delta.topLeftCorner(n, n) = syn.gamma;
  delta.topRightCorner(n, nz) = plant.b * d.k_tilde;
  delta.bottomLeftCorner(nz, n) = -d.m_tilde * plant.c * (identity(n) - syn.l * plant.c);
  delta.bottomRightCorner(nz, nz) = d.a_tilde;
  return delta;
}

AssembledMatrices assemble(const DiscretePlant& plant, const LqgSynthesis& syn,
                           const CostWeights& wts, const DynamicDetectorDesign& d) {
  check_shapes(d, plant);
  validate(wts, plant);
  const auto n = plant.n();
  const auto nz = d.n_zeta();
  const auto N = 2 * n + nz;
  const LoopBlocks lb = loop_blocks(plant, syn);
  AssembledMatrices am;

  // x(t+1) = (A+BK) x + B Kt zeta - BK e + w
  // zeta(t+1) = At zeta + Mt C e + Mt v
  // e(t+1) = (I-LC) A e + (I-LC) w - L v(t+1)
  am.theta = Matrix::Zero(N, N);
  am.theta.block(0, 0, n, n) = lb.abk;
  am.theta.block(0, n, n, nz) = plant.b * d.k_tilde;
  am.theta.block(0, n + nz, n, n) = -plant.b * syn.k;
  am.theta.block(n, n, nz, nz) = d.a_tilde;
  am.theta.block(n, n + nz, nz, n) = d.m_tilde * plant.c;
  am.theta.block(n + nz, n + nz, n, n) = lb.est;

  am.delta = detection_matrix(plant, syn, d);

  am.psi = Matrix::Zero(N, N);
  am.psi.block(0, 0, n, n) = plant.q;
  am.psi.block(0, n + nz, n, n) = plant.q * lb.ilc.transpose();
  am.psi.block(n + nz, 0, n, n) = lb.ilc * plant.q;
  am.psi.block(n, n, nz, nz) = d.m_tilde * plant.r * d.m_tilde.transpose();
  am.psi.block(n + nz, n + nz, n, n) =
      lb.ilc * plant.q * lb.ilc.transpose() + syn.l * plant.r * syn.l.transpose();

  const Matrix& K = syn.k;
  const Matrix& Kt = d.k_tilde;
  const Matrix& U = wts.u;
  am.g = Matrix::Zero(N, N);
  am.g.block(0, 0, n, n) = wts.w + K.transpose() * U * K;
  am.g.block(0, n, n, nz) = K.transpose() * U * Kt;
  am.g.block(0, n + nz, n, n) = -K.transpose() * U * K;
  am.g.block(n, 0, nz, n) = Kt.transpose() * U * K;
  am.g.block(n, n, nz, nz) = Kt.transpose() * U * Kt;
  am.g.block(n, n + nz, nz, n) = -Kt.transpose() * U * K;
  am.g.block(n + nz, 0, n, n) = -K.transpose() * U * K;
  am.g.block(n + nz, n, n, nz) = -K.transpose() * U * Kt;
  am.g.block(n + nz, n + nz, n, n) = K.transpose() * U * K;

  // v(t) enters zeta(t+1) through Mt and e(t) through -L.
  am.lag = Matrix::Zero(N, N);
  am.lag.block(n + nz, n, n, nz) = -syn.l * plant.r * d.m_tilde.transpose();
  return am;
}

Detectability detectability(const AssembledMatrices& am, double delta_min) {
  Detectability out;
  out.rho_delta = spectral_radius(am.delta);
  out.detectable = out.rho_delta >= delta_min;
  return out;
}

double determinant_identity_rhs(const DiscretePlant& plant, const LqgSynthesis& syn,
                                const DynamicDetectorDesign& d) {
  check_shapes(d, plant);
  const Eigen::PartialPivLU<Matrix> lu(syn.gamma);
  const Matrix c_ilc = plant.c * (identity(plant.n()) - syn.l * plant.c);
  const Matrix inner = d.a_tilde + d.m_tilde * c_ilc * lu.solve(plant.b) * d.k_tilde;
  return lu.determinant() * determinant(inner);
}

ConstructedDesign construct_detectable_design(const DiscretePlant& plant, const LqgSynthesis& syn,
                                  const Matrix& a_tilde, double target_det) {
  if (!(target_det > 0.0) || !std::isfinite(target_det)) {
    throw ArgumentError("construct_detectable_design: target determinant must be positive and finite");
  }
  require_square(a_tilde, "At");
  require_finite(a_tilde, "At");
  if (spectral_radius(a_tilde) >= 1.0) throw DomainError("construct_detectable_design: At must be Schur");
  if (!is_full_rank(a_tilde)) throw DomainError("construct_detectable_design: At must be full rank");

  const auto nz = a_tilde.rows();
  ConstructedDesign res;
  res.design = {a_tilde, Matrix::Zero(nz, plant.p()), Matrix::Zero(plant.m(), nz)};
  res.base_det = determinant(syn.gamma) * determinant(a_tilde);
  if (res.base_det >= target_det) return res;

  // The m k coefficient is the first difference at m k = 1. Gamma need not be
  // well conditioned for this; only a vanishing coefficient for every index
  // choice (Gamma rank deficient by more than one) is fatal.
  double best = 0.0;
  for (Eigen::Index i = 0; i < nz; ++i)
    for (Eigen::Index j = 0; j < plant.p(); ++j)
      for (Eigen::Index r = 0; r < plant.m(); ++r)
        for (Eigen::Index s = 0; s < nz; ++s) {
          const double d1 =
              determinant(single_entry_delta(plant, syn, a_tilde, i, j, r, s, 1.0, 1.0));
          const double coef = d1 - res.base_det;
          if (std::abs(coef) > std::abs(best)) {
            best = coef;
            res.i = i;
            res.j = j;
            res.r = r;
            res.s = s;
          }
        }
  const double scale = std::max(1.0, std::abs(res.base_det));
  if (!(std::abs(best) > 1e-14 * scale)) {
    throw DomainError("construct_detectable_design: Gamma is rank deficient, det(Delta) cannot be moved");
  }

  // Refine the coefficient at the working point to cut the rounding of the unit probe.
  double mk = (target_det - res.base_det) / best;
  for (int pass = 0; pass < 2; ++pass) {
    const double root = std::sqrt(std::abs(mk));
    const double k = mk >= 0.0 ? root : -root;
    const double det_mk =
        determinant(single_entry_delta(plant, syn, a_tilde, res.i, res.j, res.r, res.s, root, k));
    const double coef = (det_mk - res.base_det) / mk;
    if (std::isfinite(coef) && coef != 0.0) best = coef;
    mk = (target_det - res.base_det) / best;
  }
  // Land on the target side of the boundary despite rounding.
  mk *= 1.0 + 1e-9;

  res.mk = mk;
  res.coefficient = best;
  const double root = std::sqrt(std::abs(mk));
  res.design.m_tilde(res.i, res.j) = root;
  res.design.k_tilde(res.r, res.s) = mk >= 0.0 ? root : -root;
  return res;
}

double lqg_cost(const DiscretePlant& plant, const LqgSynthesis& syn, const CostWeights& wts) {
  return iid_cost(plant, syn, wts, Matrix::Zero(plant.m(), plant.m()));
}

double watermarked_cost(const AssembledMatrices& am) {
  const Matrix ts = am.theta * am.lag;
  const Matrix drive = am.psi + ts + ts.transpose();
  const Matrix cov = symmetrize(solve_dlyap(am.theta, drive));
  return trace_product(am.g, cov);
}

double watermarked_cost_uncorrected(const AssembledMatrices& am) {
  const Matrix cov = symmetrize(solve_dlyap(am.theta, am.psi));
  return trace_product(am.g, cov);
}

LossReport performance_loss(const AssembledMatrices& am, const DiscretePlant& plant,
                            const LqgSynthesis& syn, const CostWeights& wts) {
  const double rho_theta = spectral_radius(am.theta);
  if (rho_theta >= 1.0) {
    std::ostringstream os;
    os << "performance_loss: closed loop is not Schur (spectral radius "
       << format_number(rho_theta) << ")";
    throw DomainError(os.str());
  }
  LossReport out;
  out.j_lqg = lqg_cost(plant, syn, wts);
  out.j_tilde = watermarked_cost(am);
  out.delta_loss = out.j_tilde - out.j_lqg;
  out.rho_delta = spectral_radius(am.delta);
  return out;
}

LossReport performance_loss(const DiscretePlant& plant, const LqgSynthesis& syn,
                            const CostWeights& wts, const DynamicDetectorDesign& design) {
  return performance_loss(assemble(plant, syn, wts, design), plant, syn, wts);
}

double iid_cost(const DiscretePlant& plant, const LqgSynthesis& syn, const CostWeights& wts,
                const Matrix& qw) {
  if (qw.rows() != plant.m() || qw.cols() != plant.m()) {
    throw DimensionError("iid watermark covariance must be m x m");
  }
  const XeLoop loop = xe_loop(plant, syn, wts, qw);
  const Matrix cov = symmetrize(solve_dlyap(loop.theta, loop.psi));
  return trace_product(loop.g, cov) + trace_product(wts.u, qw);
}

IidWatermark iid_baseline_matched(const DiscretePlant& plant, const LqgSynthesis& syn,
                                  const CostWeights& wts, double target_loss) {
  if (!(target_loss >= 0.0) || !std::isfinite(target_loss)) {
    throw ArgumentError("iid_baseline_matched: target loss must be finite and non-negative");
  }
  const auto m = plant.m();
  if (target_loss == 0.0) return {Matrix::Zero(m, m)};
  const double base = lqg_cost(plant, syn, wts);
  const auto loss = [&](double c) { return iid_cost(plant, syn, wts, c * identity(m)) - base; };

  double lo = 0.0;
  double hi = 1.0;
  while (loss(hi) < target_loss) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericError("iid_baseline_matched: loss does not reach the target");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double l = loss(mid);
    if (std::abs(l - target_loss) <= 1e-9 * target_loss) return {mid * identity(m)};
    (l < target_loss ? lo : hi) = mid;
  }
  return {0.5 * (lo + hi) * identity(m)};
}

// ---- design artifacts ----

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw ConfigError(std::string("design record: ") + what + " must be a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(std::string("design record: ragged rows in ") + what);
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ConfigError(std::string("design record: non-numeric entry in ") + what);
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

double number_or_nan(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j[key].is_number()) throw ConfigError(std::string("design record: ") + key + " must be a number");
  return j[key].get<double>();
}

nlohmann::json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

}  // namespace

std::string design_record_to_json(const DesignRecord& rec, const Provenance* prov) {
  nlohmann::ordered_json j;
  if (prov) {
    j["provenance"] = {{"tool", std::string(kToolName) + " " + std::string(kToolVersion)},
                       {"config_hash", prov->config_hash},
                       {"master_seed", prov->master_seed}};
  }
  j["n_zeta"] = rec.design.n_zeta();
  j["delta"] = number_or_null(rec.delta);
  j["rho_delta"] = number_or_null(rec.rho_delta);
  j["j_lqg"] = number_or_null(rec.j_lqg);
  j["j_tilde"] = number_or_null(rec.j_tilde);
  j["delta_loss"] = number_or_null(rec.delta_loss);
  j["a_tilde"] = matrix_to_json(rec.design.a_tilde);
  j["m_tilde"] = matrix_to_json(rec.design.m_tilde);
  j["k_tilde"] = matrix_to_json(rec.design.k_tilde);
  return j.dump(2) + "\n";
}

DesignRecord design_record_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("design record: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("design record: top level must be an object");
  for (const char* key : {"a_tilde", "m_tilde", "k_tilde"}) {
    if (!j.contains(key)) throw ConfigError(std::string("design record: missing ") + key);
  }
  DesignRecord rec;
  rec.design.a_tilde = matrix_from_json(j["a_tilde"], "a_tilde");
  rec.design.m_tilde = matrix_from_json(j["m_tilde"], "m_tilde");
  rec.design.k_tilde = matrix_from_json(j["k_tilde"], "k_tilde");
  if (j.contains("n_zeta") && j["n_zeta"].get<Eigen::Index>() != rec.design.n_zeta()) {
    throw ConfigError("design record: n_zeta disagrees with a_tilde");
  }
  rec.delta = number_or_nan(j, "delta");
  rec.rho_delta = number_or_nan(j, "rho_delta");
  rec.j_lqg = number_or_nan(j, "j_lqg");
  rec.j_tilde = number_or_nan(j, "j_tilde");
  rec.delta_loss = number_or_nan(j, "delta_loss");
  return rec;
}

std::vector<SweepRow> loss_sweep(const DiscretePlant& plant, const LqgSynthesis& syn,
                                 const CostWeights& wts, const std::vector<double>& grid,
                                 const OptimizeOptions& options) {
  for (const double d : grid) {
    if (!(d > 1.0)) throw ArgumentError("loss_sweep: every delta must exceed 1");
  }
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return grid[a] > grid[b]; });

  // A design feasible for a larger delta is feasible for every smaller one, so
  // descending continuation keeps the optimized loss monotone in delta.
  std::vector<SweepRow> rows(grid.size());
  std::vector<DynamicDetectorDesign> carried;
  for (const std::size_t idx : order) {
    OptimizeOptions opts = options;
    opts.warm_starts.insert(opts.warm_starts.end(), carried.begin(), carried.end());
    const OptimizeResult res = optimize_design(plant, syn, wts, grid[idx], opts);
    rows[idx] = {grid[idx], res.loss.rho_delta, res.loss.j_tilde, res.loss.delta_loss};
    carried.assign(1, res.design);
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "delta,rho_delta,loss,delta_loss\n";
  for (const auto& r : rows) {
    os << format_number(r.delta) << ',' << format_number(r.rho_delta) << ','
       << format_number(r.loss) << ',' << format_number(r.delta_loss) << '\n';
  }
}

}  // namespace dyndet
