#include "dyndet/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dyndet/errors.hpp"
#include "dyndet/report.hpp"

namespace dyndet {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

ContinuousPlant dc_motor_model(const DcMotorParams& p) {
  ContinuousPlant cp;
  cp.ac = Matrix::Zero(3, 3);
  cp.ac(0, 1) = 1.0;
  cp.ac(1, 1) = -p.b / p.j;
  cp.ac(1, 2) = p.kt / p.j;
  cp.ac(2, 1) = -p.kb / p.l;
  cp.ac(2, 2) = -p.r / p.l;
  cp.bc = Matrix::Zero(3, 1);
  cp.bc(2, 0) = 1.0 / p.l;
  cp.cc = Matrix::Zero(1, 3);
  cp.cc(0, 0) = 1.0;
  return cp;
}

DiscretePlant ExperimentConfig::discrete_plant() const {
  DiscretePlant dp;
  dp.a = discrete.a;
  dp.b = discrete.b;
  dp.c = discrete.c;
  dp.q = q;
  dp.r = r;
  dp.ts = ts;
  return dp;
}

CostWeights ExperimentConfig::cost() const {
  const double s = cost_scale_by_ts ? ts : 1.0;
  return {s * w, s * u};
}

InitialState ExperimentConfig::initial() const { return {x0_mean, x0_cov}; }

AttackScenario ExperimentConfig::attack() const {
  AttackScenario a;
  a.tau = tau;
  a.ba = ba;
  a.f = f;
  a.attack_start = attack_start;
  return a;
}

OptimizeOptions ExperimentConfig::optimizer() const {
  OptimizeOptions o;
  o.starts = opt_starts;
  o.seed = opt_seed;
  o.max_evals_per_round = opt_max_evals;
  o.penalty_rounds = opt_penalty_rounds;
  o.n_zeta = n_zeta;
  return o;
}

namespace {

void fill_defaults_for_plant(ExperimentConfig& c) {
  const auto n = c.discrete.a.rows(), m = c.discrete.b.cols(), p = c.discrete.c.rows();
  c.q = Matrix::Identity(n, n);
  c.r = Matrix::Identity(p, p);
  c.w = Matrix::Identity(n, n);
  c.u = Matrix::Identity(m, m);
  c.x0_mean = Vector::Zero(n);
  c.x0_cov = Matrix::Identity(n, n);
  c.ba = c.discrete.b;
  c.n_zeta = n;
}

}  // namespace

ExperimentConfig dc_motor_preset() {
  ExperimentConfig c;
  c.plant_model = "dc_motor";
  c.ts = 0.01;
  c.continuous = dc_motor_model(c.motor);
  c.discrete = discretize_zoh(c.continuous, c.ts);
  fill_defaults_for_plant(c);
  // Unit weights on the continuous-time cost, sampled at Ts.
  c.cost_scale_by_ts = true;
  return c;
}

ExperimentConfig scalar_preset() {
  ExperimentConfig c;
  c.plant_model = "discrete";
  c.ts = 1.0;
  c.discrete = {Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  fill_defaults_for_plant(c);
  c.tau = 200;
  c.attack_start = 200;
  c.window = 10;
  c.betas = {1, 2, 3};
  c.delta = 1.1;
  c.control_beta = 3;
  c.control_target_s = 5.0;
  c.horizon = 1000;
  return c;
}

DynamicDetectorDesign reference_dc_motor_design() {
  DynamicDetectorDesign d;
  d.a_tilde = Matrix(3, 3);
  d.a_tilde << 0.48, -0.81, 0.02, 0.01, 0.61, -0.92, 0.89, 0.73, -0.9;
  d.m_tilde = Matrix(3, 1);
  d.m_tilde << -0.84, -0.49, -0.81;
  d.k_tilde = Matrix(1, 3);
  d.k_tilde << 0.9, -0.1, 0.35;
  return d;
}

// ---- parsing ----

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config: " + path + ": " + msg);
}

double to_number(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first != last && *first == ' ') ++first;
    if (first != last && *first == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr == first) fail(path, "expected a number, got \"" + s + "\"");
    // Anything after the number must be a unit: whitespace then a non-numeric token.
    if (ptr != last && *ptr != ' ') fail(path, "unexpected text after number in \"" + s + "\"");
    return v;
  }
  fail(path, "expected a number");
}

double positive(const json& j, const std::string& path) {
  const double v = to_number(j, path);
  if (!(v > 0.0) || !std::isfinite(v)) fail(path, "must be positive and finite");
  return v;
}

std::size_t to_count(const json& j, const std::string& path, std::size_t min_value) {
  const double v = to_number(j, path);
  if (!(v >= static_cast<double>(min_value)) || v != std::floor(v) || v > 1e15) {
    fail(path, "expected an integer >= " + std::to_string(min_value));
  }
  return static_cast<std::size_t>(v);
}

std::uint64_t to_seed(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size()) return v;
  }
  fail(path, "expected an unsigned 64-bit integer");
}

bool to_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string to_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

// "identity", a scalar (s I when square, constant fill otherwise), a flat list for a
// row or column vector, or a list of rows.
Matrix to_matrix(const json& j, const std::string& path, Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream shape;
  shape << rows << "x" << cols;
  if (j.is_string() && j.get<std::string>() == "identity") {
    if (rows != cols) fail(path, "\"identity\" needs a square shape, expected " + shape.str());
    return Matrix::Identity(rows, cols);
  }
  if (j.is_number() || j.is_string()) {
    const double s = to_number(j, path);
    if (rows == cols) return s * Matrix::Identity(rows, cols);
    return Matrix::Constant(rows, cols, s);
  }
  if (!j.is_array()) fail(path, "expected a matrix (" + shape.str() + ")");
  const bool flat = !j.empty() && !j[0].is_array();
  if (flat) {
    if (rows != 1 && cols != 1) fail(path, "expected a list of rows (" + shape.str() + ")");
    if (static_cast<Eigen::Index>(j.size()) != rows * cols) {
      fail(path, "expected " + std::to_string(rows * cols) + " entries");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows * cols; ++i) {
      m(rows == 1 ? 0 : i, rows == 1 ? i : 0) =
          to_number(j[static_cast<std::size_t>(i)], path + "[" + std::to_string(i) + "]");
    }
    return m;
  }
  if (static_cast<Eigen::Index>(j.size()) != rows) fail(path, "expected " + shape.str());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    const std::string rp = path + "[" + std::to_string(i) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) fail(rp, "expected " + shape.str());
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = to_number(row[static_cast<std::size_t>(c)], rp + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

// Shape read off the document itself (plant matrices fix every other dimension).
Matrix to_free_matrix(const json& j, const std::string& path) {
  if (j.is_number() || j.is_string()) return to_matrix(j, path, 1, 1);
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty matrix");
  if (!j[0].is_array()) return to_matrix(j, path, 1, static_cast<Eigen::Index>(j.size()));
  return to_matrix(j, path, static_cast<Eigen::Index>(j.size()),
                   static_cast<Eigen::Index>(j[0].size()));
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> known) {
  if (!obj.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) fail(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
  }
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void parse_plant(ExperimentConfig& c, const json& j) {
  reject_unknown(j, "plant", {"model", "ts", "dc_motor", "A", "B", "C"});
  if (const auto* v = find(j, "model")) c.plant_model = to_string(*v, "plant.model");
  if (const auto* v = find(j, "ts")) c.ts = positive(*v, "plant.ts");
  if (c.plant_model == "dc_motor") {
    if (find(j, "A") || find(j, "B") || find(j, "C")) {
      fail("plant", "A/B/C are not used with model dc_motor");
    }
    if (const auto* m = find(j, "dc_motor")) {
      reject_unknown(*m, "plant.dc_motor", {"b", "J", "L", "Kb", "Kt", "R"});
      if (const auto* v = find(*m, "b")) c.motor.b = positive(*v, "plant.dc_motor.b");
      if (const auto* v = find(*m, "J")) c.motor.j = positive(*v, "plant.dc_motor.J");
      if (const auto* v = find(*m, "L")) c.motor.l = positive(*v, "plant.dc_motor.L");
      if (const auto* v = find(*m, "Kb")) c.motor.kb = positive(*v, "plant.dc_motor.Kb");
      if (const auto* v = find(*m, "Kt")) c.motor.kt = positive(*v, "plant.dc_motor.Kt");
      if (const auto* v = find(*m, "R")) c.motor.r = positive(*v, "plant.dc_motor.R");
    }
    c.continuous = dc_motor_model(c.motor);
  } else if (c.plant_model == "continuous" || c.plant_model == "discrete") {
    if (find(j, "dc_motor")) fail("plant.dc_motor", "only used with model dc_motor");
    for (const char* key : {"A", "B", "C"}) {
      if (!find(j, key)) fail(std::string("plant.") + key, "required for model " + c.plant_model);
    }
    const Matrix a = to_free_matrix(j["A"], "plant.A");
    if (a.rows() != a.cols()) fail("plant.A", "must be square");
    const Matrix b0 = to_free_matrix(j["B"], "plant.B");
    // A flat B list is a column for a single input.
    const Matrix b = b0.rows() == 1 && a.rows() > 1 ? Matrix(b0.transpose()) : b0;
    const Matrix cm = to_free_matrix(j["C"], "plant.C");
    if (b.rows() != a.rows()) fail("plant.B", "row count must match A");
    if (cm.cols() != a.rows()) fail("plant.C", "column count must match A");
    if (c.plant_model == "continuous") {
      c.continuous = {a, b, cm};
    } else {
      c.continuous = {};
      c.discrete = {a, b, cm};
    }
  } else {
    fail("plant.model", "expected dc_motor, continuous or discrete, got \"" + c.plant_model + "\"");
  }
  if (c.plant_model != "discrete") c.discrete = discretize_zoh(c.continuous, c.ts);
}

FProfile parse_f(const json& j, const std::string& path, Eigen::Index dim) {
  reject_unknown(j, path, {"kind", "value"});
  FProfile f;
  const std::string kind = find(j, "kind") ? to_string(j["kind"], path + ".kind") : "zero";
  if (kind == "zero") {
    f.kind = FProfile::Kind::zero;
  } else if (kind == "constant" || kind == "ramp") {
    f.kind = kind == "constant" ? FProfile::Kind::constant : FProfile::Kind::ramp;
    if (!find(j, "value")) fail(path + ".value", "required for kind " + kind);
    f.value = to_matrix(j["value"], path + ".value", dim, 1).col(0);
    if (dim == 1) f.value = Vector::Constant(1, f.value(0));
  } else {
    fail(path + ".kind", "expected zero, constant or ramp");
  }
  if (f.kind == FProfile::Kind::zero) f.value = Vector::Zero(dim);
  return f;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  reject_unknown(doc, "", {"preset", "plant", "noise", "cost", "initial", "detector", "attack",
                           "watermark", "simulation", "monte_carlo", "optimizer", "control_signal",
                           "loss_sweep", "output"});

  ExperimentConfig c = dc_motor_preset();
  if (const auto* v = find(doc, "preset")) {
    const std::string name = to_string(*v, "preset");
    if (name == "scalar") {
      c = scalar_preset();
    } else if (name != "dc_motor") {
      fail("preset", "expected dc_motor or scalar");
    }
  }
  if (const auto* p = find(doc, "plant")) {
    const StateSpace before = c.discrete;
    parse_plant(c, *p);
    if (before.a.rows() != c.discrete.a.rows() || before.b.cols() != c.discrete.b.cols() ||
        before.c.rows() != c.discrete.c.rows()) {
      fill_defaults_for_plant(c);
    } else {
      c.ba = c.discrete.b;
    }
  }
  const auto n = c.discrete.a.rows(), m = c.discrete.b.cols(), p = c.discrete.c.rows();

  if (const auto* j = find(doc, "noise")) {
    reject_unknown(*j, "noise", {"Q", "R"});
    if (const auto* v = find(*j, "Q")) c.q = to_matrix(*v, "noise.Q", n, n);
    if (const auto* v = find(*j, "R")) c.r = to_matrix(*v, "noise.R", p, p);
  }
  if (const auto* j = find(doc, "cost")) {
    reject_unknown(*j, "cost", {"W", "U", "scale_by_ts"});
    if (const auto* v = find(*j, "W")) c.w = to_matrix(*v, "cost.W", n, n);
    if (const auto* v = find(*j, "U")) c.u = to_matrix(*v, "cost.U", m, m);
    if (const auto* v = find(*j, "scale_by_ts")) c.cost_scale_by_ts = to_bool(*v, "cost.scale_by_ts");
  }
  if (const auto* j = find(doc, "initial")) {
    reject_unknown(*j, "initial", {"mean", "cov"});
    if (const auto* v = find(*j, "mean")) c.x0_mean = to_matrix(*v, "initial.mean", n, 1).col(0);
    if (const auto* v = find(*j, "cov")) c.x0_cov = to_matrix(*v, "initial.cov", n, n);
  }
  if (const auto* j = find(doc, "detector")) {
    reject_unknown(*j, "detector", {"alpha", "window", "betas"});
    if (const auto* v = find(*j, "alpha")) {
      c.alpha = to_number(*v, "detector.alpha");
      if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail("detector.alpha", "must lie in (0, 1)");
    }
    if (const auto* v = find(*j, "window")) c.window = to_count(*v, "detector.window", 1);
    if (const auto* v = find(*j, "betas")) {
      if (!v->is_array() || v->empty()) fail("detector.betas", "expected a non-empty list");
      c.betas.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        c.betas.push_back(to_count((*v)[i], "detector.betas[" + std::to_string(i) + "]", 1));
      }
    }
  }
  for (std::size_t i = 0; i < c.betas.size(); ++i) {
    if (c.betas[i] > c.window) {
      fail("detector.betas[" + std::to_string(i) + "]", "must not exceed the window");
    }
  }

  bool start_given = false;
  if (const auto* j = find(doc, "attack")) {
    reject_unknown(*j, "attack", {"tau", "attack_start", "Ba", "f"});
    if (const auto* v = find(*j, "tau")) c.tau = to_count(*v, "attack.tau", 1);
    if (const auto* v = find(*j, "attack_start")) {
      c.attack_start = to_count(*v, "attack.attack_start", 0);
      start_given = true;
    }
    if (const auto* v = find(*j, "Ba")) {
      if (v->is_string() && v->get<std::string>() == "B") {
        c.ba = c.discrete.b;
      } else {
        c.ba = to_free_matrix(*v, "attack.Ba");
        if (c.ba.rows() == 1 && n > 1) c.ba.transposeInPlace();
        if (c.ba.rows() != n) fail("attack.Ba", "must have n rows");
      }
    }
    if (const auto* v = find(*j, "f")) c.f = parse_f(*v, "attack.f", c.ba.cols());
  }
  if (!start_given) c.attack_start = c.tau;
  if (c.attack_start < c.tau) fail("attack.attack_start", "must be at least tau");
  if (c.f.value.size() != c.ba.cols()) c.f = parse_f(json::object(), "attack.f", c.ba.cols());

  if (const auto* j = find(doc, "watermark")) {
    reject_unknown(*j, "watermark",
                   {"mode", "delta", "n_zeta", "a_tilde", "m_tilde", "k_tilde", "design_file", "iid_cov"});
    if (const auto* v = find(*j, "mode")) c.watermark_mode = to_string(*v, "watermark.mode");
    if (c.watermark_mode != "none" && c.watermark_mode != "dynamic" && c.watermark_mode != "iid") {
      fail("watermark.mode", "expected none, dynamic or iid");
    }
    if (const auto* v = find(*j, "delta")) {
      c.delta = to_number(*v, "watermark.delta");
      if (!(c.delta > 1.0)) fail("watermark.delta", "delta must exceed 1");
    }
    if (const auto* v = find(*j, "n_zeta")) {
      c.n_zeta = static_cast<Eigen::Index>(to_count(*v, "watermark.n_zeta", 1));
    }
    const bool any = find(*j, "a_tilde") || find(*j, "m_tilde") || find(*j, "k_tilde");
    if (any) {
      for (const char* key : {"a_tilde", "m_tilde", "k_tilde"}) {
        if (!find(*j, key)) fail(std::string("watermark.") + key, "all three design matrices are required");
      }
      DynamicDetectorDesign d;
      d.a_tilde = to_free_matrix((*j)["a_tilde"], "watermark.a_tilde");
      const auto nz = d.a_tilde.rows();
      if (d.a_tilde.cols() != nz) fail("watermark.a_tilde", "must be square");
      d.m_tilde = to_matrix((*j)["m_tilde"], "watermark.m_tilde", nz, p);
      d.k_tilde = to_matrix((*j)["k_tilde"], "watermark.k_tilde", m, nz);
      if (find(*j, "n_zeta") && c.n_zeta != nz) fail("watermark.n_zeta", "disagrees with a_tilde");
      c.n_zeta = nz;
      c.design = std::move(d);
    }
    if (const auto* v = find(*j, "design_file")) c.design_file = to_string(*v, "watermark.design_file");
    if (const auto* v = find(*j, "iid_cov")) {
      if (!v->is_null()) c.iid_cov = to_matrix(*v, "watermark.iid_cov", m, m);
    }
  }
  if (const auto* j = find(doc, "simulation")) {
    reject_unknown(*j, "simulation", {"warmup", "horizon"});
    if (const auto* v = find(*j, "warmup")) c.warmup = to_count(*v, "simulation.warmup", 0);
    if (const auto* v = find(*j, "horizon")) c.horizon = to_count(*v, "simulation.horizon", 1);
  }
  if (const auto* j = find(doc, "monte_carlo")) {
    reject_unknown(*j, "monte_carlo", {"runs", "seed"});
    if (const auto* v = find(*j, "runs")) c.runs = to_count(*v, "monte_carlo.runs", 1);
    if (const auto* v = find(*j, "seed")) c.seed = to_seed(*v, "monte_carlo.seed");
  }
  if (const auto* j = find(doc, "optimizer")) {
    reject_unknown(*j, "optimizer", {"starts", "max_evals_per_round", "penalty_rounds", "seed"});
    if (const auto* v = find(*j, "starts")) c.opt_starts = static_cast<int>(to_count(*v, "optimizer.starts", 1));
    if (const auto* v = find(*j, "max_evals_per_round")) {
      c.opt_max_evals = static_cast<int>(to_count(*v, "optimizer.max_evals_per_round", 1));
    }
    if (const auto* v = find(*j, "penalty_rounds")) {
      c.opt_penalty_rounds = static_cast<int>(to_count(*v, "optimizer.penalty_rounds", 1));
    }
    if (const auto* v = find(*j, "seed")) c.opt_seed = to_seed(*v, "optimizer.seed");
  }
  if (const auto* j = find(doc, "control_signal")) {
    reject_unknown(*j, "control_signal", {"beta", "target_detection_s", "runs"});
    if (const auto* v = find(*j, "beta")) c.control_beta = to_count(*v, "control_signal.beta", 1);
    if (const auto* v = find(*j, "target_detection_s")) {
      c.control_target_s = positive(*v, "control_signal.target_detection_s");
    }
    if (const auto* v = find(*j, "runs")) c.control_runs = to_count(*v, "control_signal.runs", 1);
  }
  if (c.control_beta > c.window) fail("control_signal.beta", "must not exceed the window");
  if (const auto* j = find(doc, "loss_sweep")) {
    reject_unknown(*j, "loss_sweep", {"grid"});
    if (const auto* v = find(*j, "grid")) {
      if (!v->is_array() || v->empty()) fail("loss_sweep.grid", "expected a non-empty list");
      c.sweep_grid.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const std::string path = "loss_sweep.grid[" + std::to_string(i) + "]";
        const double d = to_number((*v)[i], path);
        if (!(d > 1.0)) fail(path, "delta must exceed 1");
        c.sweep_grid.push_back(d);
      }
    }
  }
  if (const auto* j = find(doc, "output")) {
    reject_unknown(*j, "output", {"dir"});
    if (const auto* v = find(*j, "dir")) c.out_dir = to_string(*v, "output.dir");
  }

  // Semantic checks that need the whole document.
  try {
    validate(c.discrete_plant());
    validate(c.cost(), c.discrete_plant());
    validate(c.initial(), c.discrete_plant());
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---- emission ----

namespace {

ojson num(double x) { return std::isfinite(x) ? ojson(x) : ojson(format_number(x)); }

ojson mat(const Matrix& m) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

ojson vec(const Vector& v) {
  ojson out = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(num(v(i)));
  return out;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
  ojson j;
  ojson plant;
  plant["model"] = c.plant_model;
  plant["ts"] = num(c.ts);
  if (c.plant_model == "dc_motor") {
    plant["dc_motor"] = {{"b", num(c.motor.b)},   {"J", num(c.motor.j)},   {"L", num(c.motor.l)},
                         {"Kb", num(c.motor.kb)}, {"Kt", num(c.motor.kt)}, {"R", num(c.motor.r)}};
  } else if (c.plant_model == "continuous") {
    plant["A"] = mat(c.continuous.ac);
    plant["B"] = mat(c.continuous.bc);
    plant["C"] = mat(c.continuous.cc);
  } else {
    plant["A"] = mat(c.discrete.a);
    plant["B"] = mat(c.discrete.b);
    plant["C"] = mat(c.discrete.c);
  }
  j["plant"] = plant;
  j["noise"] = {{"Q", mat(c.q)}, {"R", mat(c.r)}};
  j["cost"] = {{"W", mat(c.w)}, {"U", mat(c.u)}, {"scale_by_ts", c.cost_scale_by_ts}};
  j["initial"] = {{"mean", vec(c.x0_mean)}, {"cov", mat(c.x0_cov)}};
  j["detector"] = {{"alpha", num(c.alpha)}, {"window", c.window}, {"betas", c.betas}};
  ojson f;
  switch (c.f.kind) {
    case FProfile::Kind::zero: f["kind"] = "zero"; break;
    case FProfile::Kind::constant: f["kind"] = "constant"; f["value"] = vec(c.f.value); break;
    case FProfile::Kind::ramp: f["kind"] = "ramp"; f["value"] = vec(c.f.value); break;
  }
  j["attack"] = {{"tau", c.tau}, {"attack_start", c.attack_start}, {"Ba", mat(c.ba)}, {"f", f}};
  ojson wm;
  wm["mode"] = c.watermark_mode;
  wm["delta"] = num(c.delta);
  wm["n_zeta"] = c.n_zeta;
  if (c.design) {
    wm["a_tilde"] = mat(c.design->a_tilde);
    wm["m_tilde"] = mat(c.design->m_tilde);
    wm["k_tilde"] = mat(c.design->k_tilde);
  }
  wm["design_file"] = c.design_file;
  wm["iid_cov"] = c.iid_cov ? mat(*c.iid_cov) : ojson(nullptr);
  j["watermark"] = wm;
  j["simulation"] = {{"warmup", c.warmup}, {"horizon", c.horizon}};
  j["monte_carlo"] = {{"runs", c.runs}, {"seed", c.seed}};
  j["optimizer"] = {{"starts", c.opt_starts},
                    {"max_evals_per_round", c.opt_max_evals},
                    {"penalty_rounds", c.opt_penalty_rounds},
                    {"seed", c.opt_seed}};
  j["control_signal"] = {{"beta", c.control_beta},
                         {"target_detection_s", num(c.control_target_s)},
                         {"runs", c.control_runs}};
  ojson grid = ojson::array();
  for (const double d : c.sweep_grid) grid.push_back(num(d));
  j["loss_sweep"] = {{"grid", grid}};
  j["output"] = {{"dir", c.out_dir}};
  return j.dump(2) + "\n";
}

// The output directory does not change any result, so it stays out of the hash.
std::string config_hash(const ExperimentConfig& c) {
  ExperimentConfig h = c;
  h.out_dir.clear();
  return hex64(fnv1a64(config_to_json(h)));
}

}  // namespace dyndet
