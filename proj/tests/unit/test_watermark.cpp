#include <doctest.h>

#include <sstream>

#include "dyndet/errors.hpp"
#include "support.hpp"

using namespace dyndet;
using namespace dyndet::test;

namespace {

double spectrum_gap(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
  if (a.size() != b.size()) return 1e300;
  double worst = 0.0;
  for (const auto& x : a) {
    auto best = b.begin();
    for (auto it = b.begin(); it != b.end(); ++it)
      if (std::abs(*it - x) < std::abs(*best - x)) best = it;
    worst = std::max(worst, std::abs(*best - x));
    b.erase(best);
  }
  return worst;
}

std::vector<std::complex<double>> union_of(std::initializer_list<Matrix> blocks) {
  std::vector<std::complex<double>> out;
  for (const auto& b : blocks) {
    const auto e = eigenvalues(b).eigenvalues;
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

// Stationary time average of x'Wx + u'Uu, simulated.
double simulated_cost(const DiscretePlant& pl, const LqgSynthesis& s, const CostWeights& w,
                      const WatermarkMode& mode, std::size_t samples, std::uint64_t seed) {
  const InitialState init{Vector::Zero(pl.n()), Matrix::Zero(pl.n(), pl.n())};
  const auto tr = run_trace(pl, s, mode, samples, init, NoisePlan{seed, 0});
  return empirical_cost(tr, w, 0, tr.length());
}

}  // namespace

TEST_SUITE("watermark") {
  TEST_CASE("block structure of the assembled matrices") {
    std::mt19937_64 rng(61);
    const auto inst = random_instance(rng, 3, 2, 2);
    const auto d = random_design(rng, 2, 2, 2);
    const auto am = assemble(inst.plant, inst.syn, inst.weights, d);
    const Eigen::Index n = 3, nz = 2;
    const auto& pl = inst.plant;
    const auto& s = inst.syn;
    const Matrix ilc = Matrix::Identity(n, n) - s.l * pl.c;
    CHECK(am.theta.rows() == 2 * n + nz);
    CHECK(rel_diff(am.theta.block(0, 0, n, n), pl.a + pl.b * s.k) < 1e-15);
    CHECK(rel_diff(am.theta.block(n, n, nz, nz), d.a_tilde) < 1e-15);
    CHECK(rel_diff(am.theta.block(n + nz, n + nz, n, n), ilc * pl.a) < 1e-14);
    CHECK(am.theta.block(n, 0, nz, n).norm() == 0.0);
    CHECK(am.theta.block(n + nz, 0, n, n + nz).norm() == 0.0);
    CHECK(rel_diff(am.delta.topLeftCorner(n, n), s.gamma) < 1e-15);
    CHECK(rel_diff(am.delta.topRightCorner(n, nz), pl.b * d.k_tilde) < 1e-15);
    CHECK(rel_diff(am.delta.bottomLeftCorner(nz, n), -d.m_tilde * pl.c * ilc) < 1e-14);
    CHECK(rel_diff(am.psi.block(n, n, nz, nz), d.m_tilde * pl.r * d.m_tilde.transpose()) < 1e-15);
    CHECK(rel_diff(am.g.block(0, 0, n, n), inst.weights.w + s.k.transpose() * inst.weights.u * s.k) < 1e-14);
    CHECK((am.psi - am.psi.transpose()).norm() < 1e-14);
    CHECK((am.g - am.g.transpose()).norm() < 1e-14);
    CHECK(is_psd(am.g));
  }

  TEST_CASE("closed-loop spectrum is the union of the diagonal blocks") {
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 30; ++trial) {
      const auto inst = random_instance(rng, 3, 1 + trial % 2, 1 + (trial / 2) % 2);
      const auto d = random_design(rng, 3, inst.plant.m(), inst.plant.p());
      const auto am = assemble(inst.plant, inst.syn, inst.weights, d);
      const Matrix ilc = Matrix::Identity(3, 3) - inst.syn.l * inst.plant.c;
      const auto want = union_of({inst.plant.a + inst.plant.b * inst.syn.k, d.a_tilde, ilc * inst.plant.a});
      CHECK(spectrum_gap(eigenvalues(am.theta).eigenvalues, want) < 1e-8);
    }
  }

  TEST_CASE("a zero gain or a zero injection splits the detection spectrum") {
    std::mt19937_64 rng(63);
    const auto inst = random_instance(rng, 3, 1, 1);
    auto d = random_design(rng, 3, 1, 1);
    d.k_tilde.setZero();
    const Matrix dk = detection_matrix(inst.plant, inst.syn, d);
    CHECK(spectrum_gap(eigenvalues(dk).eigenvalues, union_of({inst.syn.gamma, d.a_tilde})) < 1e-8);
    const auto det = detectability(assemble(inst.plant, inst.syn, inst.weights, d), 1.0);
    CHECK_FALSE(det.detectable);
    d = random_design(rng, 3, 1, 1);
    d.m_tilde.setZero();
    const Matrix dm = detection_matrix(inst.plant, inst.syn, d);
    CHECK(spectrum_gap(eigenvalues(dm).eigenvalues, union_of({inst.syn.gamma, d.a_tilde})) < 1e-8);
  }

  TEST_CASE("scalar detection determinant") {
    const auto pl = scalar_plant();
    const auto s = synthesize_lqg(pl, scalar_weights());
    const DynamicDetectorDesign d{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, std::sqrt(3.0)),
                                  Matrix::Constant(1, 1, std::sqrt(3.0))};
    const Matrix delta = detection_matrix(pl, s, d);
    // Oracle: Gamma (At + m k C (I - LC) Gamma^-1 B) with the closed-form scalars.
    const double gamma = (2.0 - phi()) * (2.0 - phi());
    const double want = gamma * (0.5 + 3.0 * (2.0 - phi()) / gamma);
    CHECK(delta.determinant() == doctest::Approx(want).epsilon(1e-10));
    CHECK(want == doctest::Approx(1.2189).epsilon(1e-4));
    CHECK(determinant_identity_rhs(pl, s, d) == doctest::Approx(want).epsilon(1e-10));
    const auto det = detectability(assemble(pl, s, scalar_weights(), d), 1.0);
    CHECK(det.detectable);
    CHECK(det.rho_delta > 1.0);
  }

  TEST_CASE("constructive design, scalar") {
    const auto pl = scalar_plant();
    const auto s = synthesize_lqg(pl, scalar_weights());
    const auto r = construct_detectable_design(pl, s, Matrix::Constant(1, 1, 0.5), 1.2);
    const double gamma = (2.0 - phi()) * (2.0 - phi());
    const double mk = (1.2 / gamma - 0.5) * gamma / (2.0 - phi());
    CHECK(mk == doctest::Approx(2.950).epsilon(1e-3));
    CHECK(r.mk == doctest::Approx(mk).epsilon(1e-8));
    CHECK(r.design.m_tilde(0, 0) * r.design.k_tilde(0, 0) == doctest::Approx(mk).epsilon(1e-8));
    CHECK(r.design.m_tilde(0, 0) > 0.0);
    CHECK(detection_matrix(pl, s, r.design).determinant() >= 1.2);

    const auto none = construct_detectable_design(pl, s, Matrix::Constant(1, 1, 0.5), 0.5 * gamma);
    CHECK(none.mk == 0.0);
    CHECK(none.design.m_tilde.norm() == 0.0);
    CHECK(none.design.k_tilde.norm() == 0.0);
  }

  TEST_CASE("constructive design errors") {
    const auto pl = scalar_plant();
    const auto s = synthesize_lqg(pl, scalar_weights());
    CHECK_THROWS_AS(construct_detectable_design(pl, s, Matrix::Constant(1, 1, 1.5), 1.2), DomainError);
    CHECK_THROWS_AS(construct_detectable_design(pl, s, Matrix::Zero(1, 1), 1.2), DomainError);
    CHECK_THROWS_AS(construct_detectable_design(pl, s, Matrix::Constant(1, 1, 0.5), -1.0), ArgumentError);
  }

  TEST_CASE("singular Gamma") {
    // A single rank defect still leaves det(Delta) affine in m k with a nonzero slope.
    const auto pl = scalar_plant();
    auto s = synthesize_lqg(pl, scalar_weights());
    s.gamma.setZero();
    const auto r = construct_detectable_design(pl, s, Matrix::Constant(1, 1, 0.5), 1.2);
    CHECK(detection_matrix(pl, s, r.design).determinant() >= 1.2);
    // Rank two defect with single-entry gains: B Kt At^-1 Mt C' has rank one, det stays 0.
    std::mt19937_64 rng(69);
    auto inst = random_instance(rng, 2, 1, 1);
    inst.syn.gamma.setZero();
    CHECK_THROWS_AS(construct_detectable_design(inst.plant, inst.syn, 0.5 * Matrix::Identity(2, 2), 1.2), DomainError);
  }

  TEST_CASE("determinant identity and feasibility on random plants") {
    std::mt19937_64 rng(64);
    std::uniform_real_distribution<double> dist(1.0 + 1e-3, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::Index n = 2 + trial % 3, m = 1 + trial % 2, p = 1 + (trial / 2) % 2;
      const auto inst = random_instance(rng, n, m, p);
      const auto d = random_design(rng, n, m, p);
      const double lhs = detection_matrix(inst.plant, inst.syn, d).determinant();
      const double rhs = determinant_identity_rhs(inst.plant, inst.syn, d);
      CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(std::abs(rhs), 1e-300));

      const double delta = dist(rng);
      const double target = std::pow(delta, static_cast<double>(2 * n));
      const auto r = construct_detectable_design(inst.plant, inst.syn, with_radius(rng, n, 0.6), target);
      const Matrix dm = detection_matrix(inst.plant, inst.syn, r.design);
      CHECK(dm.determinant() >= target * (1.0 - 1e-8));
      CHECK(spectral_radius(dm) > 1.0);
      CHECK(spectral_radius(dm) >= delta * (1.0 - 1e-8));
    }
  }

  TEST_CASE("unstable mode of the detection matrix reaches the estimator") {
    std::mt19937_64 rng(65);
    for (int trial = 0; trial < 20; ++trial) {
      const auto inst = random_instance(rng, 3, 1, 1);
      const auto r = construct_detectable_design(inst.plant, inst.syn, with_radius(rng, 3, 0.7), 2.0);
      const Matrix dm = detection_matrix(inst.plant, inst.syn, r.design);
      const Eigen::EigenSolver<Matrix> es(dm);
      Eigen::Index top = 0;
      es.eigenvalues().cwiseAbs().maxCoeff(&top);
      REQUIRE(std::abs(es.eigenvalues()(top)) > 1.0);
      const Eigen::VectorXcd v = es.eigenvectors().col(top);
      CHECK(v.head(3).norm() > 1e-8 * v.norm());
    }
  }

  TEST_CASE("zero gain costs nothing") {
    std::mt19937_64 rng(66);
    const auto inst = random_instance(rng, 3, 1, 2);
    auto d = random_design(rng, 3, 1, 2);
    d.k_tilde.setZero();
    const auto rep = performance_loss(inst.plant, inst.syn, inst.weights, d);
    CHECK(std::abs(rep.delta_loss) <= 1e-10 * rep.j_lqg);
  }

  TEST_CASE("LQG cost, scalar and DC motor") {
    // Scalar oracle: J = tr(P Q) + tr(Sigma_f K'(B'PB+U)K), Sigma_f the filtered error covariance.
    const auto pl = scalar_plant();
    const auto s = synthesize_lqg(pl, scalar_weights());
    const double sig = s.sigma_e(0, 0);
    const double sig_f = sig - sig * sig / (sig + 1.0);
    const double k = s.k(0, 0);
    const double want = s.p(0, 0) * 1.0 + sig_f * k * k * (s.p(0, 0) + 1.0);
    CHECK(lqg_cost(pl, s, scalar_weights()) == doctest::Approx(want).epsilon(1e-10));

    const auto m = motor();
    CHECK(lqg_cost(m.plant, m.syn, m.weights) == doctest::Approx(1.04).epsilon(0.05));
  }

  TEST_CASE("watermark never lowers the cost") {
    std::mt19937_64 rng(67);
    for (int trial = 0; trial < 30; ++trial) {
      const auto inst = random_instance(rng, 3, 1 + trial % 2, 1 + (trial / 2) % 2);
      const auto d = random_design(rng, 3, inst.plant.m(), inst.plant.p());
      const auto rep = performance_loss(inst.plant, inst.syn, inst.weights, d);
      CHECK(rep.j_tilde >= rep.j_lqg * (1.0 - 1e-10));
      CHECK(rep.delta_loss >= -1e-10 * rep.j_lqg);
    }
  }

  TEST_CASE("analytic loss agrees with simulation") {
    const auto pl = scalar_plant();
    const auto s = synthesize_lqg(pl, scalar_weights());
    const DynamicDetectorDesign d{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0),
                                  Matrix::Constant(1, 1, 0.8)};
    const auto am = assemble(pl, s, scalar_weights(), d);
    const double analytic = watermarked_cost(am);
    const double simulated = simulated_cost(pl, s, scalar_weights(), d, 400000, 71);
    CHECK(simulated == doctest::Approx(analytic).epsilon(0.02));
    // Dropping the v(t) correlation between zeta and e misses by far more than the noise.
    const double psi_only = watermarked_cost_uncorrected(am);
    CHECK(std::abs(psi_only - simulated) > 0.05 * simulated);

    const double iid = iid_cost(pl, s, scalar_weights(), Matrix::Constant(1, 1, 0.7));
    const double iid_sim = simulated_cost(pl, s, scalar_weights(), IidWatermark{Matrix::Constant(1, 1, 0.7)}, 400000, 72);
    CHECK(iid_sim == doctest::Approx(iid).epsilon(0.02));
  }

  TEST_CASE("loss is undefined for a non-Schur closed loop") {
    const auto pl = scalar_plant();
    const auto s = synthesize_lqg(pl, scalar_weights());
    const DynamicDetectorDesign d{Matrix::Constant(1, 1, 1.2), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
    CHECK_THROWS_AS(performance_loss(pl, s, scalar_weights(), d), DomainError);
  }

  TEST_CASE("i.i.d. loss is linear and the matched baseline hits its target") {
    const auto m = motor();
    const double base = lqg_cost(m.plant, m.syn, m.weights);
    const double l1 = iid_cost(m.plant, m.syn, m.weights, Matrix::Constant(1, 1, 0.3)) - base;
    const double l2 = iid_cost(m.plant, m.syn, m.weights, Matrix::Constant(1, 1, 0.6)) - base;
    CHECK(l1 > 0.0);
    CHECK(std::abs(l2 - 2.0 * l1) <= 1e-8 * l2);

    const auto zero = iid_baseline_matched(m.plant, m.syn, m.weights, 0.0);
    CHECK(zero.cov.norm() == 0.0);
    const auto matched = iid_baseline_matched(m.plant, m.syn, m.weights, 3.9);
    const double got = iid_cost(m.plant, m.syn, m.weights, matched.cov) - base;
    CHECK(std::abs(got - 3.9) <= 1e-6 * 3.9);
    CHECK_THROWS_AS(iid_baseline_matched(m.plant, m.syn, m.weights, -1.0), ArgumentError);
  }

  TEST_CASE("design record round trip") {
    DesignRecord rec{reference_dc_motor_design(), 1.03, 1.0109716, 4.94, 1.04, 3.9};
    rec.design.m_tilde(1, 0) = 0.1 + 0.2;  // not exactly representable in short decimal
    const Provenance prov{"abc", 42};
    const auto text = design_record_to_json(rec, &prov);
    CHECK(text.find("\"provenance\"") != std::string::npos);
    const auto back = design_record_from_json(text);
    CHECK(back.design.a_tilde == rec.design.a_tilde);
    CHECK(back.design.m_tilde == rec.design.m_tilde);
    CHECK(back.design.k_tilde == rec.design.k_tilde);
    CHECK(back.delta == rec.delta);
    CHECK(back.rho_delta == rec.rho_delta);
    CHECK(back.j_tilde == rec.j_tilde);
    CHECK(back.delta_loss == rec.delta_loss);
    CHECK_THROWS_AS(design_record_from_json("{\"a_tilde\": [[1]]}"), ConfigError);
    CHECK_THROWS_AS(design_record_from_json("not json"), ConfigError);
  }

  TEST_CASE("sweep CSV header") {
    std::ostringstream os;
    write_sweep_csv(os, {{1.03, 1.03, 8.1, 7.06}});
    CHECK(os.str().rfind("delta,rho_delta,loss,delta_loss\n1.03,1.03,8.1,7.06\n", 0) == 0);
  }

  TEST_CASE("reference DC motor design") {
    const auto m = motor();
    const auto d = reference_dc_motor_design();
    CHECK(spectral_radius(d.a_tilde) < 1.0);
    CHECK(is_full_rank(d.a_tilde));
    const auto rep = performance_loss(m.plant, m.syn, m.weights, d);
    CHECK(rep.rho_delta > 1.0);
    CHECK(rep.j_tilde > rep.j_lqg);
  }
}
