#include <doctest.h>

#include <algorithm>

#include "dyndet/errors.hpp"
#include "support.hpp"

using namespace dyndet;
using namespace dyndet::test;

TEST_SUITE("plant") {
  TEST_CASE("ZOH of a pure integrator") {
    ContinuousPlant cp{Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
    const auto d = discretize_zoh(cp, 0.01);
    CHECK(rel_diff(d.a, Matrix::Identity(2, 2)) < 1e-15);
    CHECK(rel_diff(d.b, 0.01 * Matrix::Identity(2, 2)) < 1e-15);
    CHECK(d.c == cp.cc);
  }

  TEST_CASE("scalar ZOH closed form") {
    for (double a : {-2.0, 0.5, -300.0}) {
      const double ts = 0.01;
      ContinuousPlant cp{Matrix::Constant(1, 1, a), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
      const auto d = discretize_zoh(cp, ts);
      CHECK(std::abs(d.a(0, 0) - std::exp(a * ts)) < 1e-12 * std::exp(a * ts));
      CHECK(std::abs(d.b(0, 0) - std::expm1(a * ts) / a) < 1e-12 * std::abs(std::expm1(a * ts) / a));
    }
  }

  TEST_CASE("ZOH rejects a non-positive sample period") {
    ContinuousPlant cp{Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
    CHECK_THROWS_AS(discretize_zoh(cp, 0.0), ArgumentError);
  }

  TEST_CASE("DC motor ZOH is invertible") {
    // det(exp(Ac Ts)) = exp(tr(Ac) Ts) exactly; here that is e^-14545, far below
    // double range, so the check is on the log determinant and the singular values.
    const DcMotorParams p;
    const auto cp = dc_motor_model(p);
    const double log_det = cp.ac.trace() * 0.01;
    CHECK(log_det == doctest::Approx(-(p.b / p.j + p.r / p.l) * 0.01));
    CHECK(std::isfinite(log_det));
    const auto d = discretize_zoh(cp, 0.01);
    const Eigen::JacobiSVD<Matrix> svd(d.a);
    CHECK(svd.singularValues()(2) > 0.0);
    // Spectral mapping: eig(A) = exp(eig(Ac) Ts); the current mode maps to ~0.
    const auto ev = eigenvalues(d.a).eigenvalues;
    const Eigen::EigenSolver<Matrix> ec(cp.ac);
    std::vector<double> want;
    for (Eigen::Index i = 0; i < 3; ++i) want.push_back(std::exp(ec.eigenvalues()(i).real() * 0.01));
    std::sort(want.rbegin(), want.rend());
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(std::abs(ev[i]) - want[i]) < 1e-12);
    CHECK(std::abs(ev[0]) == doctest::Approx(1.0));
  }

  TEST_CASE("scalar golden-ratio synthesis") {
    const auto s = synthesize_lqg(scalar_plant(), scalar_weights());
    CHECK(std::abs(s.p(0, 0) - phi()) < 1e-8);
    CHECK(std::abs(s.sigma_e(0, 0) - phi()) < 1e-8);
    CHECK(std::abs(s.k(0, 0) + (phi() - 1.0)) < 1e-8);
    CHECK(std::abs(s.l(0, 0) - (phi() - 1.0)) < 1e-8);
    CHECK(std::abs(s.h(0, 0) - (phi() + 1.0)) < 1e-8);
    const double gamma = (2.0 - phi()) * (2.0 - phi());
    CHECK(std::abs(s.gamma(0, 0) - gamma) < 1e-8);
    const auto rep = replay_stealthy(s);
    CHECK(rep.stealthy);
    CHECK(rep.gamma_spectrum.spectral_radius == doctest::Approx(0.1458980).epsilon(1e-6));
  }

  TEST_CASE("large measurement noise switches the filter off") {
    std::mt19937_64 rng(21);
    DiscretePlant pl;
    pl.a = with_radius(rng, 3, 0.8);
    pl.b = gaussian(rng, 3, 1);
    pl.c = Matrix::Identity(3, 3);
    pl.q = Matrix::Identity(3, 3);
    pl.r = 1e6 * Matrix::Identity(3, 3);
    const auto s = synthesize_lqg(pl, {Matrix::Identity(3, 3), Matrix::Identity(1, 1)});
    CHECK(s.l.norm() < 1e-3);
    CHECK((s.gamma - (pl.a + pl.b * s.k)).norm() < 1e-3);
  }

  TEST_CASE("DC motor synthesis is stealthy") {
    const auto m = motor();
    const auto rep = replay_stealthy(m.syn);
    CHECK(rep.stealthy);
    REQUIRE(rep.gamma_spectrum.eigenvalues.size() == 3);
    for (const auto& l : rep.gamma_spectrum.eigenvalues) CHECK(std::abs(l) < 1.0);
  }

  TEST_CASE("unstable Gamma is reported as not stealthy") {
    // Fast unstable mode observed only through the other state, cheap control
    // and precise sensing: the gains overshoot and Gamma leaves the unit disc.
    DiscretePlant pl;
    pl.a = (Matrix(2, 2) << 2.0, 1.0, 0.0, 0.5).finished();
    pl.b = (Matrix(2, 1) << 0.0, 1.0).finished();
    pl.c = (Matrix(1, 2) << 1.0, 0.0).finished();
    pl.q = Matrix::Identity(2, 2);
    pl.r = Matrix::Constant(1, 1, 0.01);
    const auto s = synthesize_lqg(pl, {Matrix::Identity(2, 2), Matrix::Constant(1, 1, 0.01)});
    const auto rep = replay_stealthy(s);
    CHECK_FALSE(rep.stealthy);
    CHECK(rep.gamma_spectrum.spectral_radius > 1.0);
  }

  TEST_CASE("unobservable and uncontrollable plants fail synthesis") {
    auto pl = scalar_plant();
    pl.c = Matrix::Zero(1, 1);
    try {
      synthesize_lqg(pl, scalar_weights());
      FAIL("expected SynthesisError");
    } catch (const SynthesisError& e) {
      CHECK(std::string(e.what()).find("observable") != std::string::npos);
    }
    pl = scalar_plant();
    pl.b = Matrix::Zero(1, 1);
    try {
      synthesize_lqg(pl, scalar_weights());
      FAIL("expected SynthesisError");
    } catch (const SynthesisError& e) {
      CHECK(std::string(e.what()).find("controllable") != std::string::npos);
    }
  }

  TEST_CASE("shape and definiteness errors") {
    auto pl = scalar_plant();
    pl.r = Matrix::Constant(1, 1, -1.0);
    CHECK_THROWS_AS(synthesize_lqg(pl, scalar_weights()), ArgumentError);
    pl = scalar_plant();
    pl.c = Matrix::Ones(1, 2);
    CHECK_THROWS_AS(synthesize_lqg(pl, scalar_weights()), DimensionError);
  }

  TEST_CASE("randomized synthesis invariants") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::Index n = 2 + trial % 3, m = 1 + trial % 2, p = 1 + (trial / 2) % 2;
      const auto inst = random_instance(rng, n, m, p);
      const auto& pl = inst.plant;
      const auto& s = inst.syn;
      const Matrix eye = Matrix::Identity(n, n);
      // Riccati fixed points
      CHECK((s.p - riccati_step(pl.a, pl.b, inst.weights.w, inst.weights.u, s.p)).norm() <=
            1e-9 * (1 + s.p.norm()));
      CHECK((s.sigma_e - riccati_step(pl.a.transpose(), pl.c.transpose(), pl.q, pl.r, s.sigma_e))
                .norm() <= 1e-9 * (1 + s.sigma_e.norm()));
      CHECK(spectral_radius(pl.a + pl.b * s.k) < 1.0);
      CHECK(spectral_radius((eye - s.l * pl.c) * pl.a) < 1.0);
      CHECK(rel_diff(s.gamma, (pl.a + pl.b * s.k) * (eye - s.l * pl.c)) < 1e-14);
      // det(I - LC) > 0
      CHECK((eye - s.l * pl.c).determinant() > 0.0);
      // det(A + BK) = det(A) det(U) / det(B'PB + U)
      const double lhs = (pl.a + pl.b * s.k).determinant();
      const double rhs = pl.a.determinant() * inst.weights.u.determinant() /
                         (pl.b.transpose() * s.p * pl.b + inst.weights.u).determinant();
      CHECK(std::abs(lhs - rhs) <= 1e-8 * std::abs(rhs));
      CHECK(lhs * pl.a.determinant() > 0.0);
      // Gamma full rank
      CHECK(numeric_rank(s.gamma, 1e-12) == n);
    }
  }
}
