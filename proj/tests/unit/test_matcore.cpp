#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include "dyndet/errors.hpp"
#include "support.hpp"

using namespace dyndet;
using dyndet::test::gaussian;
using dyndet::test::phi;
using dyndet::test::rel_diff;
using dyndet::test::with_radius;

namespace {

// Multiset match of two spectra: greedy nearest neighbour, fine at these sizes.
double spectrum_mismatch(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
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

}  // namespace

TEST_SUITE("matcore") {
  TEST_CASE("identity has unit spectrum") {
    const auto s = eigenvalues(Matrix::Identity(3, 3));
    REQUIRE(s.eigenvalues.size() == 3);
    for (const auto& l : s.eigenvalues) CHECK(std::abs(l - 1.0) < 1e-14);
    CHECK(s.spectral_radius == doctest::Approx(1.0));
  }

  TEST_CASE("reference detector matrix is Schur") {
    Matrix a(3, 3);
    a << 0.48, -0.81, 0.02, 0.01, 0.61, -0.92, 0.89, 0.73, -0.9;
    CHECK(spectral_radius(a) < 1.0);
  }

  TEST_CASE("companion of z^2 - z - 1") {
    Matrix a(2, 2);
    a << 1, 1, 1, 0;
    CHECK(std::abs(spectral_radius(a) - phi()) < 1e-12);
  }

  TEST_CASE("ordering is modulus descending then angle ascending") {
    Matrix a(4, 4);
    a << 0, -1, 0, 0,  //
        1, 0, 0, 0,    //
        0, 0, 0.5, 0,  //
        0, 0, 0, -2;
    const auto s = eigenvalues(a);
    REQUIRE(s.eigenvalues.size() == 4);
    CHECK(std::abs(s.eigenvalues[0] - std::complex<double>(-2, 0)) < 1e-12);
    CHECK(std::abs(s.eigenvalues[1] - std::complex<double>(0, -1)) < 1e-12);
    CHECK(std::abs(s.eigenvalues[2] - std::complex<double>(0, 1)) < 1e-12);
    CHECK(std::abs(s.eigenvalues[3] - std::complex<double>(0.5, 0)) < 1e-12);
    CHECK(s.spectral_radius == doctest::Approx(2.0));
  }

  TEST_CASE("non-square input is a dimension error") {
    CHECK_THROWS_AS(eigenvalues(Matrix::Zero(2, 3)), DimensionError);
  }

  TEST_CASE("block triangular spectrum is the union of the diagonal blocks") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const Matrix x = gaussian(rng, 3, 3), z = gaussian(rng, 2, 2);
      Matrix m = Matrix::Zero(5, 5);
      m.topLeftCorner(3, 3) = x;
      m.bottomRightCorner(2, 2) = z;
      m.topRightCorner(3, 2) = gaussian(rng, 3, 2);
      auto want = eigenvalues(x).eigenvalues;
      const auto ez = eigenvalues(z).eigenvalues;
      want.insert(want.end(), ez.begin(), ez.end());
      CHECK(spectrum_mismatch(eigenvalues(m).eigenvalues, want) < 1e-8);
      const auto s = eigenvalues(m);
      double mx = 0.0;
      for (const auto& l : s.eigenvalues) mx = std::max(mx, std::abs(l));
      CHECK(s.spectral_radius == mx);
    }
  }

  TEST_CASE("scalar DARE is the golden ratio") {
    const Matrix one = Matrix::Ones(1, 1);
    const Matrix x = solve_dare(one, one, one, one);
    CHECK(std::abs(x(0, 0) - phi()) < 1e-10);
  }

  TEST_CASE("DARE with A = 0 returns Qc") {
    std::mt19937_64 rng(2);
    const Matrix g = gaussian(rng, 3, 3);
    const Matrix qc = g * g.transpose();
    const Matrix x = solve_dare(Matrix::Zero(3, 3), gaussian(rng, 3, 2), qc, Matrix::Identity(2, 2));
    CHECK(rel_diff(x, qc) < 1e-12);
  }

  TEST_CASE("DARE matches the long Riccati recursion and its own fixed point") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix a = with_radius(rng, 3, 0.9);
      const Matrix b = gaussian(rng, 3, 1);
      const Matrix qc = Matrix::Identity(3, 3);
      const Matrix rc = Matrix::Identity(1, 1);
      const Matrix x = solve_dare(a, b, qc, rc);
      // Oracle: the recursion from zero, written out here without the library.
      Matrix it = Matrix::Zero(3, 3);
      for (int k = 0; k < 10000; ++k) {
        const Matrix s = b.transpose() * it * b + rc;
        it = a.transpose() * it * a + qc -
             a.transpose() * it * b * s.inverse() * b.transpose() * it * a;
      }
      CHECK(rel_diff(x, it) < 1e-9);
      CHECK((x - x.transpose()).norm() < 1e-10 * (1 + x.norm()));
      CHECK(is_psd(x));
      CHECK((x - riccati_step(a, b, qc, rc, x)).norm() <= 1e-10 * (1 + x.norm()));
      const Matrix k = -(b.transpose() * x * b + rc).inverse() * b.transpose() * x * a;
      CHECK(spectral_radius(a + b * k) < 1.0);
    }
  }

  TEST_CASE("DARE on unstable plants") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix a = with_radius(rng, 4, 1.5);
      const Matrix b = gaussian(rng, 4, 2);
      const Matrix x = solve_dare(a, b, Matrix::Identity(4, 4), Matrix::Identity(2, 2));
      CHECK((x - riccati_step(a, b, Matrix::Identity(4, 4), Matrix::Identity(2, 2), x)).norm() <=
            1e-10 * (1 + x.norm()));
    }
  }

  TEST_CASE("DARE rejects an indefinite Rc") {
    const Matrix one = Matrix::Ones(1, 1);
    CHECK_THROWS_AS(solve_dare(one, one, one, -one), ArgumentError);
  }

  TEST_CASE("dlyap closed forms") {
    const Matrix v = (Matrix(2, 2) << 2, 1, 1, 3).finished();
    CHECK(rel_diff(solve_dlyap(Matrix::Zero(2, 2), v), v) < 1e-15);
    const Matrix x = solve_dlyap(Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1));
    CHECK(std::abs(x(0, 0) - 4.0 / 3.0) < 1e-12);
  }

  TEST_CASE("dlyap matches the truncated series") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix f = with_radius(rng, 4, 0.9);
      const Matrix g = gaussian(rng, 4, 4);
      const Matrix v = g * g.transpose();
      const Matrix x = solve_dlyap(f, v);
      Matrix sum = Matrix::Zero(4, 4), fk = Matrix::Identity(4, 4);
      for (int k = 0; k < 1000; ++k) {
        sum += fk * v * fk.transpose();
        fk = f * fk;
      }
      CHECK(rel_diff(x, sum) < 1e-8);
      CHECK((x - x.transpose()).norm() < 1e-10 * (1 + x.norm()));
      CHECK(is_psd(x));
      CHECK((x - f * x * f.transpose() - v).norm() <= 1e-10 * (1 + x.norm()));
    }
  }

  TEST_CASE("dlyap rejects a non-Schur F and names the radius") {
    try {
      solve_dlyap(Matrix::Constant(1, 1, 1.5), Matrix::Ones(1, 1));
      FAIL("expected DomainError");
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()).find("1.5") != std::string::npos);
    }
  }

  TEST_CASE("matrix exponential examples") {
    CHECK(rel_diff(matrix_exponential(Matrix::Zero(3, 3)), Matrix::Identity(3, 3)) < 1e-15);
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 0.7;
    d(1, 1) = -3.2;
    const Matrix e = matrix_exponential(d);
    CHECK(std::abs(e(0, 0) - std::exp(0.7)) < 1e-10 * std::exp(0.7));
    CHECK(std::abs(e(1, 1) - std::exp(-3.2)) < 1e-10 * std::exp(-3.2));
    CHECK(std::abs(e(0, 1)) < 1e-15);
    const Matrix nil = (Matrix(2, 2) << 0, 1, 0, 0).finished();
    CHECK(rel_diff(matrix_exponential(nil), (Matrix(2, 2) << 1, 1, 0, 1).finished()) < 1e-15);
  }

  TEST_CASE("matrix exponential matches a long Taylor series") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix m = gaussian(rng, 4, 4, 0.5);
      Matrix sum = Matrix::Identity(4, 4), term = Matrix::Identity(4, 4);
      for (int k = 1; k < 60; ++k) {
        term = term * m / k;
        sum += term;
      }
      CHECK(rel_diff(matrix_exponential(m), sum) < 1e-10);
    }
  }

  TEST_CASE("chi-square quantile examples") {
    CHECK(std::abs(chi2_quantile(1, 0.05) - 3.8414588) < 1e-6);
    CHECK(std::abs(chi2_quantile(1, 0.01) - 6.6348966) < 1e-6);
    CHECK(std::abs(chi2_quantile(2, std::exp(-1.0)) - 2.0) < 1e-8);
  }

  TEST_CASE("chi-square quantile agrees with Boost") {
    for (int dof : {1, 2, 3, 5, 10, 30}) {
      const boost::math::chi_squared dist(dof);
      for (double a : {0.001, 0.01, 0.05, 0.3, 0.5, 0.9, 0.999}) {
        const double want = boost::math::quantile(boost::math::complement(dist, a));
        CHECK(std::abs(chi2_quantile(dof, a) - want) < 1e-8 * std::max(1.0, want));
      }
    }
  }

  TEST_CASE("chi-square quantile is strictly decreasing in the tail probability") {
    for (int dof : {1, 3}) {
      double prev = std::numeric_limits<double>::infinity();
      for (double a = 0.001; a < 1.0; a += 0.01) {
        const double q = chi2_quantile(dof, a);
        CHECK(q < prev);
        prev = q;
      }
    }
  }

  TEST_CASE("chi-square quantile rejects probabilities outside (0,1)") {
    CHECK_THROWS_AS(chi2_quantile(1, 0.0), ArgumentError);
    CHECK_THROWS_AS(chi2_quantile(1, 1.0), ArgumentError);
    CHECK_THROWS_AS(chi2_quantile(1, -0.2), ArgumentError);
    CHECK_THROWS_AS(chi2_quantile(0, 0.1), ArgumentError);
  }

  TEST_CASE("incomplete gamma halves sum to one") {
    for (double a : {0.5, 1.0, 2.5, 10.0})
      for (double x : {0.1, 1.0, 3.0, 20.0}) CHECK(std::abs(gamma_p(a, x) + gamma_q(a, x) - 1.0) < 1e-13);
    CHECK(std::abs(gamma_q(1.0, 2.0) - std::exp(-2.0)) < 1e-14);
  }

  TEST_CASE("rank helpers") {
    Matrix a = Matrix::Identity(3, 3);
    a(2, 2) = 1e-12;
    CHECK(numeric_rank(a, 1e-9) == 2);
    CHECK(numeric_rank(Matrix::Identity(3, 3), 1e-9) == 3);
    const Matrix c = controllability_matrix(Matrix::Identity(2, 2), (Matrix(2, 1) << 1, 0).finished());
    CHECK(numeric_rank(c, 1e-9) == 1);
  }
}
