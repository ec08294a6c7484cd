#include "dyndet/matcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "dyndet/errors.hpp"

namespace dyndet {

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw ArgumentError(std::string(what) + ": matrix contains NaN or Inf");
  }
}

void require_square(const Matrix& m, std::string_view what) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": expected a square matrix, got " << m.rows() << "x" << m.cols();
    throw DimensionError(os.str());
  }
}

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).norm() <= rel_tol * (1.0 + m.norm());
}

bool is_psd(const Matrix& m, double rel_tol) {
  if (!is_symmetric(m, rel_tol)) return false;
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -rel_tol * (1.0 + m.norm());
}

bool is_pd(const Matrix& m) {
  if (!is_symmetric(m)) return false;
  Eigen::LLT<Matrix> llt(symmetrize(m));
  return llt.info() == Eigen::Success;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

int numeric_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  const double cutoff = rel_tol * s(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > 0.0 && s(i) >= cutoff) ++rank;
  }
  return rank;
}

Matrix controllability_matrix(const Matrix& a, const Matrix& b) {
  const auto n = a.rows();
  Matrix out(n, n * b.cols());
  Matrix block = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    out.middleCols(k * b.cols(), b.cols()) = block;
    block = a * block;
  }
  return out;
}

Matrix observability_matrix(const Matrix& a, const Matrix& c) {
  return controllability_matrix(a.transpose(), c.transpose()).transpose();
}

Spectrum eigenvalues(const Matrix& m) {
  require_square(m, "eigenvalues");
  require_finite(m, "eigenvalues");
  Spectrum out;
  if (m.rows() == 0) return out;
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eigenvalues: QR iteration did not converge for a " << m.rows() << "x" << m.cols()
       << " matrix (Frobenius norm " << m.norm() << ")";
    throw NumericError(os.str());
  }
  const auto& ev = solver.eigenvalues();
  out.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(),
            [](const std::complex<double>& x, const std::complex<double>& y) {
              const double ax = std::abs(x);
              const double ay = std::abs(y);
              if (ax != ay) return ax > ay;
              return std::arg(x) < std::arg(y);
            });
  out.spectral_radius = std::abs(out.eigenvalues.front());
  return out;
}

double spectral_radius(const Matrix& m) { return eigenvalues(m).spectral_radius; }

Matrix riccati_step(const Matrix& a, const Matrix& b, const Matrix& qc, const Matrix& rc,
                    const Matrix& x) {
  const Matrix xa = x * a;
  const Matrix bxa = b.transpose() * xa;
  const Matrix s = b.transpose() * x * b + rc;
  return symmetrize(a.transpose() * xa + qc - bxa.transpose() * s.ldlt().solve(bxa));
}

namespace {

double dare_residual(const Matrix& a, const Matrix& b, const Matrix& qc, const Matrix& rc,
                     const Matrix& x) {
  return (x - riccati_step(a, b, qc, rc, x)).norm();
}

bool dare_acceptable(const Matrix& a, const Matrix& b, const Matrix& qc, const Matrix& rc,
                     const Matrix& x, double tol) {
  if (!x.allFinite()) return false;
  if (dare_residual(a, b, qc, rc, x) > tol * (1.0 + x.norm())) return false;
  const Matrix s = b.transpose() * x * b + rc;
  const Matrix k = -s.ldlt().solve(b.transpose() * x * a);
  return spectral_radius(a + b * k) < 1.0;
}

// Structure-preserving doubling: after k sweeps H holds the 2^k-step Riccati
// recursion started from zero terminal cost.
Matrix dare_doubling(const Matrix& a, const Matrix& b, const Matrix& qc, const Matrix& rc,
                     double tol) {
  const auto n = a.rows();
  const Matrix eye = Matrix::Identity(n, n);
  Matrix ak = a;
  Matrix gk = b * rc.llt().solve(b.transpose());
  Matrix hk = qc;
  for (int sweep = 0; sweep < 64; ++sweep) {
    const Eigen::PartialPivLU<Matrix> w(eye + gk * hk);
    const Matrix w_ak = w.solve(ak);
    const Matrix w_gk = w.solve(gk);
    const Matrix a_next = ak * w_ak;
    const Matrix g_next = symmetrize(gk + ak * w_gk * ak.transpose());
    const Matrix h_next = symmetrize(hk + ak.transpose() * hk * w_ak);
    const double change = (h_next - hk).norm();
    ak = a_next;
    gk = g_next;
    hk = h_next;
    if (!hk.allFinite()) break;
    if (change <= 1e-3 * tol * (1.0 + hk.norm())) break;
  }
  return hk;
}

}  // namespace

Matrix solve_dare(const Matrix& a, const Matrix& b, const Matrix& qc, const Matrix& rc,
                  const DareOptions& options) {
  require_square(a, "solve_dare: A");
  require_square(qc, "solve_dare: Qc");
  require_square(rc, "solve_dare: Rc");
  if (b.rows() != a.rows() || qc.rows() != a.rows() || rc.rows() != b.cols()) {
    throw DimensionError("solve_dare: inconsistent dimensions of A, B, Qc, Rc");
  }
  for (const auto* m : {&a, &b, &qc, &rc}) require_finite(*m, "solve_dare");
  if (!is_symmetric(qc) || !is_psd(qc)) {
    throw ArgumentError("solve_dare: Qc must be symmetric positive semidefinite");
  }
  if (!is_pd(rc)) {
    throw ArgumentError("solve_dare: Rc must be symmetric positive definite");
  }

  const double tol = options.tolerance;
  if (options.use_doubling) {
    Matrix x = dare_doubling(a, b, qc, rc, tol);
    // A few plain recursion steps remove the rounding left by the doubling sweeps.
    for (int i = 0; i < 3 && x.allFinite(); ++i) x = riccati_step(a, b, qc, rc, x);
    if (dare_acceptable(a, b, qc, rc, x, tol)) return x;
  }

  Matrix x = qc;
  for (int it = 0; it < options.max_iterations; ++it) {
    Matrix next = riccati_step(a, b, qc, rc, x);
    if (!next.allFinite()) break;
    const double change = (next - x).norm();
    x = std::move(next);
    if (change <= tol * (1.0 + x.norm())) {
      if (dare_acceptable(a, b, qc, rc, x, tol)) return x;
      break;
    }
  }
  std::ostringstream os;
  os << "solve_dare: no stabilizing solution within " << options.max_iterations
     << " iterations (last residual " << dare_residual(a, b, qc, rc, x) << ")";
  throw NumericError(os.str());
}

Matrix solve_dlyap(const Matrix& f, const Matrix& v) {
  require_square(f, "solve_dlyap: F");
  require_square(v, "solve_dlyap: V");
  if (f.rows() != v.rows()) throw DimensionError("solve_dlyap: F and V differ in size");
  require_finite(f, "solve_dlyap: F");
  require_finite(v, "solve_dlyap: V");
  const auto n = f.rows();
  if (n == 0) return Matrix(0, 0);
  const double rho = spectral_radius(f);
  if (rho >= 1.0) {
    std::ostringstream os;
    os << "solve_dlyap: F is not Schur (spectral radius " << rho << ")";
    throw DomainError(os.str());
  }

  Matrix x;
  if (n <= 12) {
    // vec(X) = (I - F kron F)^-1 vec(V)
    const auto nn = n * n;
    Matrix big = Matrix::Identity(nn, nn);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        big.block(i * n, j * n, n, n) -= f(i, j) * f;
      }
    }
    // Column-major vec: vec(FXF') = (F kron F) vec(X) with the block layout above.
    const Eigen::PartialPivLU<Matrix> lu(big);
    const Vector sol = lu.solve(Eigen::Map<const Vector>(v.data(), nn));
    x = Eigen::Map<const Matrix>(sol.data(), n, n);
  } else {
    x = v;
    Matrix fk = f;
    for (int k = 0; k < 80; ++k) {
      const Matrix inc = fk * x * fk.transpose();
      x += inc;
      fk = fk * fk;
      if (inc.norm() <= 1e-17 * (1.0 + x.norm())) break;
    }
  }
  x = symmetrize(x);
  // One refinement sweep on the residual keeps ill-conditioned cases within tolerance.
  for (int i = 0; i < 2; ++i) {
    const Matrix resid = f * x * f.transpose() + v - x;
    if (resid.norm() <= 1e-13 * (1.0 + x.norm())) break;
    Matrix corr = resid;
    Matrix fk = f;
    for (int k = 0; k < 80; ++k) {
      const Matrix inc = fk * corr * fk.transpose();
      corr += inc;
      fk = fk * fk;
      if (inc.norm() <= 1e-17 * (1.0 + corr.norm())) break;
    }
    x = symmetrize(x + corr);
  }
  return x;
}

Matrix matrix_exponential(const Matrix& m) {
  require_square(m, "matrix_exponential");
  require_finite(m, "matrix_exponential");
  if (m.rows() == 0) return Matrix(0, 0);
  return m.exp();
}

}  // namespace dyndet
