#pragma once

// Dense numerical kernels shared by every other module. All functions are pure.

#include <complex>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dyndet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Spectrum {
  // Sorted by modulus (descending), then by angle (ascending).
  std::vector<std::complex<double>> eigenvalues;
  double spectral_radius = 0.0;
};

Spectrum eigenvalues(const Matrix& m);
double spectral_radius(const Matrix& m);

struct DareOptions {
  double tolerance = 1e-10;
  int max_iterations = 100000;
  bool use_doubling = true;
};

// Stabilizing solution of X = A'XA + Qc - A'XB (B'XB + Rc)^-1 B'XA.
// The filter Riccati equation is the dual problem: solve_dare(A', C', Q, R).
Matrix solve_dare(const Matrix& a, const Matrix& b, const Matrix& qc, const Matrix& rc,
                  const DareOptions& options = {});

// One step of the Riccati recursion, x -> A'xA + Qc - A'xB(B'xB + Rc)^-1 B'xA.
Matrix riccati_step(const Matrix& a, const Matrix& b, const Matrix& qc, const Matrix& rc,
                    const Matrix& x);

// X = F X F' + V, F Schur.
Matrix solve_dlyap(const Matrix& f, const Matrix& v);

Matrix matrix_exponential(const Matrix& m);

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// eta with P(chi2_dof > eta) = upper_tail_prob.
double chi2_quantile(int dof, double upper_tail_prob);

// ---- small helpers used across modules ----

void require_finite(const Matrix& m, std::string_view what);
void require_square(const Matrix& m, std::string_view what);
bool is_symmetric(const Matrix& m, double rel_tol = 1e-10);
bool is_psd(const Matrix& m, double rel_tol = 1e-10);
bool is_pd(const Matrix& m);
Matrix symmetrize(const Matrix& m);

// Rank with singular values counted when >= rel_tol * largest singular value.
int numeric_rank(const Matrix& m, double rel_tol);

// Kalman controllability [B, AB, ..., A^{n-1}B].
Matrix controllability_matrix(const Matrix& a, const Matrix& b);
Matrix observability_matrix(const Matrix& a, const Matrix& c);

}  // namespace dyndet
