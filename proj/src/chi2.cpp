#include <cmath>
#include <limits>
#include <sstream>

#include "dyndet/errors.hpp"
#include "dyndet/matcore.hpp"

namespace dyndet {

namespace {

constexpr int kMaxTerms = 1000;
constexpr double kEps = 1e-16;

// P(a, x) by its power series; converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int k = 1; k < kMaxTerms; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the Legendre continued fraction (modified Lentz), for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void check_gamma_args(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a) || std::isnan(x)) {
    throw ArgumentError("incomplete gamma: need a > 0 and x >= 0");
  }
}

}  // namespace

double gamma_p(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_fraction(a, x);
}

double chi2_quantile(int dof, double upper_tail_prob) {
  if (dof < 1) throw ArgumentError("chi2_quantile: dof must be >= 1");
  if (!(upper_tail_prob > 0.0 && upper_tail_prob < 1.0)) {
    std::ostringstream os;
    os << "chi2_quantile: upper tail probability must lie in (0,1), got " << upper_tail_prob;
    throw ArgumentError(os.str());
  }
  // Solve Q(k, y) = alpha for y = eta / 2 with k = dof / 2. Q is strictly
  // decreasing in y, so a bracket plus Newton steps that fall back to bisection
  // whenever they leave the bracket always converges.
  const double k = 0.5 * dof;
  const double alpha = upper_tail_prob;
  double lo = 0.0;
  double hi = std::max(1.0, k);
  while (gamma_q(k, hi) > alpha) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericError("chi2_quantile: failed to bracket the quantile");
  }
  const double log_norm = std::lgamma(k);
  double y = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double fy = gamma_q(k, y) - alpha;
    if (fy > 0.0) {
      lo = y;
    } else {
      hi = y;
    }
    if (hi - lo <= 1e-15 * hi) break;
    // dQ/dy = -y^{k-1} e^{-y} / Gamma(k)
    const double dens = std::exp((k - 1.0) * std::log(y) - y - log_norm);
    double next = dens > 0.0 ? y + fy / dens : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - y) <= 1e-15 * y) {
      y = next;
      break;
    }
    y = next;
  }
  return 2.0 * y;
}

}  // namespace dyndet
