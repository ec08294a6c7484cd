#include "dyndet/experiments.hpp"

#include <cmath>
#include <ostream>

#include "dyndet/errors.hpp"
#include "dyndet/report.hpp"

namespace dyndet {

std::vector<MethodCurve> detection_curves(const ExperimentSpec& spec,
                                          const DynamicDetectorDesign& design,
                                          const IidWatermark& baseline, std::size_t runs,
                                          Execution exec) {
  if (!spec.attack) throw ArgumentError("detection_curves: an attack scenario is required");
  std::vector<MethodCurve> out;
  ExperimentSpec s = spec;
  s.mode = design;
  out.push_back({"dynamic", monte_carlo(s, runs, exec)});
  s.mode = baseline;
  out.push_back({"iid", monte_carlo(s, runs, exec)});
  return out;
}

void write_detection_curve_csv(std::ostream& os, const std::vector<MethodCurve>& curves) {
  os << "beta,method,detection_rate,mean_detection_time_s,censored_fraction\n";
  if (curves.empty()) return;
  // Rows grouped by beta, methods in a fixed order within each group.
  for (std::size_t b = 0; b < curves.front().summary.detection.size(); ++b) {
    for (const auto& c : curves) {
      const auto& d = c.summary.detection[b];
      os << d.beta << ',' << c.method << ',' << format_number(d.detection_rate) << ','
         << format_number(d.mean_detection_time_s) << ',' << format_number(d.censored_fraction)
         << '\n';
    }
  }
}

double censored_mean_detection_time(const DetectionSummary& s, double replay_seconds) {
  if (s.runs == 0) return replay_seconds;
  const double detected = s.detected ? s.mean_detection_time_s * static_cast<double>(s.detected) : 0.0;
  return (detected + replay_seconds * static_cast<double>(s.runs - s.detected)) /
         static_cast<double>(s.runs);
}

Calibration calibrate_detection_time(const ExperimentSpec& spec,
                                     const std::function<WatermarkMode(double)>& mode_at,
                                     std::size_t beta, double target_s, std::size_t runs,
                                     double rel_tol, Execution exec) {
  if (!spec.attack) throw ArgumentError("calibrate_detection_time: an attack scenario is required");
  if (!(target_s > 0.0)) throw ArgumentError("calibrate_detection_time: target must be positive");
  ExperimentSpec s = spec;
  s.betas = {beta};
  const double replay_s = static_cast<double>(spec.attack->tau) * spec.plant.ts;
  if (target_s >= replay_s) {
    throw ArgumentError("calibrate_detection_time: target exceeds the replay window");
  }

  Calibration cal;
  auto eval = [&](double scale) {
    s.mode = mode_at(scale);
    const DetectionSummary d = monte_carlo(s, runs, exec).detection.front();
    return std::pair{censored_mean_detection_time(d, replay_s), d.detection_rate};
  };
  auto accept = [&](double scale, std::pair<double, double> r) {
    cal.scale = scale;
    cal.mean_detection_time_s = r.first;
    cal.detection_rate = r.second;
  };

  // Bracket in log scale: lo too slow, hi fast enough.
  double lo = 1.0, hi = 1.0;
  auto r = eval(1.0);
  accept(1.0, r);
  if (std::abs(r.first - target_s) <= rel_tol * target_s) {
    cal.converged = true;
    return cal;
  }
  if (r.first > target_s) {
    for (int i = 0; i < 60 && r.first > target_s; ++i) {
      lo = hi;
      hi *= 2.0;
      r = eval(hi);
    }
    if (r.first > target_s) {
      cal.note = "target not reached at the largest scale tried";
      accept(hi, r);
      return cal;
    }
    accept(hi, r);
  } else {
    for (int i = 0; i < 60 && r.first <= target_s; ++i) {
      hi = lo;
      lo *= 0.5;
      r = eval(lo);
    }
    if (r.first <= target_s) {
      cal.note = "detection faster than the target at the smallest scale tried";
      accept(lo, r);
      return cal;
    }
    r = eval(hi);
    accept(hi, r);
  }
  for (int it = 0; it < 40; ++it) {
    const double mid = std::sqrt(lo * hi);
    const auto rm = eval(mid);
    if (std::abs(rm.first - target_s) <= rel_tol * target_s) {
      accept(mid, rm);
      cal.converged = true;
      return cal;
    }
    if (rm.first > target_s) {
      lo = mid;
    } else {
      hi = mid;
      accept(mid, rm);
    }
    if (hi / lo - 1.0 < 1e-6) break;
  }
  // Monte Carlo mean is piecewise constant in the scale; the fast side of the
  // final bracket is the closest match not slower than the target.
  cal.converged = std::abs(cal.mean_detection_time_s - target_s) <= rel_tol * target_s;
  if (!cal.converged) cal.note = "bracket collapsed before reaching the tolerance";
  return cal;
}

DynamicDetectorDesign scale_gain(const DynamicDetectorDesign& d, double s) {
  DynamicDetectorDesign out = d;
  out.k_tilde *= s;
  return out;
}

SignalStats signal_stats(const Matrix& u) {
  SignalStats st;
  if (u.size() == 0) return st;
  st.range = u.maxCoeff() - u.minCoeff();
  st.energy = u.rowwise().squaredNorm().mean();
  return st;
}

}  // namespace dyndet
