#include "dyndet/detect.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "dyndet/errors.hpp"
#include "dyndet/report.hpp"

namespace dyndet {

DetectorConfig DetectorConfig::make(int p, double alpha, std::size_t window, std::size_t beta) {
  if (window == 0) throw ArgumentError("detector: window must be at least one sample");
  if (beta == 0 || beta > window) {
    std::ostringstream os;
    os << "detector: beta must lie in [1, window=" << window << "], got " << beta;
    throw ArgumentError(os.str());
  }
  DetectorConfig cfg;
  cfg.alpha = alpha;
  cfg.eta = calibrate_threshold(p, alpha);
  cfg.window = window;
  cfg.beta = beta;
  return cfg;
}

bool DetectorConfig::beta_too_small() const {
  return static_cast<double>(beta) < 5.0 * alpha * static_cast<double>(window);
}

GStatistic::GStatistic(const Matrix& h) : llt_(symmetrize(h)) {
  if (h.rows() != h.cols()) throw DimensionError("g statistic: H must be square");
  if (llt_.info() != Eigen::Success) {
    throw NumericError("g statistic: innovation covariance H is not positive definite");
  }
}

double GStatistic::operator()(const Vector& r) const {
  const Vector whitened = llt_.matrixL().solve(r);
  return whitened.squaredNorm();
}

double g_statistic(const Vector& r, const Matrix& h) { return GStatistic(h)(r); }

double calibrate_threshold(int p, double alpha) { return chi2_quantile(p, alpha); }

AlarmSeries windowed_alarms(std::span<const double> g, double eta, std::size_t window) {
  AlarmSeries out;
  out.alarms.resize(g.size());
  out.counts.resize(g.size());
  std::size_t running = 0;
  for (std::size_t t = 0; t < g.size(); ++t) {
    out.alarms[t] = g[t] > eta ? 1 : 0;
    running += out.alarms[t];
    if (t >= window) running -= out.alarms[t - window];
    out.counts[t] = running;
  }
  return out;
}

DetectionOutcome detection_time(std::span<const std::size_t> counts, std::size_t beta,
                                std::size_t attack_start, std::size_t tau, double ts) {
  DetectionOutcome out;
  const std::size_t end = std::min(counts.size(), attack_start + tau);
  for (std::size_t t = attack_start; t < end; ++t) {
    if (counts[t] >= beta) {
      out.detected = true;
      out.detection_samples = t - attack_start;
      out.detection_seconds = static_cast<double>(t - attack_start) * ts;
      break;
    }
  }
  return out;
}

DetectionSummary summarize_detections(std::size_t beta,
                                      std::span<const std::optional<double>> times_s) {
  DetectionSummary s;
  s.beta = beta;
  s.runs = times_s.size();
  double sum = 0.0;
  for (const auto& t : times_s) {
    if (t) {
      ++s.detected;
      sum += *t;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.detection_rate = s.runs ? static_cast<double>(s.detected) / static_cast<double>(s.runs) : 0.0;
  s.censored_fraction = s.runs ? 1.0 - s.detection_rate : 1.0;
  s.mean_detection_time_s = s.detected ? sum / static_cast<double>(s.detected) : nan;
  if (s.detected > 1) {
    double ss = 0.0;
    for (const auto& t : times_s) {
      if (t) ss += (*t - s.mean_detection_time_s) * (*t - s.mean_detection_time_s);
    }
    s.std_detection_time_s = std::sqrt(ss / static_cast<double>(s.detected - 1));
  } else {
    s.std_detection_time_s = s.detected ? 0.0 : nan;
  }
  return s;
}

void write_detection_csv(std::ostream& os, std::span<const DetectionSummary> rows) {
  os << "beta,detection_rate,mean_detection_time_s,std_detection_time_s,censored_fraction\n";
  for (const auto& r : rows) {
    os << r.beta << ',' << format_number(r.detection_rate) << ','
       << format_number(r.mean_detection_time_s) << ',' << format_number(r.std_detection_time_s)
       << ',' << format_number(r.censored_fraction) << '\n';
  }
}

}  // namespace dyndet
