#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dyndet/matcore.hpp"

namespace dyndet {

struct DetectorConfig {
  double alpha = 0.01;      // per-sample false alarm rate
  double eta = 0.0;         // chi-square threshold derived from alpha
  std::size_t window = 100;
  std::size_t beta = 1;

  // Validates alpha, window and beta and derives eta for p residue channels.
  static DetectorConfig make(int p, double alpha, std::size_t window, std::size_t beta);

  // True when beta is not comfortably above the expected false-alarm count
  // alpha * window (beta < 5 alpha window).
  bool beta_too_small() const;
};

// r' H^-1 r with H factored once.
class GStatistic {
 public:
  explicit GStatistic(const Matrix& h);
  double operator()(const Vector& r) const;

 private:
  Eigen::LLT<Matrix> llt_;
};

double g_statistic(const Vector& r, const Matrix& h);

double calibrate_threshold(int p, double alpha);

struct AlarmSeries {
  std::vector<std::uint8_t> alarms;
  std::vector<std::size_t> counts;  // alarms in (t - window, t]
};

// alarm(t) = g(t) > eta. A prefix shorter than the window counts what is available.
AlarmSeries windowed_alarms(std::span<const double> g, double eta, std::size_t window);

struct DetectionOutcome {
  bool detected = false;
  std::optional<std::size_t> detection_samples;  // relative to attack_start
  double detection_seconds = 0.0;
};

// First t in [attack_start, attack_start + tau) with counts(t) >= beta.
DetectionOutcome detection_time(std::span<const std::size_t> counts, std::size_t beta,
                                std::size_t attack_start, std::size_t tau, double ts);

// Ensemble statistics for one beta. Mean and standard deviation are taken over
// detected runs only; censored_fraction is the share of runs never detected.
struct DetectionSummary {
  std::size_t beta = 0;
  std::size_t runs = 0;
  std::size_t detected = 0;
  double detection_rate = 0.0;
  double mean_detection_time_s = 0.0;
  double std_detection_time_s = 0.0;
  double censored_fraction = 1.0;
};

DetectionSummary summarize_detections(std::size_t beta,
                                      std::span<const std::optional<double>> times_s);

void write_detection_csv(std::ostream& os, std::span<const DetectionSummary> rows);

}  // namespace dyndet
