#pragma once

// Orchestration shared by the command line tool and the acceptance suite:
// detection curves for the dynamic detector against a loss-matched i.i.d.
// watermark, and calibration of both to a common detection time.

#include <functional>
#include <string>
#include <vector>

#include "dyndet/simulate.hpp"
#include "dyndet/watermark.hpp"

namespace dyndet {

struct MethodCurve {
  std::string method;  // "dynamic" or "iid"
  EnsembleSummary summary;
};

// One Monte Carlo ensemble per method, evaluated at every beta of spec.betas.
// spec.mode is ignored; both methods share seeds run by run.
std::vector<MethodCurve> detection_curves(const ExperimentSpec& spec,
                                          const DynamicDetectorDesign& design,
                                          const IidWatermark& baseline, std::size_t runs,
                                          Execution exec = Execution::parallel);

// beta,method,detection_rate,mean_detection_time_s,censored_fraction
void write_detection_curve_csv(std::ostream& os, const std::vector<MethodCurve>& curves);

// Mean detection time with undetected runs counted at the end of the replay window.
double censored_mean_detection_time(const DetectionSummary& s, double replay_seconds);

struct Calibration {
  bool converged = false;
  double scale = 0.0;
  double mean_detection_time_s = 0.0;  // censored mean at the chosen scale
  double detection_rate = 0.0;
  std::string note;
};

// Finds a scale s with censored mean detection time at beta within tolerance of
// target_s, assuming detection speeds up as s grows. mode_at(s) builds the mode.
Calibration calibrate_detection_time(const ExperimentSpec& spec,
                                     const std::function<WatermarkMode(double)>& mode_at,
                                     std::size_t beta, double target_s, std::size_t runs,
                                     double rel_tol = 0.02, Execution exec = Execution::parallel);

DynamicDetectorDesign scale_gain(const DynamicDetectorDesign& d, double s);

struct SignalStats {
  double range = 0.0;   // max - min over all channels and samples
  double energy = 0.0;  // mean of u'u per sample
};

SignalStats signal_stats(const Matrix& u);

}  // namespace dyndet
