#include <doctest.h>

#include <sstream>

#include "dyndet/errors.hpp"
#include "dyndet/experiments.hpp"
#include "support.hpp"

using namespace dyndet;
using namespace dyndet::test;

TEST_SUITE("experiments") {
  TEST_CASE("censored mean") {
    DetectionSummary s;
    s.runs = 4;
    s.detected = 2;
    s.mean_detection_time_s = 1.0;
    CHECK(censored_mean_detection_time(s, 15.0) == doctest::Approx((2.0 + 30.0) / 4.0));
    s.detected = 0;
    CHECK(censored_mean_detection_time(s, 15.0) == 15.0);
  }

  TEST_CASE("signal statistics") {
    const Matrix u = (Matrix(4, 1) << 1, -1, 2, 0).finished();
    const auto st = signal_stats(u);
    CHECK(st.range == 3.0);
    CHECK(st.energy == doctest::Approx(1.5));
    CHECK(signal_stats(Matrix(0, 1)).range == 0.0);
  }

  TEST_CASE("scale_gain touches only the output gain") {
    const auto d = reference_dc_motor_design();
    const auto s = scale_gain(d, 2.0);
    CHECK(s.a_tilde == d.a_tilde);
    CHECK(s.m_tilde == d.m_tilde);
    CHECK(s.k_tilde == 2.0 * d.k_tilde);
  }

  TEST_CASE("detection curves on a short replay") {
    const auto m = motor();
    ExperimentSpec spec;
    spec.plant = m.plant;
    spec.synthesis = m.syn;
    spec.weights = m.weights;
    spec.initial = m.cfg.initial();
    AttackScenario a = m.cfg.attack();
    a.tau = 300;
    a.attack_start = 300;
    spec.attack = a;
    spec.betas = {1, 10};
    spec.master_seed = 3;
    const auto d = reference_dc_motor_design();
    const auto base = iid_baseline_matched(m.plant, m.syn, m.weights,
                                           performance_loss(m.plant, m.syn, m.weights, d).delta_loss);
    const auto curves = detection_curves(spec, d, base, 20);
    REQUIRE(curves.size() == 2);
    CHECK(curves[0].method == "dynamic");
    CHECK(curves[1].method == "iid");
    std::ostringstream os;
    write_detection_curve_csv(os, curves);
    const std::string text = os.str();
    CHECK(text.rfind("beta,method,detection_rate,mean_detection_time_s,censored_fraction\n1,dynamic,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);

    spec.attack.reset();
    CHECK_THROWS_AS(detection_curves(spec, d, base, 2), ArgumentError);
  }
}
