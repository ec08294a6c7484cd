#include <doctest.h>

#include "dyndet/errors.hpp"
#include "support.hpp"

using namespace dyndet;
using namespace dyndet::test;

namespace {

OptimizeOptions quick(int starts, Execution exec = Execution::parallel) {
  OptimizeOptions o;
  o.starts = starts;
  o.max_evals_per_round = 1500;
  o.penalty_rounds = 3;
  o.exec = exec;
  return o;
}

}  // namespace

TEST_SUITE("optimize") {
  TEST_CASE("scalar plant: never worse than the constructive seed, and feasible") {
    const auto pl = scalar_plant();
    const auto s = synthesize_lqg(pl, scalar_weights());
    const auto res = optimize_design(pl, s, scalar_weights(), 1.1, quick(6));
    CHECK(res.loss.rho_delta >= 1.1);
    CHECK(res.loss.j_tilde <= res.seed_loss.j_tilde);
    CHECK(res.loss.j_tilde >= res.loss.j_lqg);
    CHECK(spectral_radius(res.design.a_tilde) < 1.0);
    CHECK(is_full_rank(res.design.a_tilde));
    CHECK(res.start_losses.size() == 6);
    // The reported loss is the loss of the returned design.
    const auto again = performance_loss(pl, s, scalar_weights(), res.design);
    CHECK(again.j_tilde == doctest::Approx(res.loss.j_tilde).epsilon(1e-12));
  }

  TEST_CASE("deterministic across execution paths") {
    const auto pl = scalar_plant();
    const auto s = synthesize_lqg(pl, scalar_weights());
    const auto a = optimize_design(pl, s, scalar_weights(), 1.05, quick(4, Execution::serial));
    const auto b = optimize_design(pl, s, scalar_weights(), 1.05, quick(4, Execution::parallel));
    CHECK(a.design.a_tilde == b.design.a_tilde);
    CHECK(a.design.m_tilde == b.design.m_tilde);
    CHECK(a.design.k_tilde == b.design.k_tilde);
    CHECK(a.best_start == b.best_start);
  }

  TEST_CASE("argument errors") {
    const auto pl = scalar_plant();
    const auto s = synthesize_lqg(pl, scalar_weights());
    CHECK_THROWS_AS(optimize_design(pl, s, scalar_weights(), 1.0), ArgumentError);
    CHECK_THROWS_AS(optimize_design(pl, s, scalar_weights(), 0.9), ArgumentError);
    auto o = quick(0);
    CHECK_THROWS_AS(optimize_design(pl, s, scalar_weights(), 1.1, o), ArgumentError);
    o = quick(2);
    o.schur_rescale = 1.5;
    CHECK_THROWS_AS(optimize_design(pl, s, scalar_weights(), 1.1, o), ArgumentError);
  }

  TEST_CASE("non-square detector state") {
    std::mt19937_64 rng(81);
    const auto inst = random_instance(rng, 3, 1, 1);
    auto o = quick(3);
    o.n_zeta = 2;
    const auto res = optimize_design(inst.plant, inst.syn, inst.weights, 1.05, o);
    CHECK(res.design.n_zeta() == 2);
    CHECK(res.loss.rho_delta >= 1.05);
  }

  TEST_CASE("DC motor: same order of magnitude as the reference design") {
    const auto m = motor();
    const auto ref = performance_loss(m.plant, m.syn, m.weights, reference_dc_motor_design());
    const auto res = optimize_design(m.plant, m.syn, m.weights, 1.03, quick(4));
    MESSAGE("optimized delta_loss " << res.loss.delta_loss << ", reference design " << ref.delta_loss);
    CHECK(res.loss.rho_delta >= 1.03);
    CHECK(res.loss.delta_loss > 0.0);
    CHECK(res.loss.delta_loss < 10.0 * ref.delta_loss);
    CHECK(res.loss.delta_loss > 0.1 * ref.delta_loss);
  }
}
