#include <gtest/gtest.h>

#include "hillinv/adaptive.hpp"
#include "hillinv/config.hpp"
#include "support/invariants.hpp"

using namespace hillinv;

namespace {
GradientVector with_block(int p, std::vector<std::pair<int, double>> cos_entries,
                          std::vector<std::pair<int, double>> sin_entries = {}) {
  auto g = GradientVector::zero(2 * p);
  for (auto [k, v] : cos_entries) g.entries[cos_index(k, 2 * p)] = v;
  for (auto [k, v] : sin_entries) g.entries[sin_index(k, 2 * p)] = v;
  return g;
}
}  // namespace

TEST(GrowP, PicksStrongestMode) {
  EXPECT_EQ(grow_p(with_block(3, {{4, 0.1}, {5, 0.3}}, {{6, -0.2}}), 3), 5);
  EXPECT_EQ(grow_p(with_block(3, {{4, 0.1}}, {{6, -0.5}}), 3), 6);
  // in-space entries never count
  EXPECT_EQ(grow_p(with_block(2, {{1, 9.0}, {3, 1e-9}}), 2), 3);
}

TEST(GrowP, TiesGoToTheSmallestDegree) {
  EXPECT_EQ(grow_p(with_block(2, {{3, 0.5}, {4, 0.5}}), 2), 3);
  EXPECT_EQ(grow_p(with_block(3, {{4, 1}, {5, 1}, {6, 1}}, {{4, 1}, {5, 1}, {6, 1}}), 3), 4);
}

TEST(GrowP, AllZeroBlockIsAnError) {
  EXPECT_THROW(grow_p(with_block(2, {{1, 1.0}}), 2), NumericalError);
  EXPECT_THROW(grow_p(GradientVector::zero(3), 2), std::invalid_argument);
}

TEST(GrowP, OuterBlockNorm) {
  const auto g = with_block(2, {{0, 5.0}, {3, 3.0}}, {{4, 4.0}});
  EXPECT_DOUBLE_EQ(outer_block_norm(g, 2), 5.0);
}

TEST(Adaptive, CosineRecoveryMatchesNaive) {
  const auto T = targets_from_potential(generate_target(1, 1), QGrid::regular(25), 3, 20);
  const auto naive = run_naive(TrigPotential::zero(1), T, 20, 1, NaiveOptions{});
  const auto rec = run_adaptive(TrigPotential::zero(1), T, AdaptiveConfig{});
  EXPECT_EQ(rec.reason, Termination::Converged) << rec.detail;
  EXPECT_LE(std::abs(rec.final_J - naive.final_J), 1e-8);
  EXPECT_LE(rec.final_s, 6);
  EXPECT_LE(rec.final_S, 1e-6);
  EXPECT_LE(rec.final_P, 1e-6);
  EXPECT_LE(rec.final_gnorm, 1e-5);
  // s grows one step at a time from s0
  int s = 1;
  for (const auto& e : rec.events)
    if (e.kind == 's') {
      EXPECT_EQ(e.from, s);
      EXPECT_EQ(e.to, s + 1);
      s = e.to;
    }
  EXPECT_EQ(s, rec.final_s);
}

TEST(Adaptive, EventsAppearInTheRunRecord) {
  const auto T = targets_from_potential(generate_target(1, 1), QGrid::regular(25), 3, 20);
  const auto rec = run_adaptive(TrigPotential::zero(1), T, AdaptiveConfig{});
  ASSERT_FALSE(rec.events.empty());
  int tagged = 0;
  for (const auto& r : rec.rows)
    if (r.event.rfind("s:", 0) == 0 || r.event.rfind("p:", 0) == 0) ++tagged;
  EXPECT_EQ(tagged, static_cast<int>(rec.events.size()));
}

TEST(Adaptive, RealizableStartBehavesLikeNaive) {
  // start at the target with s0 = s_t: nothing to refine, nothing to descend
  const auto Vt = generate_target(2, 3);
  const auto T = targets_from_potential(Vt, QGrid::regular(9), 3, 20);
  AdaptiveConfig cfg;
  cfg.s0 = 20;
  cfg.p0 = 2;
  cfg.apost.s_ref = 40;
  const auto rec = run_adaptive(Vt, T, cfg);
  EXPECT_EQ(rec.reason, Termination::Converged);
  EXPECT_TRUE(rec.events.empty());
  EXPECT_EQ(rec.iterations, 0);
  EXPECT_EQ(rec.final_potential, Vt);
  EXPECT_EQ(rec.final_J, 0.0);
  EXPECT_EQ(rec.outer_passes, 1);
}

TEST(Adaptive, DegreeFourRecoveryGrowsPMonotonically) {
  const auto T = targets_from_potential(generate_target(4, 2), QGrid::regular(25), 3, 20);
  AdaptiveConfig cfg;
  cfg.apost.s_ref = 80;
  const auto rec = run_adaptive(TrigPotential::zero(1), T, cfg);
  int prev = 1, changes = 0;
  for (const auto& e : rec.events)
    if (e.kind == 'p') {
      EXPECT_EQ(e.from, prev);
      EXPECT_GT(e.to, prev);
      EXPECT_LE(e.to, 2 * prev);
      prev = e.to;
      ++changes;
    }
  EXPECT_GE(changes, 1);
  EXPECT_EQ(prev, rec.final_p);
}

TEST(Adaptive, SAndPNeverDecrease) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) EXPECT_TRUE(invariants::adaptive_monotonicity(seed).monotone) << seed;
}

TEST(Adaptive, BudgetsAreReported) {
  const auto T = targets_from_potential(generate_target(1, 1), QGrid::regular(9), 3, 20);
  AdaptiveConfig cfg;
  cfg.max_outer = 2;
  cfg.apost.s_ref = 40;
  const auto rec = run_adaptive(TrigPotential::zero(1), T, cfg);
  EXPECT_EQ(rec.reason, Termination::IterationBudget);
  EXPECT_EQ(rec.outer_passes, 2);
  EXPECT_FALSE(rec.detail.empty());

  cfg.max_outer = 100;
  cfg.max_iter = 3;
  const auto capped = run_adaptive(TrigPotential::zero(1), T, cfg);
  EXPECT_EQ(capped.reason, Termination::IterationBudget);
  EXPECT_EQ(capped.iterations, 3);
}

TEST(Adaptive, RejectsBadConfig) {
  const auto T = targets_from_potential(generate_target(1, 1), QGrid::regular(5), 3, 10);
  AdaptiveConfig cfg;
  EXPECT_THROW(run_adaptive(generate_target(2, 1), T, cfg), std::invalid_argument);
  cfg.eta = 0.0;
  EXPECT_THROW(run_adaptive(TrigPotential::zero(1), T, cfg), std::invalid_argument);
  cfg = AdaptiveConfig{};
  cfg.s0 = 300;
  EXPECT_THROW(run_adaptive(TrigPotential::zero(1), T, cfg), std::invalid_argument);
  const auto T5 = targets_from_potential(generate_target(1, 1), QGrid::regular(5), 5, 10);
  EXPECT_THROW(run_adaptive(TrigPotential::zero(1), T5, AdaptiveConfig{}), std::invalid_argument);
}
