/* Copyright 2026 The tinyfuse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "tinyfuse/distill.hpp"
#include "tinyfuse/executor.hpp"
#include "tinyfuse/memory.hpp"
#include "tinyfuse/search_space.hpp"

namespace {

using namespace tinyfuse;
using testing_support::tiny_dataset;
using testing_support::tiny_network;
using LD = long double;

std::vector<LD> soften_ld(const std::vector<double>& z, LD t) {
  std::vector<LD> e(z.size());
  LD sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += e[i] = std::exp(static_cast<LD>(z[i]) / t);
  for (auto& v : e) v /= sum;
  return e;
}

LD kl_ld(const std::vector<LD>& q, const std::vector<LD>& p) {
  LD s = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0) s += q[i] * std::log(q[i] / std::max<LD>(p[i], 1e-12L));
  }
  return s;
}

TEST(Soften, AnalyticExamples) {
  const std::vector<double> zero{0, 0, 0};
  for (double t : {0.5, 1.0, 4.0}) {
    for (double p : soften<double>(zero, t)) EXPECT_DOUBLE_EQ(p, 1.0 / 3);
  }
  const std::vector<double> ln2{std::log(2.0), 0};
  const auto p = soften<double>(ln2, 1.0);
  EXPECT_NEAR(p[0], 2.0 / 3, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3, 1e-15);

  const std::vector<double> z{2, 1, 0};
  const auto q = soften<double>(z, 2.0);
  const auto ref = soften_ld({2, 1, 0}, 2);
  const double printed[] = {0.50648, 0.30720, 0.18632};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(q[i], static_cast<double>(ref[i]), 1e-15);
    EXPECT_NEAR(q[i], printed[i], 1e-5);
  }
}

TEST(Soften, RejectsNonPositiveTemperature) {
  const std::vector<double> z{1, 2};
  EXPECT_THROW(soften<double>(z, 0.0), Error);
  EXPECT_THROW(soften<double>(z, -1.0), Error);
}

TEST(Soften, PreservesOrderAndApproachesUniform) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.below(10);
    std::vector<double> z(k);
    for (auto& v : z) v = rng.uniform(-10, 10);
    const double t = std::exp(rng.uniform(std::log(0.05), std::log(50.0)));
    const auto p = soften<double>(z, t);
    EXPECT_EQ(argmax<double>(p), argmax<double>(z));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        if (z[i] < z[j]) {
          ASSERT_LE(p[i], p[j]);
        }
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-6);
    const auto u = soften<double>(z, 1e6);
    for (double v : u) ASSERT_NEAR(v, 1.0 / k, 1e-5);
  }
}

TEST(Soften, UnitTemperatureIsPlainSoftmax) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> z(6), plain(6);
    for (auto& v : z) v = static_cast<float>(rng.uniform(-20, 20));
    softmax<float>(z, plain);
    EXPECT_EQ(soften<float>(z, 1.0f), plain);
  }
}

TEST(KlDivergence, AnalyticExamples) {
  const std::vector<double> a{0.7, 0.3}, half{0.5, 0.5}, one{1, 0};
  EXPECT_NEAR(kl_divergence<double>(a, half), 0.082282, 1e-5);
  EXPECT_NEAR(kl_divergence<double>(a, half), static_cast<double>(kl_ld({0.7L, 0.3L}, {0.5L, 0.5L})), 1e-15);
  EXPECT_NEAR(kl_divergence<double>(one, half), std::log(2.0), 1e-15);
  EXPECT_EQ(kl_divergence<double>(a, a), 0.0);
  const std::vector<double> three{0.2, 0.3, 0.5};
  EXPECT_THROW(kl_divergence<double>(a, three), Error);
}

TEST(KlDivergence, NonNegativeAndZeroOnlyWhenEqual) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.below(8);
    std::vector<double> zq(k), zp(k);
    for (auto& v : zq) v = rng.uniform(-5, 5);
    for (auto& v : zp) v = rng.uniform(-5, 5);
    const auto q = soften<double>(zq, 1.0), p = soften<double>(zp, 1.0);
    const double d = kl_divergence<double>(q, p);
    EXPECT_GE(d, 0.0);
    EXPECT_GT(d, 0.0);
    EXPECT_EQ(kl_divergence<double>(q, q), 0.0);
  }
}

TEST(KdLoss, HardLabelLimitIsCrossEntropy) {
  DistillConfig cfg;
  cfg.alpha = 1;
  const std::vector<double> s{1.5, -0.5, 0.25}, t{3, 2, 1};
  const auto r = kd_loss<double>(s, t, 2, cfg);
  const auto p = soften<double>(s, 1.0);
  EXPECT_NEAR(r.loss, -std::log(p[2]), 1e-14);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.grad[i], p[i] - (i == 2), 1e-14);
}

TEST(KdLoss, MatchingTeacherWithoutHardLabelsIsZero) {
  DistillConfig cfg;
  cfg.alpha = 0;
  const std::vector<double> z{0.3, 1.1, -2};
  const auto r = kd_loss<double>(z, z, 0, cfg);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grad) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(KdLoss, MatchesComposedFormula) {
  DistillConfig cfg;
  cfg.alpha = 0.5;
  cfg.temperature = 2;
  const std::vector<double> s{0.2, -1.0, 0.7, 0.1}, t{2.0, -0.5, 0.3, 1.2};
  const LD ce = -std::log(soften_ld(s, 1)[1]);
  const LD kl = kl_ld(soften_ld(t, 2), soften_ld(s, 2));
  const LD want = 0.5L * ce + 0.5L * 4 * kl;
  EXPECT_NEAR(kd_loss<double>(s, t, 1, cfg).loss, static_cast<double>(want), 1e-12);

  cfg.literal_student_temperature = true;
  const LD literal = 0.5L * ce + 0.5L * kl_ld(soften_ld(t, 2), soften_ld(s, 1));
  EXPECT_NEAR(kd_loss<double>(s, t, 1, cfg).loss, static_cast<double>(literal), 1e-12);
}

TEST(KdLoss, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  for (bool literal : {false, true}) {
    for (int trial = 0; trial < 200; ++trial) {
      DistillConfig cfg;
      cfg.alpha = rng.uniform(0, 1);
      cfg.temperature = std::vector<double>{1, 2, 4, 8}[rng.below(4)];
      cfg.literal_student_temperature = literal;
      const std::size_t k = 2 + rng.below(8);
      std::vector<double> s(k), t(k);
      for (auto& v : s) v = rng.uniform(-3, 3);
      for (auto& v : t) v = rng.uniform(-3, 3);
      const int label = static_cast<int>(rng.below(k));
      const auto r = kd_loss<double>(s, t, label, cfg);
      for (std::size_t i = 0; i < k; ++i) {
        auto up = s, down = s;
        up[i] += 1e-5;
        down[i] -= 1e-5;
        const double fd =
            (kd_loss<double>(up, t, label, cfg).loss - kd_loss<double>(down, t, label, cfg).loss) / 2e-5;
        ASSERT_NEAR(r.grad[i], fd, 1e-3 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TrainResult trained_teacher() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 1;
  return train(make_model(tiny_network(6), 1), tiny_dataset(), cfg);
}

const FloatModel& teacher() {
  static const FloatModel model = trained_teacher().model;
  return model;
}

TEST(Distill, TeacherIsFrozenAndSelfDistillationConverges) {
  const std::string before = parameter_checksum(teacher());
  DistillConfig cfg;
  cfg.alpha = 0;
  cfg.train.epochs = 6;
  cfg.train.seed = 9;
  const auto result = distill(teacher(), teacher().graph, tiny_dataset(), cfg);
  EXPECT_EQ(parameter_checksum(teacher()), before);
  const double t = evaluate(teacher(), tiny_dataset(), Split::kValidation).accuracy;
  const double s = evaluate(result.model, tiny_dataset(), Split::kValidation).accuracy;
  EXPECT_GE(s, t - 0.01);
}

TEST(Distill, RejectsBadConfigAndMismatchedStudents) {
  DistillConfig cfg;
  cfg.train.epochs = 0;
  EXPECT_THROW(distill(teacher(), tiny_network(2), tiny_dataset(), cfg), Error);
  cfg = DistillConfig{};
  cfg.temperature = 0;
  EXPECT_THROW(distill(teacher(), tiny_network(2), tiny_dataset(), cfg), Error);
  cfg = DistillConfig{};
  cfg.alpha = 1.5;
  EXPECT_THROW(distill(teacher(), tiny_network(2), tiny_dataset(), cfg), Error);

  cfg = DistillConfig{};
  cfg.train.epochs = 1;
  Graph other_classes = tiny_network(2);
  other_classes.num_classes = 3;
  other_classes.nodes[other_classes.at("classifier")].spec.units = 3;
  EXPECT_THROW(distill(teacher(), other_classes, tiny_dataset(), cfg), Error);
  const Graph one_modality = restrict_to_modalities(tiny_network(2), {"left"});
  EXPECT_THROW(distill(teacher(), one_modality, tiny_dataset(), cfg), Error);
}

ArchSearchSpace tiny_space() {
  ArchSearchSpace space;
  space.axes.push_back({"width", AxisKind::kFilters, {"left_conv", "right_conv"}, {1, 2, 4}});
  space.axes.push_back({"separable", AxisKind::kSeparable, {"right_conv"}, {0, 1}});
  return space;
}

DistillConfig search_config() {
  DistillConfig cfg;
  cfg.train.epochs = 2;
  cfg.train.seed = 5;
  return cfg;
}

TEST(Search, IsDeterministicAndOrderInvariant) {
  const auto candidates = enumerate_candidates(tiny_space(), tiny_network(2));
  const auto profile = builtin_profile("gap8");
  const auto a = memory_aware_search(teacher(), candidates, 1 << 20, profile, tiny_dataset(), search_config());
  auto reversed = candidates;
  std::reverse(reversed.begin(), reversed.end());
  const auto b = memory_aware_search(teacher(), reversed, 1 << 20, profile, tiny_dataset(), search_config());
  ArchSearchSpace permuted = tiny_space();
  std::reverse(permuted.axes.begin(), permuted.axes.end());
  std::reverse(permuted.axes[1].values.begin(), permuted.axes[1].values.end());
  const auto c = memory_aware_search(teacher(), enumerate_candidates(permuted, tiny_network(2)), 1 << 20,
                                     profile, tiny_dataset(), search_config());
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.to_json(), c.to_json());
  ASSERT_EQ(a.candidates.size(), 6u);
  // Everything fits, so the order is by accuracy alone.
  for (std::size_t i = 1; i < a.candidates.size(); ++i) {
    EXPECT_TRUE(a.candidates[i].fits());
    EXPECT_GE(a.candidates[i - 1].val_accuracy, a.candidates[i].val_accuracy);
  }
  ASSERT_TRUE(a.selected());
  EXPECT_EQ(*a.selected(), 0u);
  EXPECT_EQ(a.models.size(), a.candidates.size());
  EXPECT_DOUBLE_EQ(evaluate(a.models[0], tiny_dataset(), Split::kValidation).accuracy,
                   a.candidates[0].val_accuracy);
}

TEST(Search, ZeroBudgetFlagsEverything) {
  auto candidates = enumerate_candidates(tiny_space(), tiny_network(2));
  candidates.resize(2);
  DistillConfig cfg = search_config();
  cfg.train.epochs = 1;
  const auto r = memory_aware_search(teacher(), candidates, 0, builtin_profile("gap8"), tiny_dataset(), cfg);
  for (const auto& c : r.candidates) {
    EXPECT_FALSE(c.fits_budget);
    EXPECT_FALSE(c.fits());
  }
  EXPECT_FALSE(r.selected());
  EXPECT_FALSE(r.to_json().contains("selected"));
}

TEST(Search, OrderPutsFittingThenAccuracyThenIdWithDivergedLast) {
  auto make = [](std::string id, bool fits, double acc, bool diverged) {
    SearchCandidateResult r;
    r.id = std::move(id);
    r.fits_budget = fits;
    r.fits_memory = true;
    r.val_accuracy = acc;
    r.diverged = diverged;
    return r;
  };
  std::vector<SearchCandidateResult> v{make("e", true, 0.99, true), make("d", false, 0.95, false),
                                       make("c", true, 0.80, false), make("b", true, 0.90, false),
                                       make("a", true, 0.90, false)};
  std::sort(v.begin(), v.end(), search_order);
  std::string ids;
  for (const auto& r : v) ids += r.id;
  EXPECT_EQ(ids, "abcde");
}

TEST(Search, AllDivergingCandidatesAreReported) {
  auto candidates = enumerate_candidates(tiny_space(), tiny_network(2));
  candidates.resize(2);
  DistillConfig cfg = search_config();
  cfg.train.epochs = 1;
  cfg.train.learning_rate = 1e30;
  try {
    memory_aware_search(teacher(), candidates, 1 << 20, builtin_profile("gap8"), tiny_dataset(), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDiverged);
    EXPECT_NE(std::string(e.what()).find(candidates[0].id), std::string::npos);
  }
}

}  // namespace
