#include <gtest/gtest.h>

#include "keyframe/quality.hpp"
#include "test_support.hpp"

using namespace keyframe;
using namespace keyframe::quality;
using core::ClassLabel;
using core::ProbVector;
using core::RawVector;
namespace kt = keyframe::testing;

namespace {

constexpr ClassLabel A = ClassLabel::TransThalamic;
constexpr ClassLabel B = ClassLabel::BrainOther;

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected keyframe::Error";
  return ErrorCode::IoError;
}

std::vector<bool> mask(std::vector<ClassLabel> c, std::size_t w) { return stability_mask(c, StabilityWindow{w}); }

ProbVector random_probs(core::Rng& rng) {
  std::array<double, 5> p{};
  double s = 0.0;
  for (double& v : p) s += (v = rng.uniform01());
  for (double& v : p) v /= s;
  return ProbVector(p);
}

void expect_matches_oracle(const QualitySeries& got, const std::vector<kt::OracleFrame>& want) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    ASSERT_NEAR(got[i].quality.value(), want[i].quality, 1e-12) << "frame " << i;
    ASSERT_EQ(core::index_of(got[i].selected_class), want[i].selected_class) << "frame " << i;
    for (std::size_t k = 0; k < 5; ++k) ASSERT_NEAR(got[i].aggregated[k], want[i].aggregated[k], 1e-12);
  }
}

}  // namespace

TEST(Harden, KeepsOnlyTheMaximum) {
  EXPECT_EQ(harden(ProbVector({0.7, 0.1, 0.1, 0.05, 0.05})), RawVector({0.7, 0, 0, 0, 0}));
  EXPECT_EQ(harden(ProbVector({0.2, 0.2, 0.2, 0.2, 0.2})), RawVector({0.2, 0, 0, 0, 0}));
  EXPECT_EQ(harden(ProbVector({0, 0, 1, 0, 0})), RawVector({0, 0, 1, 0, 0}));
}

TEST(StabilityMask, HandExamples) {
  EXPECT_EQ(mask({A, A, A, A}, 1), std::vector<bool>(4, true));
  EXPECT_EQ(mask({A, A, A, B, A, A, A}, 1), (std::vector<bool>{true, true, false, false, false, true, true}));
  EXPECT_EQ(mask({A, B, A, B, B}, 0), std::vector<bool>(5, true));
  EXPECT_EQ(mask({B}, 10), std::vector<bool>{true});
  // clipped windows at both ends
  EXPECT_EQ(mask({A, A, B, B, B, B}, 2), (std::vector<bool>{false, false, false, false, true, true}));
  EXPECT_EQ(code_of([] { mask({}, 1); }), ErrorCode::EmptySequence);
}

TEST(StabilityMask, MatchesDirectWindowScan) {
  core::Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(60), w = rng.below(8);
    std::vector<ClassLabel> c(n);
    for (auto& x : c) x = core::label_from_index(rng.below(2) * 3);
    const auto got = mask(c, w);
    for (std::size_t i = 0; i < n; ++i) {
      bool stable = true;
      for (std::size_t j = (i >= w ? i - w : 0); j <= std::min(n - 1, i + w); ++j) stable &= c[j] == c[i];
      ASSERT_EQ(got[i], stable);
    }
  }
}

TEST(HardenAndFilter, ZeroesUnstableFrames) {
  const ProbVector pa({0.1, 0.6, 0.1, 0.1, 0.1}), pb({0.1, 0.1, 0.1, 0.6, 0.1});
  const auto out = harden_and_filter(std::vector<ProbVector>{pa, pa, pa, pb, pa, pa, pa}, StabilityWindow{1});
  for (std::size_t i : {2u, 3u, 4u}) EXPECT_TRUE(out[i].is_zero());
  for (std::size_t i : {0u, 1u, 5u, 6u}) EXPECT_EQ(out[i], RawVector({0, 0.6, 0, 0, 0}));

  const ProbVector c({0.9, 0.1, 0, 0, 0});
  for (const auto& v : harden_and_filter(std::vector<ProbVector>(6, c), StabilityWindow{2})) {
    EXPECT_EQ(v, RawVector({0.9, 0, 0, 0, 0}));
  }
  EXPECT_EQ(harden_and_filter(std::vector<ProbVector>{pb}, StabilityWindow{4}).front(), RawVector({0, 0, 0, 0.6, 0}));
}

TEST(TtaAggregate, ArithmeticMean) {
  const std::vector<RawVector> one{RawVector({0.9, 0, 0, 0, 0}), RawVector()};
  EXPECT_EQ(tta_aggregate({one}), one);
  const auto two = tta_aggregate({{RawVector({0.9, 0, 0, 0, 0})}, {RawVector({0, 0.8, 0, 0, 0})}});
  EXPECT_NEAR(two[0][0], 0.45, 1e-15);
  EXPECT_NEAR(two[0][1], 0.40, 1e-15);
  EXPECT_EQ(code_of([] { tta_aggregate({{RawVector()}, {}}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { tta_aggregate({}); }), ErrorCode::EmptySequence);
}

TEST(TtaAggregate, FourteenRandomHardenedInputs) {
  core::Rng rng(12);
  std::vector<std::vector<RawVector>> in(14);
  for (auto& seq : in) {
    for (int i = 0; i < 30; ++i) seq.push_back(rng.bernoulli(0.2) ? RawVector() : harden(random_probs(rng)));
  }
  const auto got = tta_aggregate(in);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t k = 0; k < 5; ++k) {
      long double s = 0;
      for (const auto& seq : in) s += seq[i][k];
      EXPECT_NEAR(got[i][k], static_cast<double>(s / 14), 1e-12);
    }
  }
}

TEST(MarginQuality, HandExamples) {
  EXPECT_NEAR(margin_quality(RawVector({0.45, 0.40, 0, 0, 0})).value(), 0.05, 1e-15);
  EXPECT_EQ(margin_quality(RawVector()).value(), 0.0);
  EXPECT_EQ(margin_quality(RawVector({0.113, 0.113, 0.114, 0, 0})).value(), 0.0);
  EXPECT_EQ(margin_quality(RawVector({1, 0, 0, 0, 0})).value(), 1.0);
}

TEST(MarginQuality, AlwaysInUnitInterval) {
  core::Rng rng(13);
  for (int i = 0; i < 10000; ++i) {
    std::array<double, 5> v{};
    double budget = 1.0;
    for (double& x : v) budget -= (x = rng.uniform(0.0, budget));
    const double q = margin_quality(RawVector(v)).value();
    ASSERT_GE(q, 0.0);
    ASSERT_LE(q, 1.0);
  }
}

TEST(QualityFromProbs, AllZeroAggregateIsNotABrainWithZeroQuality) {
  // alternating classes: every frame unstable for w=1 in every transform
  const ProbVector pa({0.9, 0.1, 0, 0, 0}), pb({0.1, 0.9, 0, 0, 0});
  const std::vector<std::vector<ProbVector>> probs{{pa, pb, pa, pb}, {pb, pa, pb, pa}};
  for (const auto& fq : quality_from_probs(probs, StabilityWindow{1})) {
    EXPECT_EQ(fq.quality.value(), 0.0);
    EXPECT_EQ(fq.selected_class, ClassLabel::NotABrain);
    EXPECT_FALSE(fq.stable_in_original);
    EXPECT_TRUE(fq.aggregated.is_zero());
  }
}

TEST(QualityFromProbs, IdentityOnlyGivesMaxProbability) {
  core::Rng rng(14);
  std::vector<ProbVector> seq;
  for (int i = 0; i < 20; ++i) seq.push_back(random_probs(rng));
  const auto series = quality_from_probs({seq}, StabilityWindow{0});
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto& p = seq[i].values();
    EXPECT_DOUBLE_EQ(series[i].quality.value(), *std::max_element(p.begin(), p.end()));
  }
}

TEST(QualityFromProbs, Errors) {
  const ProbVector p({1, 0, 0, 0, 0});
  EXPECT_EQ(code_of([&] { quality_from_probs({{p, p}, {p}}, StabilityWindow{}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { quality_from_probs({}, StabilityWindow{}); }), ErrorCode::EmptySequence);
  EXPECT_EQ(code_of([] { quality_from_probs({{}}, StabilityWindow{}); }), ErrorCode::EmptySequence);
}

TEST(ComputeQualitySeries, MatchesOracleOnSyntheticVideo) {
  core::Rng rng(15);
  const auto model = classifier::synthetic_classifier(3);
  std::vector<core::Frame> frames;
  for (int i = 0; i < 50; ++i) {
    std::vector<float> px(40 * 40);
    const double level = 0.2 + 0.6 * std::abs(std::sin(i / 9.0));
    for (std::size_t y = 0; y < 40; ++y) {
      for (std::size_t x = 0; x < 40; ++x) {
        px[y * 40 + x] = static_cast<float>(std::clamp(level * (x < 20 ? 1.0 : 0.3) + 0.02 * rng.normal(), 0.0, 1.0));
      }
    }
    frames.emplace_back(40, 40, std::move(px));
  }
  const auto cat = transforms::default_tta_catalogue();
  const auto got = compute_quality_series(frames, model, cat, StabilityWindow{5});
  expect_matches_oracle(got, kt::oracle_quality(kt::oracle_probs(frames, model, cat), 5));
}

TEST(ComputeQualitySeries, RandomInstancesMatchOracle) {
  core::Rng rng(16);
  for (int trial = 0; trial < 60; ++trial) {
    const auto model = kt::bucket_classifier(rng.next_u64());
    const auto frames = kt::run_video(rng, 5 + rng.below(60));
    const auto cat = kt::random_catalogue(rng, 1 + rng.below(14));
    const std::size_t w = rng.below(11);
    const auto got = compute_quality_series(frames, model, cat, StabilityWindow{w}, 1 + rng.below(3));
    expect_matches_oracle(got, kt::oracle_quality(kt::oracle_probs(frames, model, cat), w));
  }
}

TEST(ComputeQualitySeries, ConstantVideoGivesConstantSeries) {
  const auto model = classifier::synthetic_classifier(9);
  core::Rng rng(17);
  std::vector<float> px(30 * 30);
  for (float& v : px) v = static_cast<float>(rng.uniform01());
  const std::vector<core::Frame> frames(12, core::Frame(30, 30, px));
  const auto series = compute_quality_series(frames, model, transforms::default_tta_catalogue(), StabilityWindow{3});
  for (const auto& fq : series) {
    EXPECT_EQ(fq.quality.value(), series.front().quality.value());
    EXPECT_TRUE(fq.stable_in_original);
  }
}

TEST(ClassifyVideo, IndependentOfWorkerCount) {
  core::Rng rng(18);
  const auto frames = kt::run_video(rng, 40);
  const auto model = classifier::synthetic_classifier(1);
  const auto cat = transforms::default_tta_catalogue();
  const auto one = classify_video(frames, model, cat, 1);
  const auto four = classify_video(frames, model, cat, 4);
  EXPECT_EQ(one.probs, four.probs);
  EXPECT_EQ(one.identity_features, four.identity_features);
  ASSERT_EQ(one.probs.size(), 14u);
  EXPECT_EQ(one.identity_features.front(), model.classify(frames.front()).features);
  EXPECT_EQ(code_of([&] { classify_video({}, model, cat); }), ErrorCode::EmptySequence);
}
