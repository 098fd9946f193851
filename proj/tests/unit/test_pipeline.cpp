#include <gtest/gtest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "keyframe/pipeline.hpp"
#include "test_support.hpp"

using namespace keyframe;
using namespace keyframe::pipeline;
namespace kt = keyframe::testing;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected keyframe::Error";
  return ErrorCode::IoError;
}

core::Frame ramp(std::size_t w, std::size_t h, float offset) {
  std::vector<float> px(w * h);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = std::min(1.0f, offset + static_cast<float>(i) / px.size() * 0.5f);
  return core::Frame(w, h, std::move(px));
}

std::vector<float> pixels_of(const core::Frame& f) { return {f.pixels().begin(), f.pixels().end()}; }

std::vector<ClassLabel> all_tt(std::size_t n) { return std::vector<ClassLabel>(n, ClassLabel::TransThalamic); }

PipelineConfig bucket_config(std::size_t window = 2) {
  PipelineConfig cfg;
  cfg.model = "unused";
  cfg.window = window;
  return cfg;
}

}  // namespace

// ---- ingestion ------------------------------------------------------------------

TEST(Ingest, OrdersByFileNameAndRoundTripsPixels) {
  kt::TempDir dir("ingest");
  const std::vector<core::Frame> frames{ramp(6, 4, 0.0f), ramp(6, 4, 0.2f), ramp(6, 4, 0.4f)};
  save_frames(dir.path(), frames);
  // a hidden file is ignored
  kt::write_text(dir / ".DS_Store", "junk");
  const auto back = ingest_frames(dir.path());
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_EQ(back[i].width(), 6u);
    ASSERT_EQ(back[i].height(), 4u);
    for (std::size_t k = 0; k < back[i].pixels().size(); ++k) {
      ASSERT_NEAR(back[i].pixels()[k], frames[i].pixels()[k], 1.0 / 65535.0);
    }
  }
}

TEST(Ingest, LexicographicNotNumericOrder) {
  kt::TempDir dir("order");
  kt::TempDir src("order_src");
  save_frames(src.path(), std::vector<core::Frame>{ramp(4, 4, 0.0f), ramp(4, 4, 0.5f)});
  std::filesystem::copy_file(src / "frame_00000.png", dir / "b.png");
  std::filesystem::copy_file(src / "frame_00001.png", dir / "a.png");
  const auto back = ingest_frames(dir.path());
  EXPECT_NEAR(back[0].pixels()[0], 0.5f, 1e-4);
  EXPECT_NEAR(back[1].pixels()[0], 0.0f, 1e-4);
}

TEST(Ingest, Errors) {
  kt::TempDir dir("ingest_err");
  EXPECT_EQ(code_of([&] { ingest_frames(dir.path()); }), ErrorCode::NoFrames);
  EXPECT_EQ(code_of([&] { ingest_frames(dir / "missing"); }), ErrorCode::NoFrames);
  save_frames(dir / "a", std::vector<core::Frame>{ramp(4, 4, 0.1f)});
  save_frames(dir / "b", std::vector<core::Frame>{ramp(5, 4, 0.1f)});
  kt::TempDir mixed("ingest_mixed");
  std::filesystem::copy_file(dir / "a" / "frame_00000.png", mixed / "0.png");
  std::filesystem::copy_file(dir / "b" / "frame_00000.png", mixed / "1.png");
  EXPECT_EQ(code_of([&] { ingest_frames(mixed.path()); }), ErrorCode::InconsistentDimensions);
  kt::write_text(mixed / "2.png", "not an image");
  std::filesystem::remove(mixed / "1.png");
  EXPECT_EQ(code_of([&] { ingest_frames(mixed.path()); }), ErrorCode::UnreadableFile);
}

TEST(Ingest, SyntheticVideoIsDeterministic) {
  const auto a = synthetic_video(5, 32, 24, 3), b = synthetic_video(5, 32, 24, 3), c = synthetic_video(5, 32, 24, 4);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(pixels_of(a[i]), pixels_of(b[i]));
  EXPECT_NE(pixels_of(a[0]), pixels_of(c[0]));
  for (float v : a[2].pixels()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
}

// ---- metric ---------------------------------------------------------------------

TEST(RunMetric, MatchesOracleAndRecordsIdentityPass) {
  core::Rng rng(50);
  const auto model = kt::bucket_classifier(5);
  const auto frames = kt::run_video(rng, 45);
  const auto run = run_metric(bucket_config(3), model, frames);
  const auto oracle_p = kt::oracle_probs(frames, model, transforms::default_tta_catalogue());
  const auto want = kt::oracle_quality(oracle_p, 3);
  ASSERT_EQ(run.records.size(), 45u);
  for (std::size_t i = 0; i < 45; ++i) {
    EXPECT_EQ(run.records[i].frame_index, i);
    EXPECT_NEAR(run.records[i].metric.quality.value(), want[i].quality, 1e-12);
    EXPECT_EQ(run.records[i].probs.values(), oracle_p[0][i]);
  }
  EXPECT_EQ(run.identity_features.size(), 45u);
}

TEST(RunMetric, IndependentOfWorkers) {
  core::Rng rng(51);
  const auto frames = kt::run_video(rng, 30);
  const auto model = classifier::synthetic_classifier(2);
  auto cfg = bucket_config();
  cfg.workers = 1;
  const auto a = run_metric(cfg, model, frames);
  cfg.workers = 8;
  const auto b = run_metric(cfg, model, frames);
  std::ostringstream sa, sb;
  write_records(sa, a.records);
  write_records(sb, b.records);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(RunMetric, OpensConfiguredModel) {
  PipelineConfig cfg;
  cfg.model = "synthetic:4";
  const auto frames = synthetic_video(4, 40, 40, 1);
  const auto a = run_metric(cfg, frames);
  const auto b = run_metric(cfg, classifier::synthetic_classifier(4), frames);
  ASSERT_EQ(a.records.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(record_to_json(a.records[i]), record_to_json(b.records[i]));
  cfg.model.reset();
  EXPECT_EQ(code_of([&] { run_metric(cfg, frames); }), ErrorCode::InvalidArgument);
}

TEST(MetricOnly, SingleFrameSingleTransform) {
  std::istringstream in(R"({"frame_index":0,"transform_index":0,"p0":0.1,"p1":0.7,"p2":0.1,"p3":0.05,"p4":0.05})");
  const auto run = run_metric_only(in, 5);
  ASSERT_EQ(run.records.size(), 1u);
  EXPECT_DOUBLE_EQ(run.records[0].metric.quality.value(), 0.7);
  EXPECT_EQ(run.records[0].metric.selected_class, ClassLabel::TransThalamic);
}

TEST(MetricOnly, MatchesOracleOnRandomGrid) {
  core::Rng rng(52);
  const std::size_t T = 4, N = 25;
  std::vector<std::vector<std::array<double, 5>>> probs(T, std::vector<std::array<double, 5>>(N));
  std::ostringstream text;
  // emit in a shuffled order; the parser must place each record by index
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      std::array<double, 5> p{};
      const std::size_t top = rng.below(2) * 2;
      double rest = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        if (k != top) rest += (p[k] = rng.uniform(0.0, 0.1));
      }
      p[top] = 1.0 - rest;
      probs[t][i] = p;
      order.emplace_back(t, i);
    }
  }
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  for (auto [t, i] : order) {
    nlohmann::json j{{"frame_index", i}, {"transform_index", t}};
    for (std::size_t k = 0; k < 5; ++k) j["p" + std::to_string(k)] = probs[t][i][k];
    text << j.dump() << "\n";
  }
  std::istringstream in(text.str());
  const auto run = run_metric_only(in, 1);
  const auto want = kt::oracle_quality(probs, 1);
  for (std::size_t i = 0; i < N; ++i) EXPECT_NEAR(run.records[i].metric.quality.value(), want[i].quality, 1e-12);
}

TEST(MetricOnly, RejectsIncompleteOrBadInput) {
  const std::string rec = R"({"frame_index":0,"transform_index":0,"p0":1,"p1":0,"p2":0,"p3":0,"p4":0})";
  const std::string rec2 = R"({"frame_index":1,"transform_index":1,"p0":1,"p1":0,"p2":0,"p3":0,"p4":0})";
  auto run = [](const std::string& s) {
    std::istringstream in(s);
    return run_metric_only(in, 1);
  };
  EXPECT_EQ(code_of([&] { run(""); }), ErrorCode::EmptySequence);
  EXPECT_EQ(code_of([&] { run(rec + "\n" + rec2); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([&] { run(rec + "\n" + rec); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([&] { run("{not json"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { run(R"({"frame_index":0,"transform_index":0,"p0":0.5})"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { run(R"({"frame_index":0,"transform_index":0,"p0":0.9,"p1":0.9,"p2":0,"p3":0,"p4":0})"); }),
            ErrorCode::InvalidArgument);
}

// ---- GRU scoring ------------------------------------------------------------------

TEST(GruScoring, ZeroWeightsGiveOneHalf) {
  const auto frames = synthetic_video(6, 32, 32, 2);
  const auto scores = run_gru_scoring(classifier::synthetic_classifier(0), gru::GruHeadModel::zeros(8), frames);
  ASSERT_EQ(scores.size(), 6u);
  for (double s : scores) EXPECT_EQ(s, 0.5);
}

TEST(GruScoring, DeterministicAndCausal) {
  const auto model = classifier::synthetic_classifier(1);
  const auto head = gru::GruHeadModel::create(16, 3);
  const auto frames = synthetic_video(12, 32, 32, 3);
  std::vector<ClassLabel> classes;
  const auto a = run_gru_scoring(model, head, frames, 1, &classes);
  EXPECT_EQ(a, run_gru_scoring(model, head, frames, 4));
  ASSERT_EQ(classes.size(), 12u);
  EXPECT_EQ(classes[3], core::argmax_class(model.classify(frames[3]).probs));
  const std::vector<core::Frame> prefix(frames.begin(), frames.begin() + 5);
  const auto p = run_gru_scoring(model, head, prefix);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(p[t], a[t]);
  EXPECT_EQ(code_of([&] { run_gru_scoring(model, head, std::vector<core::Frame>{}); }), ErrorCode::EmptySequence);
  EXPECT_EQ(code_of([&] { run_gru_scoring(model, gru::GruHeadModel::custom(10, 4, 0.1, 0.2, 1), frames); }),
            ErrorCode::ShapeMismatch);
}

// ---- training pairs ------------------------------------------------------------------

TEST(Pairs, OnePairPerVideoWithMetricTargets) {
  core::Rng rng(53);
  const auto model = kt::bucket_classifier(8);
  std::vector<std::pair<std::string, std::vector<core::Frame>>> videos{{"v1", kt::run_video(rng, 30)},
                                                                        {"v2", kt::run_video(rng, 40)}};
  const auto cfg = bucket_config(2);
  const auto pairs = build_training_pairs(cfg, model, videos);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].pair.features.steps, 30u);
  EXPECT_EQ(pairs[1].pair.targets.size(), 40u);
  EXPECT_EQ(pairs[1].pair.features.dim, core::kFeatureDim);
  const auto run = run_metric(cfg, model, videos[1].second);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(pairs[1].pair.targets[i], run.series[i].quality.value());

  kt::TempDir dir("pairs");
  save_pairs(dir / "p.txt", pairs);
  const auto back = load_pairs(dir / "p.txt");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t v = 0; v < 2; ++v) {
    EXPECT_EQ(back[v].video_id, pairs[v].video_id);
    EXPECT_EQ(back[v].pair.features.values, pairs[v].pair.features.values);
    EXPECT_EQ(back[v].pair.targets, pairs[v].pair.targets);
  }
}

TEST(Pairs, FileErrors) {
  EXPECT_EQ(code_of([] { load_pairs("/no/such/pairs.txt"); }), ErrorCode::FileNotFound);
  std::istringstream wrong("keyframe-pairs 9\n");
  EXPECT_EQ(code_of([&] { read_pairs(wrong); }), ErrorCode::FormatVersionMismatch);
  std::istringstream cut("keyframe-pairs 1\nvideos 1 dim 2\nvideo a 2\n0 1\n");
  EXPECT_EQ(code_of([&] { read_pairs(cut); }), ErrorCode::FormatVersionMismatch);
  std::istringstream narrow("keyframe-pairs 1\nvideos 1 dim 2\nvideo a 1\n0\ntargets 0.5\n");
  EXPECT_EQ(code_of([&] { read_pairs(narrow); }), ErrorCode::ShapeMismatch);
  std::istringstream ok("keyframe-pairs 1\nvideos 1 dim 2\nvideo a 1\n0.25 -1e-3\ntargets 0.5\n");
  const auto p = read_pairs(ok);
  EXPECT_EQ(p[0].pair.features.values, (std::vector<double>{0.25, -1e-3}));
  std::ostringstream out;
  EXPECT_EQ(code_of([&] { write_pairs(out, std::vector<VideoPair>{{"has space", p[0].pair}}); }),
            ErrorCode::InvalidArgument);
}

// ---- selection -------------------------------------------------------------------------

TEST(Select, SinglePeakAboveThreshold) {
  const std::vector<double> q{0, 0.2, 0.9, 0.2, 0};
  const auto r = select_keyframes(q, all_tt(5), KeyframeParams{0.5, 1, 5});
  ASSERT_EQ(r.keyframes.size(), 1u);
  EXPECT_EQ(r.keyframes[0].frame_index, 2u);
  EXPECT_EQ(r.keyframes[0].quality, 0.9);
  EXPECT_EQ(r.candidates, 1u);
  EXPECT_FALSE(r.none_above_threshold);
}

TEST(Select, NothingAboveThresholdIsFlagged) {
  const std::vector<double> q{0.1, 0.3, 0.1, 0.2, 0.1};
  const auto r = select_keyframes(q, all_tt(5), KeyframeParams{0.5, 1, 5});
  EXPECT_TRUE(r.keyframes.empty());
  EXPECT_TRUE(r.none_above_threshold);
  EXPECT_EQ(r.candidates, 2u);
}

TEST(Select, EqualSeparatedPeaksBothKept) {
  const std::vector<double> q{0, 0.8, 0, 0, 0, 0.8, 0};
  const auto r = select_keyframes(q, all_tt(7), KeyframeParams{0.5, 2, 5});
  ASSERT_EQ(r.keyframes.size(), 2u);
  EXPECT_EQ(r.keyframes[0].frame_index, 1u);
  EXPECT_EQ(r.keyframes[1].frame_index, 5u);
}

TEST(Select, PlateauReportedOnceAtItsStart) {
  const std::vector<double> q{0.1, 0.7, 0.7, 0.7, 0.1, 0.6};
  const auto r = select_keyframes(q, all_tt(6), KeyframeParams{0.5, 0, 5});
  ASSERT_EQ(r.keyframes.size(), 2u);
  EXPECT_EQ(r.keyframes[0].frame_index, 1u);
  EXPECT_EQ(r.keyframes[1].frame_index, 5u);
}

TEST(Select, NmsAndTopK) {
  // peaks at 1 (0.9), 3 (0.95), 7 (0.6), 9 (0.8)
  const std::vector<double> q{0, 0.9, 0.1, 0.95, 0, 0, 0, 0.6, 0.5, 0.8, 0};
  const auto r = select_keyframes(q, all_tt(q.size()), KeyframeParams{0.5, 2, 5});
  std::vector<std::size_t> idx;
  for (const auto& k : r.keyframes) idx.push_back(k.frame_index);
  EXPECT_EQ(idx, (std::vector<std::size_t>{3, 9}));
  const auto top1 = select_keyframes(q, all_tt(q.size()), KeyframeParams{0.5, 0, 1});
  ASSERT_EQ(top1.keyframes.size(), 1u);
  EXPECT_EQ(top1.keyframes[0].frame_index, 3u);
}

TEST(Select, PropertiesOnRandomSeries) {
  core::Rng rng(54);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(80);
    std::vector<double> q(n);
    for (double& v : q) v = rng.bernoulli(0.2) ? 0.5 : std::round(rng.uniform01() * 20) / 20;
    const KeyframeParams p{rng.uniform01(), rng.below(6), 1 + rng.below(6)};
    const auto r = select_keyframes(q, all_tt(n), p, ScoreSource::Gru);
    ASSERT_LE(r.keyframes.size(), p.top_k);
    for (std::size_t i = 0; i < r.keyframes.size(); ++i) {
      const auto& k = r.keyframes[i];
      ASSERT_GE(k.quality, p.min_quality);
      ASSERT_EQ(k.source, ScoreSource::Gru);
      if (i) ASSERT_GT(k.frame_index - r.keyframes[i - 1].frame_index, p.nms_radius);
      if (k.frame_index > 0) ASSERT_GT(q[k.frame_index], q[k.frame_index - 1]);
    }
  }
}

TEST(Select, Errors) {
  EXPECT_EQ(code_of([] { select_keyframes(std::vector<double>{}, {}, KeyframeParams{}); }), ErrorCode::EmptySeries);
  EXPECT_EQ(code_of([] { select_keyframes(std::vector<double>{0.5}, all_tt(2), KeyframeParams{}); }),
            ErrorCode::LengthMismatch);
}

// ---- formats ---------------------------------------------------------------------------

TEST(Config, ParseSerializeRoundTrip) {
  const auto c = parse_config(R"({"format_version":1,"model":"synthetic:3","window":4,
      "keyframes":{"min_quality":0.3,"nms_radius":2,"top_k":7},"workers":3,"seed":11})");
  EXPECT_EQ(*c.model, "synthetic:3");
  EXPECT_EQ(c.window, 4u);
  EXPECT_EQ(c.keyframes.top_k, 7u);
  EXPECT_EQ(c.catalogue, "default");
  EXPECT_EQ(serialize_config(parse_config(serialize_config(c))), serialize_config(c));
  EXPECT_EQ(code_of([] { parse_config(R"({"model":"x"})"); }), ErrorCode::FormatVersionMismatch);
  EXPECT_EQ(code_of([] { parse_config(R"({"format_version":1})"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_config(R"({"format_version":1,"model":"x","keyframes":{"min_quality":2}})"); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_config(R"({"format_version":1,"model":"x","workers":0})"); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { load_config("/no/such/config.json"); }), ErrorCode::FileNotFound);
}

TEST(Records, RoundTripAndFieldOrder) {
  core::Rng rng(55);
  const auto run = run_metric(bucket_config(1), kt::bucket_classifier(2), kt::run_video(rng, 12));
  auto records = run.records;
  records[3].gru_quality = 0.25;
  std::ostringstream out;
  write_records(out, records);
  std::istringstream in(out.str());
  const auto back = parse_records(in);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(record_to_json(back[i]), record_to_json(records[i]));
  const auto j = nlohmann::ordered_json::parse(record_to_json(records[3]));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"frame_index", "p0", "p1", "p2", "p3", "p4", "v0", "v1", "v2", "v3", "v4",
                                            "stable", "selected_class", "quality", "gru_quality"}));
}

TEST(Report, DeterministicDocument) {
  PipelineConfig cfg;
  cfg.model = "synthetic:1";
  const std::vector<double> q{0, 0.2, 0.9, 0.2, 0};
  const auto r = select_keyframes(q, all_tt(5), KeyframeParams{0.5, 1, 5});
  const auto text = report_to_json(r, cfg, ScoreSource::Metric);
  cfg.workers = 8;
  EXPECT_EQ(report_to_json(r, cfg, ScoreSource::Metric), text);
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j.at("format_version"), 1);
  EXPECT_EQ(j.at("source"), "metric");
  EXPECT_EQ(j.at("keyframes").at(0).at("frame_index"), 2);
  EXPECT_EQ(j.at("keyframes").at(0).at("selected_class"), "trans_thalamic");
  EXPECT_EQ(j.at("metadata").at("frame_count"), 5);
  EXPECT_FALSE(j.at("metadata").at("config").contains("workers"));
}
