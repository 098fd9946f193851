#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "keyframe/dataset.hpp"
#include "test_support.hpp"

using namespace keyframe;
using namespace keyframe::dataset;
using core::ClassLabel;
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

DatasetManifest uniform_manifest(std::size_t patients, std::size_t per_patient) {
  std::vector<ImageEntry> e;
  for (std::size_t p = 0; p < patients; ++p) {
    for (std::size_t i = 0; i < per_patient; ++i) {
      e.push_back({"p" + std::to_string(p), "img/" + std::to_string(p) + "_" + std::to_string(i) + ".png",
                   core::label_from_index((p + i) % 5), std::nullopt});
    }
  }
  return DatasetManifest(std::move(e));
}

DatasetManifest random_manifest(core::Rng& rng, std::size_t patients) {
  std::vector<ImageEntry> e;
  std::size_t serial = 0;
  for (std::size_t p = 0; p < patients; ++p) {
    const std::size_t n = 1 + rng.below(rng.bernoulli(0.1) ? 40 : 12);
    for (std::size_t i = 0; i < n; ++i) {
      e.push_back({"patient" + std::to_string(p), "x/" + std::to_string(serial++), core::label_from_index(rng.below(5)),
                   std::nullopt});
    }
  }
  // interleave patients like a real export
  for (std::size_t i = e.size(); i > 1; --i) std::swap(e[i - 1], e[rng.below(i)]);
  return DatasetManifest(std::move(e));
}

std::set<std::string> patients_of(const DatasetManifest& m) {
  std::set<std::string> s;
  for (const auto& e : m.entries()) s.insert(e.patient_id);
  return s;
}

std::size_t count_label(const DatasetManifest& m, ClassLabel c) {
  std::size_t n = 0;
  for (const auto& e : m.entries()) n += e.label == c;
  return n;
}

std::vector<std::string> nab_paths(const DatasetManifest& m) {
  std::vector<std::string> out;
  for (const auto& e : m.entries()) {
    if (e.label == ClassLabel::NotABrain) out.push_back(e.image_path);
  }
  return out;
}

DatasetManifest nab_heavy(std::size_t nab, std::size_t other) {
  std::vector<ImageEntry> e;
  for (std::size_t i = 0; i < nab + other; ++i) {
    e.push_back({"p" + std::to_string(i % 97), "f" + std::to_string(i),
                 i % (nab + other) < nab ? ClassLabel::NotABrain : ClassLabel::TransCerebellar, std::nullopt});
  }
  return DatasetManifest(std::move(e));
}

}  // namespace

// ---- manifest ---------------------------------------------------------------

TEST(Manifest, ParseAndSerializeRoundTrip) {
  const std::string text =
      "patient_id,image_path,label,split\n"
      "P1,a.png,trans_thalamic,train\n"
      "P1,\"dir,with,commas/b.png\",not_a_brain,val\n"
      "P2,c.png,brain_other,\n";
  const auto m = parse_manifest(text);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.entries()[1].image_path, "dir,with,commas/b.png");
  EXPECT_EQ(m.entries()[0].split, Split::Train);
  EXPECT_EQ(m.entries()[2].split, std::nullopt);
  EXPECT_EQ(parse_manifest(serialize_manifest(m)), m);

  const auto plain = parse_manifest("patient_id,image_path,label\nA,x,trans_ventricular\n");
  EXPECT_EQ(plain.entries()[0].label, ClassLabel::TransVentricular);
  kt::TempDir dir("manifest");
  save_manifest(m, dir / "m.csv");
  EXPECT_EQ(load_manifest(dir / "m.csv"), m);
}

TEST(Manifest, RejectsBadInput) {
  EXPECT_EQ(code_of([] { parse_manifest("patient,image,label\nA,x,not_a_brain\n"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_manifest("patient_id,image_path,label\nA,x,skull\n"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_manifest("patient_id,image_path,label\nA,x\n"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_manifest("patient_id,image_path,label\nA,x,not_a_brain\nB,x,not_a_brain\n"); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_manifest("patient_id,image_path,label\n,x,not_a_brain\n"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_manifest("patient_id,image_path,label,split\nA,x,not_a_brain,test\n"); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { load_manifest("/no/such/manifest.csv"); }), ErrorCode::FileNotFound);
}

// ---- split ------------------------------------------------------------------

TEST(Split, UniformToyManifest) {
  const auto m = uniform_manifest(10, 10);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = patient_disjoint_split(m, 0.8, seed);
    EXPECT_EQ(r.train_patients, 8u);
    EXPECT_EQ(r.val_patients, 2u);
    EXPECT_EQ(r.train.size(), 80u);
    EXPECT_DOUBLE_EQ(r.achieved_fraction, 0.8);
    EXPECT_FALSE(r.degenerate);
  }
}

TEST(Split, SinglePatientIsDegenerate) {
  const auto r = patient_disjoint_split(uniform_manifest(1, 7), 0.8, 3);
  EXPECT_EQ(r.train.size(), 7u);
  EXPECT_TRUE(r.val.empty());
  EXPECT_TRUE(r.degenerate);
}

TEST(Split, DisjointAndOrderPreserving) {
  core::Rng rng(40);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = random_manifest(rng, 2 + rng.below(80));
    const auto r = patient_disjoint_split(m, 0.8, rng.next_u64());
    const auto tp = patients_of(r.train), vp = patients_of(r.val);
    for (const auto& p : tp) ASSERT_EQ(vp.count(p), 0u);
    EXPECT_EQ(r.train.size() + r.val.size(), m.size());
    // entries keep their input order within each side
    std::size_t ti = 0, vi = 0;
    for (const auto& e : m.entries()) {
      if (ti < r.train.size() && r.train.entries()[ti] == e) ++ti;
      else if (vi < r.val.size() && r.val.entries()[vi] == e) ++vi;
    }
    EXPECT_EQ(ti, r.train.size());
    EXPECT_EQ(vi, r.val.size());
  }
}

TEST(Split, SeedDeterminism) {
  core::Rng rng(41);
  const auto m = random_manifest(rng, 60);
  const auto a = patient_disjoint_split(m, 0.8, 9), b = patient_disjoint_split(m, 0.8, 9);
  EXPECT_EQ(a.train, b.train);
  bool differs = false;
  for (std::uint64_t s = 10; s < 20 && !differs; ++s) differs = !(patient_disjoint_split(m, 0.8, s).train == a.train);
  EXPECT_TRUE(differs);
}

TEST(Split, Errors) {
  EXPECT_EQ(code_of([] { patient_disjoint_split(DatasetManifest(), 0.8, 0); }), ErrorCode::EmptyManifest);
  EXPECT_EQ(code_of([] { patient_disjoint_split(uniform_manifest(2, 2), 1.0, 0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { patient_disjoint_split(uniform_manifest(2, 2), 0.0, 0); }), ErrorCode::InvalidArgument);
}

// ---- undersampling --------------------------------------------------------------

TEST(Undersample, CapsNotABrainAt500) {
  const auto m = nab_heavy(5509, 1556);
  const auto s = epoch_undersample(m, 0, 1);
  EXPECT_EQ(count_label(s, ClassLabel::NotABrain), 500u);
  EXPECT_EQ(count_label(s, ClassLabel::TransCerebellar), 1556u);
  EXPECT_EQ(kNotABrainCap, 500u);
}

TEST(Undersample, KeepsEverythingWhenSupplyIsBelowCap) {
  const auto m = nab_heavy(300, 20);
  EXPECT_EQ(epoch_undersample(m, 4, 1), m);
}

TEST(Undersample, FreshSubsetEachEpochAndDeterministic) {
  const auto m = nab_heavy(2000, 50);
  const auto e1 = nab_paths(epoch_undersample(m, 1, 7)), e2 = nab_paths(epoch_undersample(m, 2, 7));
  EXPECT_NE(e1, e2);
  EXPECT_EQ(e1, nab_paths(epoch_undersample(m, 1, 7)));
  EXPECT_NE(e1, nab_paths(epoch_undersample(m, 1, 8)));
  // sample preserves input order
  const auto all = nab_paths(m);
  std::size_t j = 0;
  for (const auto& p : all) {
    if (j < e1.size() && e1[j] == p) ++j;
  }
  EXPECT_EQ(j, e1.size());
  EXPECT_EQ(code_of([&] { epoch_undersample(m, 0, 0, 0); }), ErrorCode::InvalidArgument);
}

// ---- statistics ---------------------------------------------------------------

TEST(Stats, EmptyManifestIsAllZero) {
  const auto s = manifest_stats(DatasetManifest());
  EXPECT_EQ(s, ManifestStats{});
}

TEST(Stats, CountsImagesPatientsAndTrainFlags) {
  const auto m = parse_manifest(
      "patient_id,image_path,label,split\n"
      "A,1,trans_thalamic,train\nA,2,trans_thalamic,val\nB,3,trans_thalamic,train\n"
      "B,4,not_a_brain,\nC,5,brain_other,train\n");
  const auto s = manifest_stats(m);
  EXPECT_EQ(s[ClassLabel::TransThalamic], (ClassCounts{3, 2, 2}));
  EXPECT_EQ(s[ClassLabel::NotABrain], (ClassCounts{1, 1, 0}));
  EXPECT_EQ(s.brain, (ClassCounts{4, 3, 3}));
  EXPECT_EQ(s.total, (ClassCounts{5, 3, 3}));
}

TEST(Stats, PublicDatasetFixture) {
  const auto s = manifest_stats(load_manifest(kt::data_dir() / "images_manifest.csv"));
  EXPECT_EQ(s.brain.images, 3092u);
  EXPECT_EQ(s[ClassLabel::NotABrain].images, 9308u);
  EXPECT_EQ(s[ClassLabel::TransThalamic].images, 1638u);
  EXPECT_EQ(s[ClassLabel::TransVentricular].train_images, 231u);
  EXPECT_EQ(s.brain.train_images, 1556u);
  EXPECT_EQ(s.total.images, 12400u);
  EXPECT_EQ(s.total.patients, 1792u);
  EXPECT_EQ(s.brain.patients, 1082u);
  EXPECT_EQ(s[ClassLabel::TransThalamic].patients, 909u);
  EXPECT_EQ(s[ClassLabel::NotABrain].patients, 1731u);
}

TEST(VideoStats, SmallExamples) {
  const std::vector<VideoEntry> one{{"a", 10.0, 30.0, 300}};
  const auto s1 = video_stats(one);
  EXPECT_EQ(s1.count, 1u);
  EXPECT_EQ(s1.duration.min, 10.0);
  EXPECT_EQ(s1.duration.max, 10.0);
  EXPECT_EQ(s1.duration.mean, 10.0);
  EXPECT_EQ(s1.duration.std, 0.0);
  const std::vector<VideoEntry> two{{"a", 10.0, 30.0, 300}, {"b", 20.0, 30.0, 600}};
  const auto s2 = video_stats(two);
  EXPECT_DOUBLE_EQ(s2.duration.mean, 15.0);
  EXPECT_DOUBLE_EQ(s2.duration.std, 5.0);
  EXPECT_EQ(code_of([] { video_stats({}); }), ErrorCode::EmptyList);
  EXPECT_EQ(round2(16.4196), 16.42);
}

TEST(VideoStats, RecordingsFixture) {
  const auto videos = load_video_list(kt::data_dir() / "videos.csv");
  const auto s = video_stats(videos);
  EXPECT_EQ(s.count, 130u);
  EXPECT_EQ(s.duration.min, 4.0);
  EXPECT_EQ(s.duration.max, 50.0);
  EXPECT_NEAR(s.duration.mean, 16.42, 0.01);
  EXPECT_NEAR(s.duration.std, 7.85, 0.01);
  EXPECT_EQ(s.fps.min, 22.0);
  EXPECT_EQ(s.fps.max, 55.0);
  EXPECT_NEAR(s.fps.mean, 29.67, 0.01);
  EXPECT_NEAR(s.fps.std, 3.63, 0.01);
}

TEST(VideoList, Validation) {
  EXPECT_EQ(code_of([] { parse_video_list("video_id,duration_s,fps,frame_count\nv,0,30,0\n"); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_video_list("video_id,duration_s,fps,frame_count\nv,10,30,500\n"); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_video_list("video_id,duration_s,fps,frame_count\nv,ten,30,300\n"); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(parse_video_list("video_id,duration_s,fps,frame_count\nv,10,29.97,300\n").front().frame_count, 300u);
}

TEST(CnnTemplate, MatchesPublishedDocument) {
  const auto doc = nlohmann::json::parse(cnn_template_json());
  EXPECT_EQ(doc.at("batch_size"), 32);
  EXPECT_EQ(doc.at("max_epochs"), 50);
  EXPECT_EQ(doc.at("early_stop_patience"), 10);
  EXPECT_EQ(doc.at("learning_rate"), 5e-4);
  EXPECT_EQ(doc.at("lr_schedule").at("factor"), 0.5);
  EXPECT_EQ(doc.at("undersample").at("per_epoch"), 500);
  EXPECT_EQ(doc.at("split").at("train_fraction"), 0.8);
  EXPECT_EQ(doc.at("feature_dim"), 1280);
  const auto committed = nlohmann::json::parse(kt::read_text(std::filesystem::path(KEYFRAME_TEST_DATA) / ".." / ".." /
                                                             "docs" / "cnn_training_template.json"));
  EXPECT_EQ(committed, doc);
}
