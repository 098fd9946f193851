#include <gtest/gtest.h>

#include "gru_tasks.hpp"
#include "keyframe/gru.hpp"

using namespace keyframe;
using namespace keyframe::gru;
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

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.weight_decay = 1e-5;
  cfg.max_epochs = 8;
  cfg.early_stop_patience = 8;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST(Train, LearnsSmallRunningMeanTask) {
  const auto train_set = kt::running_mean_task(1, 40, 6);
  const auto val_set = kt::running_mean_task(2, 10, 6);
  const auto model = GruHeadModel::custom(6, 8, 0.1, 0.2, 4);
  auto cfg = quick_config();
  cfg.momentum = 0.9;
  cfg.learning_rate = 5e-3;
  cfg.max_epochs = 15;
  cfg.early_stop_patience = 15;
  const double before = evaluate(model, val_set);
  const auto result = train(model, train_set, val_set, cfg);
  EXPECT_LT(evaluate(result.model, val_set), 0.5 * before);
}

TEST(Train, BitIdenticalHistoryForFixedSeeds) {
  const auto train_set = kt::running_mean_task(5, 12, 4);
  const auto val_set = kt::running_mean_task(6, 4, 4);
  const auto model = GruHeadModel::custom(4, 5, 0.1, 0.2, 7);
  const auto a = train(model, train_set, val_set, quick_config());
  const auto b = train(model, train_set, val_set, quick_config());
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.model, b.model);
  auto other = quick_config();
  other.seed = 4;
  EXPECT_FALSE(train(model, train_set, val_set, other).history == a.history);
}

TEST(Train, ReturnsBestValidationWeights) {
  const auto train_set = kt::running_mean_task(8, 10, 4);
  const auto val_set = kt::running_mean_task(9, 4, 4);
  auto cfg = quick_config();
  cfg.learning_rate = 0.5;  // noisy on purpose
  const auto r = train(GruHeadModel::custom(4, 5, 0.1, 0.2, 1), train_set, val_set, cfg);
  ASSERT_LT(r.history.best_epoch, r.history.epochs.size());
  double best = r.history.epochs.front().val_loss;
  for (const auto& e : r.history.epochs) best = std::min(best, e.val_loss);
  EXPECT_EQ(r.history.epochs[r.history.best_epoch].val_loss, best);
  EXPECT_DOUBLE_EQ(evaluate(r.model, val_set), best);
}

TEST(Train, EarlyStopsOnPlateau) {
  const auto plateau = kt::plateau_task(3, 5);
  TrainConfig cfg;
  cfg.early_stop_patience = 1;
  const auto r = train(GruHeadModel::zeros(8), plateau, plateau, cfg);
  EXPECT_EQ(r.history.stop_reason, StopReason::EarlyStop);
  EXPECT_EQ(r.history.epochs.size(), 2u);
  EXPECT_EQ(to_string(r.history.stop_reason), "early_stop");
}

TEST(Train, RunsToMaxEpochsWhenImproving) {
  const auto train_set = kt::running_mean_task(10, 6, 3);
  auto cfg = quick_config();
  cfg.max_epochs = 3;
  cfg.early_stop_patience = 3;
  const auto r = train(GruHeadModel::custom(3, 4, 0.1, 0.2, 2), train_set, train_set, cfg);
  EXPECT_EQ(r.history.epochs.size(), 3u);
  EXPECT_EQ(r.history.stop_reason, StopReason::MaxEpochs);
  EXPECT_EQ(to_string(StopReason::MaxEpochs), "max_epochs");
}

TEST(Train, AdamOptionAlsoLearns) {
  const auto train_set = kt::running_mean_task(11, 30, 5);
  const auto val_set = kt::running_mean_task(12, 8, 5);
  const auto model = GruHeadModel::custom(5, 6, 0.1, 0.2, 3);
  auto cfg = quick_config();
  cfg.optimizer = Optimizer::Adam;
  cfg.learning_rate = 5e-3;
  const auto r = train(model, train_set, val_set, cfg);
  EXPECT_LT(evaluate(r.model, val_set), 0.5 * evaluate(model, val_set));
}

TEST(Train, InputValidation) {
  const auto good = kt::running_mean_task(13, 2, 3);
  const auto model = GruHeadModel::custom(3, 2, 0.1, 0.2, 1);
  const TrainConfig cfg = quick_config();
  EXPECT_EQ(code_of([&] { train(model, {}, good, cfg); }), ErrorCode::EmptyDataset);
  EXPECT_EQ(code_of([&] { train(model, good, {}, cfg); }), ErrorCode::EmptyDataset);
  EXPECT_EQ(code_of([&] { evaluate(model, {}); }), ErrorCode::EmptyDataset);

  auto wrong_dim = kt::running_mean_task(14, 1, 4);
  EXPECT_EQ(code_of([&] { train(model, wrong_dim, good, cfg); }), ErrorCode::ShapeMismatch);
  auto short_targets = good;
  short_targets[0].targets.pop_back();
  EXPECT_EQ(code_of([&] { train(model, short_targets, good, cfg); }), ErrorCode::LengthMismatch);
  auto bad_target = good;
  bad_target[1].targets[0] = 1.5;
  EXPECT_EQ(code_of([&] { train(model, good, bad_target, cfg); }), ErrorCode::InvalidArgument);

  auto c = cfg;
  c.learning_rate = 0.0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidArgument);
  c = cfg;
  c.early_stop_patience = 0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidArgument);
  c = cfg;
  c.weight_decay = -1.0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidArgument);
  c = cfg;
  c.momentum = 1.0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidArgument);
}
