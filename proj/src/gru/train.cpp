#include <cmath>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

#include "keyframe/gru.hpp"

namespace keyframe::gru {
namespace {

void check_pairs(const GruHeadModel& model, std::span<const TrainingPair> set, const char* name) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& p = set[i];
    const std::string where = std::string(name) + " sequence " + std::to_string(i);
    if (p.features.steps == 0) throw Error(ErrorCode::EmptySequence, where + " is empty");
    if (p.features.dim != model.input_dim() || p.features.values.size() != p.features.steps * p.features.dim) {
      throw Error(ErrorCode::ShapeMismatch, where + " has feature dimension " + std::to_string(p.features.dim));
    }
    if (p.targets.size() != p.features.steps) {
      throw Error(ErrorCode::LengthMismatch, where + ": " + std::to_string(p.targets.size()) + " targets for " +
                                                 std::to_string(p.features.steps) + " frames");
    }
    for (double t : p.targets) {
      if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidArgument, where + " has a target outside [0,1]");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw Error(ErrorCode::InvalidArgument, "weight_decay must be non-negative");
  }
  if (max_epochs == 0) throw Error(ErrorCode::InvalidArgument, "max_epochs must be positive");
  if (early_stop_patience == 0 || early_stop_patience > max_epochs) {
    throw Error(ErrorCode::InvalidArgument, "early_stop_patience must be in [1, max_epochs]");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::InvalidArgument, "momentum must be in [0,1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) ||
      !(adam_epsilon > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "Adam hyper-parameters out of range");
  }
}

std::string_view to_string(StopReason r) noexcept {
  return r == StopReason::EarlyStop ? "early_stop" : "max_epochs";
}

OptimizerState::OptimizerState(const GruHeadModel& model, const TrainConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const bool need_first = cfg_.optimizer == Optimizer::Adam || cfg_.momentum > 0.0;
  const bool need_second = cfg_.optimizer == Optimizer::Adam;
  auto blocks = const_cast<GruHeadModel&>(model).parameter_blocks();
  for (const auto& b : blocks) {
    if (need_first) first_.emplace_back(b.size(), 0.0);
    if (need_second) second_.emplace_back(b.size(), 0.0);
  }
}

void OptimizerState::step(GruHeadModel& model, Gradients& grads) {
  ++steps_;
  auto params = model.parameter_blocks();
  auto gblocks = grads.blocks();
  const double lr = cfg_.learning_rate;
  const double decay = 1.0 - lr * cfg_.weight_decay;
  const bool decays = cfg_.weight_decay != 0.0;

  if (cfg_.optimizer == Optimizer::Sgd) {
    for (std::size_t b = 0; b < params.size(); ++b) {
      auto& p = params[b];
      const auto& g = gblocks[b];
      if (cfg_.momentum > 0.0) {
        auto& v = first_[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
          v[i] = cfg_.momentum * v[i] + g[i];
          p[i] = (decays ? decay * p[i] : p[i]) - lr * v[i];
        }
      } else {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = (decays ? decay * p[i] : p[i]) - lr * g[i];
      }
    }
    return;
  }

  const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& p = params[b];
    const auto& g = gblocks[b];
    auto& m = first_[b];
    auto& v = second_[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.adam_epsilon);
      p[i] = (decays ? decay * p[i] : p[i]) - lr * update;
    }
  }
}

double evaluate(const GruHeadModel& model, std::span<const TrainingPair> data) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "evaluation set is empty");
  double sum = 0.0;
  for (const auto& p : data) sum += loss(forward(model, p.features, Mode::Inference), p.targets);
  return sum / static_cast<double>(data.size());
}

TrainResult train(GruHeadModel model, std::span<const TrainingPair> train_set, std::span<const TrainingPair> val_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (val_set.empty()) throw Error(ErrorCode::EmptyDataset, "validation set is empty");
  check_pairs(model, train_set, "training");
  check_pairs(model, val_set, "validation");

  OptimizerState opt(model, cfg);
  TrainResult result{model, {}};
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const std::uint64_t epoch_seed = core::mix_seed(cfg.seed, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    core::Rng shuffle(epoch_seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double train_sum = 0.0;
    for (std::size_t s = 0; s < order.size(); ++s) {
      const auto& pair = train_set[order[s]];
      Gradients g = backward(model, pair.features, pair.targets, core::mix_seed(epoch_seed, s + 1));
      train_sum += g.loss;
      opt.step(model, g);
    }
    const double val = evaluate(model, val_set);
    result.history.epochs.push_back({train_sum / static_cast<double>(train_set.size()), val});
    spdlog::debug("epoch {}: train {:.6f} val {:.6f}", epoch + 1, result.history.epochs.back().train_loss, val);

    if (val < best_val) {
      best_val = val;
      result.model = model;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      result.history.stop_reason = StopReason::EarlyStop;
      break;
    }
  }
  return result;
}

}  // namespace keyframe::gru
