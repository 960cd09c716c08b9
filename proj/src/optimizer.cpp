#include "tapelab/optimizer.hpp"

#include <cmath>

#include "tapelab/error.hpp"

namespace tapelab {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kGradientDescent: return "gd";
    case OptimizerKind::kMomentum: return "momentum";
    case OptimizerKind::kAdam: return "adam";
  }
  return "gd";
}

OptimizerKind parse_optimizer(const std::string& text) {
  if (text == "gd") return OptimizerKind::kGradientDescent;
  if (text == "momentum") return OptimizerKind::kMomentum;
  if (text == "adam") return OptimizerKind::kAdam;
  throw InvalidArgument("unknown optimizer '" + text + "' (expected gd, momentum or adam)");
}

double OptimizerConfig::rate(int epoch) const {
  if (decay_every <= 0) return learning_rate;
  return learning_rate * std::pow(decay, epoch / decay_every);
}

Optimizer::Optimizer(OptimizerConfig config, Eigen::Index size) : config_(config) {
  if (!(config_.learning_rate > 0)) throw InvalidArgument("optimizer: learning rate must be positive");
  if (config_.kind != OptimizerKind::kGradientDescent) first_ = Eigen::VectorXd::Zero(size);
  if (config_.kind == OptimizerKind::kAdam) second_ = Eigen::VectorXd::Zero(size);
}

void Optimizer::step(Eigen::Ref<Eigen::VectorXd> parameters,
                     const Eigen::Ref<const Eigen::VectorXd>& gradient, int epoch) {
  const double lr = config_.rate(epoch);
  ++steps_;
  switch (config_.kind) {
    case OptimizerKind::kGradientDescent:
      parameters -= lr * gradient;
      break;
    case OptimizerKind::kMomentum:
      first_ = config_.momentum * first_ + gradient;
      parameters -= lr * first_;
      break;
    case OptimizerKind::kAdam: {
      first_ = config_.beta1 * first_ + (1.0 - config_.beta1) * gradient;
      second_ = config_.beta2 * second_ + (1.0 - config_.beta2) * gradient.cwiseAbs2();
      const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
      parameters.array() -=
          lr * (first_.array() / c1) / ((second_.array() / c2).sqrt() + config_.epsilon);
      break;
    }
  }
}

}  // namespace tapelab
