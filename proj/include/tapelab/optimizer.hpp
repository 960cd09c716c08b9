#pragma once

#include <Eigen/Core>

#include <string>

namespace tapelab {

enum class OptimizerKind { kGradientDescent, kMomentum, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& text);

/// Step schedule: lr * decay^floor(epoch / decay_every).
struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kGradientDescent;
  double learning_rate = 1e-3;
  int decay_every = 2000;  // <= 0 disables the schedule
  double decay = 0.1;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  double rate(int epoch) const;
};

/// Updates one flat parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, Eigen::Index size);

  void step(Eigen::Ref<Eigen::VectorXd> parameters, const Eigen::Ref<const Eigen::VectorXd>& gradient,
            int epoch);

 private:
  OptimizerConfig config_;
  Eigen::VectorXd first_;
  Eigen::VectorXd second_;
  long steps_ = 0;
};

}  // namespace tapelab
