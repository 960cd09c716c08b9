#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tapelab/dataset.hpp"
#include "tapelab/models.hpp"
#include "tapelab/optimizer.hpp"

namespace tapelab {

struct LossWeights {
  double recon = 1.0;
  double classification = 1.0;
  double dic = 1.0;
};

/// Weights of the extended model's four terms.
struct ExtendedWeights {
  double classification = 2.0;  // L1
  double recon = 1.0;           // L2
  double dic_star = 1.0;        // L3, M2 reconstruction of the target curve
  double dic_pred = 2.0;        // L4, DIC decoded from the predicted beta
};

struct TrainConfig {
  Architecture arch = Architecture::kRrae;
  ArchitectureConfig net;
  Eigen::Index k_max = 5;
  Eigen::Index r_max = 3;
  ClassTarget class_target = ClassTarget::kOneHot;
  LossWeights weights;
  ExtendedWeights extended_weights;
  OptimizerConfig optimizer;
  int epochs = 6000;
  int m2_epochs = 0;  // M2 pre-training; 0 means `epochs`
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
};

/// Values of the named loss terms (weighted sum in `total`).
struct LossTerms {
  std::vector<std::string> names;
  std::vector<double> values;
  double total = 0.0;
};

/// Loss plus one gradient vector per network, in the model's network order.
struct Objective {
  LossTerms loss;
  std::vector<Eigen::VectorXd> gradients;
};

struct LossHistory {
  std::vector<std::string> names;
  std::vector<int> epochs;
  std::vector<double> totals;
  std::vector<std::vector<double>> terms;  // terms[i][j]: term j at record i

  std::size_t size() const { return totals.size(); }
};

/// Targets in network layout: inputs (N x n), class targets (C x n or 1 x n), DIC (M x n).
struct Targets {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd classes;
  Eigen::MatrixXd dic;
};

Targets make_targets(const SampleSet& samples, ClassTarget target, Eigen::Index classes);

/// Network order: encoder, decoder, classifier, dic head[, bottleneck].
std::vector<nn::Network*> networks(RraeModel& model);
/// Network order: m1 encoder, decoder, classifier, beta head, m2 encoder, m2 decoder.
std::vector<nn::Network*> networks(ExtendedModel& model);
std::vector<nn::Network*> networks(DicAutoencoder& model);
std::vector<nn::Network*> networks(EncDecModel& model);

/// Full-batch RRAE / classical AE objective. The latent basis is recomputed from the
/// batch unless `fixed_basis` is given; either way U is a constant for the gradient.
Objective rrae_objective(const RraeModel& model, const Targets& targets, const LossWeights& weights,
                         const LatentBasis<double>* fixed_basis = nullptr);

/// M2 objective on DIC curves (M x n), same truncation contract with rank r_max.
Objective dic_autoencoder_objective(const DicAutoencoder& model, const Eigen::MatrixXd& curves,
                                    const LatentBasis<double>* fixed_basis = nullptr);

/// Joint objective of the extended model; M2's basis V is taken from the model.
Objective extended_objective(const ExtendedModel& model, const Targets& targets,
                             const ExtendedWeights& weights,
                             const LatentBasis<double>* fixed_basis = nullptr);

/// Supervised profile -> DIC objective; dropout masks are drawn from `dropout_seed`
/// when `training` is set.
Objective encdec_objective(const EncDecModel& model, const Targets& targets, bool training,
                           std::uint64_t dropout_seed);

using ProgressFn = std::function<void(std::string_view phase, int epoch, const LossTerms& loss)>;

RraeModel train_rrae(const SampleSet& train, const TrainConfig& config,
                     LossHistory* history = nullptr, const ProgressFn& progress = {});
RraeModel train_classical_ae(const SampleSet& train, const TrainConfig& config,
                             LossHistory* history = nullptr, const ProgressFn& progress = {});
/// Trains M2 alone on `curves` (M x n) and fixes its basis V.
DicAutoencoder train_dic_autoencoder(const Eigen::MatrixXd& curves, const TrainConfig& config,
                                     LossHistory* history = nullptr,
                                     const ProgressFn& progress = {});
/// Pre-trains M2, fixes V, then trains M1 and M2 jointly on the four-term loss.
/// `m2_pretrained` receives M2 as it was before the joint phase.
ExtendedModel train_extended(const SampleSet& train, const TrainConfig& config,
                             LossHistory* m2_history = nullptr, LossHistory* history = nullptr,
                             const ProgressFn& progress = {},
                             DicAutoencoder* m2_pretrained = nullptr);
EncDecModel train_supervised_encdec(const SampleSet& train, const TrainConfig& config,
                                    LossHistory* history = nullptr,
                                    const ProgressFn& progress = {});

struct TrainResult {
  AnyModel model;
  LossHistory history;
  LossHistory m2_history;  // extended model only
  std::optional<DicAutoencoder> m2_pretrained;  // extended model only
  Prediction final_pass;   // predict() on the training inputs after freezing
};

/// Dispatches on config.arch.
TrainResult train(const SampleSet& train, const TrainConfig& config,
                  const ProgressFn& progress = {});

}  // namespace tapelab
