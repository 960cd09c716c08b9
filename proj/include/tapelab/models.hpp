#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tapelab/nn.hpp"
#include "tapelab/profile.hpp"
#include "tapelab/svd.hpp"

namespace tapelab {

enum class Architecture { kRrae, kExtended, kClassicalAe, kEncDec };
std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& text);

/// How the class head is supervised: one-hot scores (argmax) or a scalar class index.
enum class ClassTarget { kOneHot, kIndex };
std::string to_string(ClassTarget target);
ClassTarget parse_class_target(const std::string& text);

/// Layer sizes shared by every architecture.
struct ArchitectureConfig {
  Eigen::Index input_length = 500;
  Eigen::Index latent_dim = 64;
  Eigen::Index conv1_channels = 8;
  Eigen::Index conv2_channels = 32;
  Eigen::Index kernel1 = 5;  // odd; "same" padding
  Eigen::Index kernel2 = 3;
  Eigen::Index pool1 = 4;    // max pool after the first convolution
  Eigen::Index pool2 = 125;  // covers the whole remaining feature map
  bool mean_pool2 = true;    // average instead of max in the second pool
  Eigen::Index head_layers = 6;  // dense layers per head, output layer included
  Eigen::Index classes = 12;
  Eigen::Index horizon = 352;
  Eigen::Index dic_latent_dim = 64;  // extended model, M2
  Eigen::Index dic_hidden_layers = 2;
  Eigen::Index encdec_gamma = 6;
  Eigen::Index encdec_hidden = 64;
  double encdec_dropout = 0.1;

  /// 1000-point input, 200-dimensional latent space, 16/32 filters, pooling by 2.
  static ArchitectureConfig paper_scale();
};

namespace specs {
/// conv+relu+pool twice ("same" padding), dense -> latent.
nn::NetworkSpec encoder(const ArchitectureConfig& a);
/// dense+relu, dense+relu, reshape, transposed conv x2 back to the input length.
/// Needs input_length % (pool1 * pool2) == 0.
nn::NetworkSpec decoder(const ArchitectureConfig& a);
/// (head_layers - 1) x [dense(latent)+relu], then dense(outputs) and `final`.
nn::NetworkSpec head(const ArchitectureConfig& a, Eigen::Index outputs, nn::Activation final);
/// Bias-free dense(k) then dense(latent): the classical autoencoder bottleneck.
nn::NetworkSpec bottleneck(const ArchitectureConfig& a, Eigen::Index k);
/// MLP from a DIC curve to the M2 latent space.
nn::NetworkSpec dic_encoder(const ArchitectureConfig& a);
/// MLP from the M2 latent space to a sigmoid-bounded DIC curve.
nn::NetworkSpec dic_decoder(const ArchitectureConfig& a);
/// Supervised profile -> DIC network with a gamma-wide bottleneck. Needs horizon % 16 == 0.
nn::NetworkSpec encdec(const ArchitectureConfig& a);
}  // namespace specs

/// Output of any model on a batch (columns are samples). Fields a model does not
/// produce are left empty.
struct Prediction {
  Eigen::MatrixXd latent;          // d x n, after truncation or bottleneck
  Eigen::MatrixXd coefficients;    // alpha, k x n
  Eigen::MatrixXd reconstruction;  // standardized profile, N x n
  Eigen::MatrixXd class_scores;    // C x n (or 1 x n for index targets)
  std::vector<int> classes;        // 1-based
  Eigen::MatrixXd beta;            // r x n
  Eigen::MatrixXd dic;             // M x n
  Eigen::MatrixXd dic_star;        // M2 reconstruction of the target curve, M x n
};

/// RRAE, or the classical autoencoder when `bottleneck` is set.
struct RraeModel {
  ArchitectureConfig arch;
  Eigen::Index k_max = 5;
  ClassTarget class_target = ClassTarget::kOneHot;
  nn::Network encoder;
  nn::Network decoder;
  nn::Network classifier;
  nn::Network dic_head;  // DIC curve (sigmoid) or, inside ExtendedModel, beta (linear)
  std::optional<nn::Network> bottleneck;
  LatentBasis<double> basis;  // frozen after training; empty for the classical AE

  Eigen::Index parameter_count() const;
};

/// M2: DIC autoencoder whose latent batch is truncated to rank r_max.
struct DicAutoencoder {
  Eigen::Index r_max = 3;
  nn::Network encoder;
  nn::Network decoder;
  LatentBasis<double> basis;  // V

  Eigen::Index parameter_count() const;
};

struct ExtendedModel {
  RraeModel m1;
  DicAutoencoder m2;

  Eigen::Index parameter_count() const;
};

struct EncDecModel {
  ArchitectureConfig arch;
  nn::Network net;

  Eigen::Index parameter_count() const;
};

using AnyModel = std::variant<RraeModel, ExtendedModel, EncDecModel>;

/// Networks built from the architecture, initialized from `seed`.
RraeModel make_rrae(const ArchitectureConfig& arch, Eigen::Index k_max, ClassTarget target,
                    bool classical, std::uint64_t seed);
DicAutoencoder make_dic_autoencoder(const ArchitectureConfig& arch, Eigen::Index r_max,
                                    std::uint64_t seed);
ExtendedModel make_extended(const ArchitectureConfig& arch, Eigen::Index k_max,
                            Eigen::Index r_max, ClassTarget target, std::uint64_t seed);
EncDecModel make_encdec(const ArchitectureConfig& arch, std::uint64_t seed);

/// Decodes class scores into 1-based labels.
std::vector<int> decode_classes(const Eigen::MatrixXd& scores, ClassTarget target,
                                Eigen::Index classes);

/// y = encoder(x), d_l x n.
Eigen::MatrixXd encode(const RraeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs);

/// Inference on standardized inputs (N x n) using the frozen bases. Batches are cut into
/// fixed-size chunks so the result does not depend on `jobs`.
Prediction predict(const RraeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                   unsigned jobs = 1);
Prediction predict(const ExtendedModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                   unsigned jobs = 1);
Prediction predict(const EncDecModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                   unsigned jobs = 1);
Prediction predict(const AnyModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                   unsigned jobs = 1);

/// M2 reconstruction of DIC curves (M x n) through the frozen basis V.
Eigen::MatrixXd reconstruct_dic(const DicAutoencoder& m2,
                                const Eigen::Ref<const Eigen::MatrixXd>& curves);

}  // namespace tapelab
