#include "tapelab/models.hpp"

#include <algorithm>
#include <cmath>

#include "tapelab/parallel.hpp"

namespace tapelab {
namespace {

using nn::Act;
using nn::Activation;
using nn::Conv1d;
using nn::ConvTranspose1d;
using nn::Dense;
using nn::Dropout;
using nn::LayerSpec;
using nn::MaxPool1d;
using nn::NetworkSpec;
using nn::Reshape;
using nn::Shape;

constexpr Eigen::Index kChunk = 64;

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

nn::Network build(NetworkSpec spec, std::uint64_t seed, Shape expected, const char* what) {
  nn::Network net(std::move(spec));
  if (net.output_shape().size() != expected.size())
    throw ShapeError(std::string(what) + ": output size " +
                     std::to_string(net.output_shape().size()) + ", expected " +
                     std::to_string(expected.size()));
  net.initialize(seed);
  return net;
}

/// Applies `fn(block_in) -> Prediction` to fixed-size column chunks and stitches the
/// fields back together.
template <typename Fn>
Prediction chunked(const Eigen::Ref<const Eigen::MatrixXd>& inputs, unsigned jobs, Fn&& fn) {
  const Eigen::Index n = inputs.cols();
  const auto chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
  std::vector<Prediction> parts(chunks);
  parallel_for(chunks, jobs, [&](std::size_t c) {
    const Eigen::Index start = static_cast<Eigen::Index>(c) * kChunk;
    parts[c] = fn(inputs.middleCols(start, std::min(kChunk, n - start)));
  });
  Prediction out;
  auto stitch = [&](auto member) {
    Eigen::Index rows = 0;
    for (const auto& p : parts) rows = std::max(rows, (p.*member).rows());
    if (rows == 0) return;
    Eigen::MatrixXd& dst = out.*member;
    dst.resize(rows, n);
    Eigen::Index col = 0;
    for (const auto& p : parts) {
      dst.middleCols(col, (p.*member).cols()) = p.*member;
      col += (p.*member).cols();
    }
  };
  stitch(&Prediction::latent);
  stitch(&Prediction::coefficients);
  stitch(&Prediction::reconstruction);
  stitch(&Prediction::class_scores);
  stitch(&Prediction::beta);
  stitch(&Prediction::dic);
  stitch(&Prediction::dic_star);
  for (auto& p : parts) out.classes.insert(out.classes.end(), p.classes.begin(), p.classes.end());
  return out;
}

void check_inputs(const Eigen::Ref<const Eigen::MatrixXd>& inputs, Eigen::Index length) {
  if (inputs.rows() != length)
    throw ShapeError("model expects profiles of " + std::to_string(length) + " points, got " +
                     std::to_string(inputs.rows()));
}

}  // namespace

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kRrae: return "rrae";
    case Architecture::kExtended: return "extended";
    case Architecture::kClassicalAe: return "ae";
    case Architecture::kEncDec: return "encdec";
  }
  return "rrae";
}

Architecture parse_architecture(const std::string& text) {
  if (text == "rrae") return Architecture::kRrae;
  if (text == "extended") return Architecture::kExtended;
  if (text == "ae") return Architecture::kClassicalAe;
  if (text == "encdec") return Architecture::kEncDec;
  throw InvalidArgument("unknown architecture '" + text + "' (expected rrae, extended, ae or encdec)");
}

std::string to_string(ClassTarget target) {
  return target == ClassTarget::kOneHot ? "onehot" : "index";
}

ClassTarget parse_class_target(const std::string& text) {
  if (text == "onehot") return ClassTarget::kOneHot;
  if (text == "index") return ClassTarget::kIndex;
  throw InvalidArgument("unknown class target '" + text + "' (expected onehot or index)");
}

ArchitectureConfig ArchitectureConfig::paper_scale() {
  ArchitectureConfig a;
  a.input_length = 1000;
  a.latent_dim = 200;
  a.conv1_channels = 16;
  a.conv2_channels = 32;
  a.dic_latent_dim = 200;
  a.pool1 = 2;
  a.pool2 = 2;
  a.mean_pool2 = false;
  return a;
}

namespace specs {

NetworkSpec encoder(const ArchitectureConfig& a) {
  if (a.kernel1 % 2 == 0 || a.kernel2 % 2 == 0)
    throw ShapeError("encoder: convolution kernels must be odd");
  const LayerSpec pool2 = a.mean_pool2 ? LayerSpec{nn::AvgPool1d{a.pool2}} : MaxPool1d{a.pool2};
  return {Shape{1, a.input_length},
          {Conv1d{a.conv1_channels, a.kernel1, 1, a.kernel1 / 2}, Act{Activation::kRelu},
           MaxPool1d{a.pool1}, Conv1d{a.conv2_channels, a.kernel2, 1, a.kernel2 / 2},
           Act{Activation::kRelu}, pool2,
           Dense{a.latent_dim}}};
}

namespace {
// Upsamples by exactly `stride`: overlapping taps for even strides, disjoint otherwise.
ConvTranspose1d upsample(Eigen::Index channels, Eigen::Index stride) {
  if (stride % 2 == 0) return {channels, 2 * stride, stride, stride / 2};
  return {channels, stride, stride, 0};
}
}  // namespace

NetworkSpec decoder(const ArchitectureConfig& a) {
  const Eigen::Index reduction = a.pool1 * a.pool2;
  if (a.pool1 < 1 || a.pool2 < 1 || a.input_length % reduction != 0)
    throw ShapeError("decoder: input length " + std::to_string(a.input_length) +
                     " is not a multiple of the pooling factor " + std::to_string(reduction));
  return {Shape{1, a.latent_dim},
          {Dense{a.latent_dim}, Act{Activation::kRelu},
           Dense{a.conv2_channels * (a.input_length / reduction)}, Act{Activation::kRelu},
           Reshape{a.conv2_channels}, upsample(a.conv1_channels, a.pool2),
           Act{Activation::kRelu}, upsample(1, a.pool1)}};
}

NetworkSpec head(const ArchitectureConfig& a, Eigen::Index outputs, Activation final) {
  NetworkSpec spec{Shape{1, a.latent_dim}, {}};
  for (Eigen::Index i = 0; i + 1 < a.head_layers; ++i) {
    spec.layers.emplace_back(Dense{a.latent_dim});
    spec.layers.emplace_back(Act{Activation::kRelu});
  }
  spec.layers.emplace_back(Dense{outputs});
  if (final != Activation::kNone) spec.layers.emplace_back(Act{final});
  return spec;
}

NetworkSpec bottleneck(const ArchitectureConfig& a, Eigen::Index k) {
  return {Shape{1, a.latent_dim}, {Dense{k, false}, Dense{a.latent_dim, false}}};
}

NetworkSpec dic_encoder(const ArchitectureConfig& a) {
  NetworkSpec spec{Shape{1, a.horizon}, {}};
  for (Eigen::Index i = 0; i < a.dic_hidden_layers; ++i) {
    spec.layers.emplace_back(Dense{a.dic_latent_dim});
    spec.layers.emplace_back(Act{Activation::kRelu});
  }
  spec.layers.emplace_back(Dense{a.dic_latent_dim});
  return spec;
}

NetworkSpec dic_decoder(const ArchitectureConfig& a) {
  NetworkSpec spec{Shape{1, a.dic_latent_dim}, {}};
  for (Eigen::Index i = 0; i < a.dic_hidden_layers; ++i) {
    spec.layers.emplace_back(Dense{a.dic_latent_dim});
    spec.layers.emplace_back(Act{Activation::kRelu});
  }
  spec.layers.emplace_back(Dense{a.horizon});
  spec.layers.emplace_back(Act{Activation::kSigmoid});
  return spec;
}

NetworkSpec encdec(const ArchitectureConfig& a) {
  if (a.horizon % 16 != 0)
    throw ShapeError("encdec: horizon " + std::to_string(a.horizon) + " is not a multiple of 16");
  const Eigen::Index seed_length = a.horizon / 16;
  return {Shape{1, a.input_length},
          {Conv1d{4, 9, 3, 0}, Act{Activation::kRelu}, MaxPool1d{2}, Dropout{a.encdec_dropout},
           Conv1d{8, 9, 3, 0}, Act{Activation::kRelu}, MaxPool1d{2}, Dropout{a.encdec_dropout},
           Dense{a.encdec_hidden}, Act{Activation::kRelu}, Dense{a.encdec_gamma}, Dense{8 * seed_length},
           Act{Activation::kRelu}, Reshape{8}, ConvTranspose1d{4, 4, 4, 0},
           Act{Activation::kRelu}, ConvTranspose1d{1, 4, 4, 0}, Act{Activation::kSigmoid}}};
}

}  // namespace specs

Eigen::Index RraeModel::parameter_count() const {
  return encoder.parameter_count() + decoder.parameter_count() + classifier.parameter_count() +
         dic_head.parameter_count() + (bottleneck ? bottleneck->parameter_count() : 0);
}

Eigen::Index DicAutoencoder::parameter_count() const {
  return encoder.parameter_count() + decoder.parameter_count();
}

Eigen::Index ExtendedModel::parameter_count() const {
  return m1.parameter_count() + m2.parameter_count();
}

Eigen::Index EncDecModel::parameter_count() const { return net.parameter_count(); }

RraeModel make_rrae(const ArchitectureConfig& arch, Eigen::Index k_max, ClassTarget target,
                    bool classical, std::uint64_t seed) {
  if (k_max < 1 || k_max > arch.latent_dim)
    throw InvalidArgument("k_max " + std::to_string(k_max) + " outside [1, " +
                          std::to_string(arch.latent_dim) + "]");
  RraeModel m;
  m.arch = arch;
  m.k_max = k_max;
  m.class_target = target;
  const Eigen::Index class_outputs = target == ClassTarget::kOneHot ? arch.classes : 1;
  m.encoder = build(specs::encoder(arch), sub_seed(seed, 1), Shape{1, arch.latent_dim}, "encoder");
  m.decoder = build(specs::decoder(arch), sub_seed(seed, 2), Shape{1, arch.input_length}, "decoder");
  m.classifier = build(specs::head(arch, class_outputs, Activation::kNone), sub_seed(seed, 3),
                       Shape{1, class_outputs}, "classifier");
  m.dic_head = build(specs::head(arch, arch.horizon, Activation::kSigmoid), sub_seed(seed, 4),
                     Shape{1, arch.horizon}, "dic head");
  if (classical)
    m.bottleneck = build(specs::bottleneck(arch, k_max), sub_seed(seed, 5),
                         Shape{1, arch.latent_dim}, "bottleneck");
  return m;
}

DicAutoencoder make_dic_autoencoder(const ArchitectureConfig& arch, Eigen::Index r_max,
                                    std::uint64_t seed) {
  if (r_max < 1 || r_max > arch.dic_latent_dim)
    throw InvalidArgument("r_max " + std::to_string(r_max) + " outside [1, " +
                          std::to_string(arch.dic_latent_dim) + "]");
  DicAutoencoder m;
  m.r_max = r_max;
  m.encoder = build(specs::dic_encoder(arch), sub_seed(seed, 11), Shape{1, arch.dic_latent_dim},
                    "dic encoder");
  m.decoder = build(specs::dic_decoder(arch), sub_seed(seed, 12), Shape{1, arch.horizon},
                    "dic decoder");
  return m;
}

ExtendedModel make_extended(const ArchitectureConfig& arch, Eigen::Index k_max,
                            Eigen::Index r_max, ClassTarget target, std::uint64_t seed) {
  ExtendedModel m;
  m.m1 = make_rrae(arch, k_max, target, false, seed);
  m.m1.dic_head = build(specs::head(arch, r_max, Activation::kNone), sub_seed(seed, 6),
                        Shape{1, r_max}, "beta head");
  m.m2 = make_dic_autoencoder(arch, r_max, seed);
  return m;
}

EncDecModel make_encdec(const ArchitectureConfig& arch, std::uint64_t seed) {
  EncDecModel m;
  m.arch = arch;
  m.net = build(specs::encdec(arch), sub_seed(seed, 21), Shape{1, arch.horizon}, "encdec");
  return m;
}

std::vector<int> decode_classes(const Eigen::MatrixXd& scores, ClassTarget target,
                                Eigen::Index classes) {
  std::vector<int> out(static_cast<std::size_t>(scores.cols()));
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    if (target == ClassTarget::kOneHot) {
      Eigen::Index best = 0;
      scores.col(j).maxCoeff(&best);
      out[static_cast<std::size_t>(j)] = static_cast<int>(best) + 1;
    } else {
      const double v = std::isfinite(scores(0, j)) ? std::round(scores(0, j)) : 1.0;
      out[static_cast<std::size_t>(j)] =
          static_cast<int>(std::clamp(v, 1.0, static_cast<double>(classes)));
    }
  }
  return out;
}

Eigen::MatrixXd encode(const RraeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  check_inputs(inputs, model.arch.input_length);
  return model.encoder.forward(inputs);
}

Prediction predict(const RraeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                   unsigned jobs) {
  check_inputs(inputs, model.arch.input_length);
  if (!model.bottleneck && model.basis.empty())
    throw InvalidArgument("predict: model has no frozen latent basis");
  return chunked(inputs, jobs, [&](const Eigen::Ref<const Eigen::MatrixXd>& x) {
    Prediction p;
    const Eigen::MatrixXd y = model.encoder.forward(x);
    if (model.bottleneck) {
      nn::Tape tape;
      p.latent = model.bottleneck->forward(y, &tape);
      p.coefficients = tape.layers[1].input;
    } else {
      p.coefficients = model.basis.coefficients(y);
      p.latent = model.basis.modes * p.coefficients;
    }
    p.reconstruction = model.decoder.forward(p.latent);
    p.class_scores = model.classifier.forward(p.latent);
    p.classes = decode_classes(p.class_scores, model.class_target, model.arch.classes);
    p.dic = model.dic_head.forward(p.latent);
    return p;
  });
}

Prediction predict(const ExtendedModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                   unsigned jobs) {
  check_inputs(inputs, model.m1.arch.input_length);
  if (model.m1.basis.empty() || model.m2.basis.empty())
    throw InvalidArgument("predict: model has no frozen latent basis");
  return chunked(inputs, jobs, [&](const Eigen::Ref<const Eigen::MatrixXd>& x) {
    Prediction p;
    const Eigen::MatrixXd y = model.m1.encoder.forward(x);
    p.coefficients = model.m1.basis.coefficients(y);
    p.latent = model.m1.basis.modes * p.coefficients;
    p.reconstruction = model.m1.decoder.forward(p.latent);
    p.class_scores = model.m1.classifier.forward(p.latent);
    p.classes = decode_classes(p.class_scores, model.m1.class_target, model.m1.arch.classes);
    p.beta = model.m1.dic_head.forward(p.latent);
    p.dic = model.m2.decoder.forward(model.m2.basis.modes * p.beta);
    return p;
  });
}

Prediction predict(const EncDecModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                   unsigned jobs) {
  check_inputs(inputs, model.arch.input_length);
  return chunked(inputs, jobs, [&](const Eigen::Ref<const Eigen::MatrixXd>& x) {
    Prediction p;
    p.dic = model.net.forward(x);
    return p;
  });
}

Prediction predict(const AnyModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                   unsigned jobs) {
  return std::visit([&](const auto& m) { return predict(m, inputs, jobs); }, model);
}

Eigen::MatrixXd reconstruct_dic(const DicAutoencoder& m2,
                                const Eigen::Ref<const Eigen::MatrixXd>& curves) {
  if (m2.basis.empty()) throw InvalidArgument("reconstruct_dic: M2 basis not fixed");
  const Eigen::MatrixXd y = m2.encoder.forward(curves);
  return m2.decoder.forward(m2.basis.project(y));
}

}  // namespace tapelab
