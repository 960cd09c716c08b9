#include "tapelab/serialize.hpp"

#include <string>

namespace tapelab {
namespace {

using nlohmann::json;

template <typename T>
void read(const json& j, const char* key, T& field) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->template get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("'") + key + "': " + e.what());
  }
}

template <typename Enum, typename Parse>
void read_enum(const json& j, const char* key, Enum& field, Parse parse) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_string()) throw InvalidArgument(std::string("'") + key + "' must be a string");
  field = parse(it->template get<std::string>());
}

void require_object(const json& j, std::string_view what) {
  if (!j.is_object()) throw InvalidArgument(std::string(what) + " must be a JSON object");
}

}  // namespace

void require_keys(const json& j, std::initializer_list<std::string_view> allowed,
                  std::string_view what) {
  require_object(j, what);
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) throw InvalidArgument("unknown key '" + key + "' in " + std::string(what));
  }
}

void to_json(json& j, const ArchitectureConfig& a) {
  j = json{{"input_length", a.input_length},     {"latent_dim", a.latent_dim},
           {"conv1_channels", a.conv1_channels}, {"conv2_channels", a.conv2_channels},
           {"kernel1", a.kernel1},               {"kernel2", a.kernel2},
           {"pool1", a.pool1},                   {"pool2", a.pool2}, {"mean_pool2", a.mean_pool2},
           {"head_layers", a.head_layers},       {"classes", a.classes},
           {"horizon", a.horizon},               {"dic_latent_dim", a.dic_latent_dim},
           {"dic_hidden_layers", a.dic_hidden_layers},
           {"encdec_gamma", a.encdec_gamma},     {"encdec_hidden", a.encdec_hidden},
           {"encdec_dropout", a.encdec_dropout}};
}

void from_json(const json& j, ArchitectureConfig& a) {
  require_keys(j,
               {"input_length", "latent_dim", "conv1_channels", "conv2_channels", "kernel1",
                "kernel2", "pool1", "pool2", "mean_pool2",
                "head_layers", "classes", "horizon", "dic_latent_dim", "dic_hidden_layers",
                "encdec_gamma", "encdec_hidden", "encdec_dropout"},
               "architecture");
  read(j, "input_length", a.input_length);
  read(j, "latent_dim", a.latent_dim);
  read(j, "conv1_channels", a.conv1_channels);
  read(j, "conv2_channels", a.conv2_channels);
  read(j, "kernel1", a.kernel1);
  read(j, "kernel2", a.kernel2);
  read(j, "pool1", a.pool1);
  read(j, "pool2", a.pool2);
  read(j, "mean_pool2", a.mean_pool2);
  read(j, "head_layers", a.head_layers);
  read(j, "classes", a.classes);
  read(j, "horizon", a.horizon);
  read(j, "dic_latent_dim", a.dic_latent_dim);
  read(j, "dic_hidden_layers", a.dic_hidden_layers);
  read(j, "encdec_gamma", a.encdec_gamma);
  read(j, "encdec_hidden", a.encdec_hidden);
  read(j, "encdec_dropout", a.encdec_dropout);
}

void to_json(json& j, const OptimizerConfig& o) {
  j = json{{"kind", to_string(o.kind)}, {"learning_rate", o.learning_rate},
           {"decay_every", o.decay_every}, {"decay", o.decay},
           {"momentum", o.momentum},     {"beta1", o.beta1},
           {"beta2", o.beta2},           {"epsilon", o.epsilon}};
}

void from_json(const json& j, OptimizerConfig& o) {
  require_keys(j, {"kind", "learning_rate", "decay_every", "decay", "momentum", "beta1", "beta2",
                   "epsilon"},
               "optimizer");
  read_enum(j, "kind", o.kind, parse_optimizer);
  read(j, "learning_rate", o.learning_rate);
  read(j, "decay_every", o.decay_every);
  read(j, "decay", o.decay);
  read(j, "momentum", o.momentum);
  read(j, "beta1", o.beta1);
  read(j, "beta2", o.beta2);
  read(j, "epsilon", o.epsilon);
}

void to_json(json& j, const LossWeights& w) {
  j = json{{"recon", w.recon}, {"classification", w.classification}, {"dic", w.dic}};
}

void from_json(const json& j, LossWeights& w) {
  require_keys(j, {"recon", "classification", "dic"}, "weights");
  read(j, "recon", w.recon);
  read(j, "classification", w.classification);
  read(j, "dic", w.dic);
}

void to_json(json& j, const ExtendedWeights& w) {
  j = json{{"classification", w.classification},
           {"recon", w.recon},
           {"dic_star", w.dic_star},
           {"dic_pred", w.dic_pred}};
}

void from_json(const json& j, ExtendedWeights& w) {
  require_keys(j, {"classification", "recon", "dic_star", "dic_pred"}, "extended_weights");
  read(j, "classification", w.classification);
  read(j, "recon", w.recon);
  read(j, "dic_star", w.dic_star);
  read(j, "dic_pred", w.dic_pred);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"arch", to_string(c.arch)},
           {"net", c.net},
           {"k_max", c.k_max},
           {"r_max", c.r_max},
           {"class_target", to_string(c.class_target)},
           {"weights", c.weights},
           {"extended_weights", c.extended_weights},
           {"optimizer", c.optimizer},
           {"epochs", c.epochs},
           {"m2_epochs", c.m2_epochs},
           {"test_fraction", c.test_fraction},
           {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  require_keys(j, {"arch", "net", "k_max", "r_max", "class_target", "weights", "extended_weights",
                   "optimizer", "epochs", "m2_epochs", "test_fraction", "seed"},
               "training config");
  read_enum(j, "arch", c.arch, parse_architecture);
  if (j.contains("net")) from_json(j.at("net"), c.net);
  read(j, "k_max", c.k_max);
  read(j, "r_max", c.r_max);
  read_enum(j, "class_target", c.class_target, parse_class_target);
  if (j.contains("weights")) from_json(j.at("weights"), c.weights);
  if (j.contains("extended_weights")) from_json(j.at("extended_weights"), c.extended_weights);
  if (j.contains("optimizer")) from_json(j.at("optimizer"), c.optimizer);
  read(j, "epochs", c.epochs);
  read(j, "m2_epochs", c.m2_epochs);
  read(j, "test_fraction", c.test_fraction);
  read(j, "seed", c.seed);
}

void to_json(json& j, const PopulationStats& s) { j = json{{"mean", s.mean}, {"sigma", s.sigma}}; }

void from_json(const json& j, PopulationStats& s) {
  require_keys(j, {"mean", "sigma"}, "normalization stats");
  read(j, "mean", s.mean);
  read(j, "sigma", s.sigma);
}

}  // namespace tapelab

namespace tapelab::nn {
namespace {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kNone: break;
  }
  return "none";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "none") return Activation::kNone;
  throw InvalidArgument("unknown activation '" + s + "'");
}

Index int_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw InvalidArgument(std::string("layer field '") + key + "' missing or not an integer");
  return j.at(key).get<Index>();
}

}  // namespace

void to_json(nlohmann::json& j, const Shape& s) {
  j = nlohmann::json{{"channels", s.channels}, {"length", s.length}};
}

void from_json(const nlohmann::json& j, Shape& s) {
  s.channels = int_field(j, "channels");
  s.length = int_field(j, "length");
}

void to_json(nlohmann::json& j, const LayerSpec& layer) {
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Conv1d> || std::is_same_v<T, ConvTranspose1d>) {
          j = {{"type", std::is_same_v<T, Conv1d> ? "conv1d" : "conv_transpose1d"},
               {"filters", l.out_channels},
               {"kernel", l.kernel},
               {"stride", l.stride},
               {"padding", l.padding}};
        } else if constexpr (std::is_same_v<T, Dense>) {
          j = {{"type", "dense"}, {"units", l.units}, {"bias", l.bias}};
        } else if constexpr (std::is_same_v<T, MaxPool1d>) {
          j = {{"type", "maxpool1d"}, {"window", l.window}};
        } else if constexpr (std::is_same_v<T, AvgPool1d>) {
          j = {{"type", "avgpool1d"}, {"window", l.window}};
        } else if constexpr (std::is_same_v<T, Act>) {
          j = {{"type", "activation"}, {"fn", activation_name(l.fn)}};
        } else if constexpr (std::is_same_v<T, Dropout>) {
          j = {{"type", "dropout"}, {"rate", l.rate}};
        } else {
          j = {{"type", "reshape"}, {"channels", l.channels}};
        }
      },
      layer);
}

void from_json(const nlohmann::json& j, LayerSpec& layer) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    throw InvalidArgument("layer descriptor without a type");
  const auto type = j.at("type").get<std::string>();
  if (type == "conv1d") {
    layer = Conv1d{int_field(j, "filters"), int_field(j, "kernel"), int_field(j, "stride"),
                   int_field(j, "padding")};
  } else if (type == "conv_transpose1d") {
    layer = ConvTranspose1d{int_field(j, "filters"), int_field(j, "kernel"),
                            int_field(j, "stride"), int_field(j, "padding")};
  } else if (type == "dense") {
    layer = Dense{int_field(j, "units"), j.value("bias", true)};
  } else if (type == "maxpool1d") {
    layer = MaxPool1d{int_field(j, "window")};
  } else if (type == "avgpool1d") {
    layer = AvgPool1d{int_field(j, "window")};
  } else if (type == "activation") {
    layer = Act{parse_activation(j.value("fn", std::string("none")))};
  } else if (type == "dropout") {
    layer = Dropout{j.value("rate", 0.0)};
  } else if (type == "reshape") {
    layer = Reshape{int_field(j, "channels")};
  } else {
    throw InvalidArgument("unknown layer type '" + type + "'");
  }
}

void to_json(nlohmann::json& j, const NetworkSpec& spec) {
  j = nlohmann::json{{"input", spec.input}, {"layers", spec.layers}};
}

void from_json(const nlohmann::json& j, NetworkSpec& spec) {
  if (!j.is_object() || !j.contains("input") || !j.contains("layers") || !j.at("layers").is_array())
    throw InvalidArgument("network spec needs 'input' and 'layers'");
  spec.input = j.at("input").get<Shape>();
  spec.layers = j.at("layers").get<std::vector<LayerSpec>>();
}

}  // namespace tapelab::nn
