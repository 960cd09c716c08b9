#pragma once

#include <json.hpp>

#include "tapelab/models.hpp"
#include "tapelab/nn.hpp"
#include "tapelab/optimizer.hpp"
#include "tapelab/profile.hpp"
#include "tapelab/training.hpp"

// nlohmann::json conversions. Readers start from the target's current value and override
// only the keys present, so a partial object layers on top of defaults. Unknown keys are
// rejected with InvalidArgument.

namespace tapelab::nn {
void to_json(nlohmann::json& j, const Shape& s);
void from_json(const nlohmann::json& j, Shape& s);
void to_json(nlohmann::json& j, const LayerSpec& layer);
void from_json(const nlohmann::json& j, LayerSpec& layer);
void to_json(nlohmann::json& j, const NetworkSpec& spec);
void from_json(const nlohmann::json& j, NetworkSpec& spec);
}  // namespace tapelab::nn

namespace tapelab {
void to_json(nlohmann::json& j, const ArchitectureConfig& a);
void from_json(const nlohmann::json& j, ArchitectureConfig& a);
void to_json(nlohmann::json& j, const OptimizerConfig& o);
void from_json(const nlohmann::json& j, OptimizerConfig& o);
void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const ExtendedWeights& w);
void from_json(const nlohmann::json& j, ExtendedWeights& w);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const PopulationStats& s);
void from_json(const nlohmann::json& j, PopulationStats& s);

/// Throws InvalidArgument naming the first key of `j` that is not in `allowed`.
void require_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                  std::string_view what);
}  // namespace tapelab
