#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tapelab/models.hpp"
#include "tapelab/profile.hpp"
#include "tapelab/training.hpp"

namespace tapelab {

/// Everything needed to run a trained model on new profiles and to trace where it came from.
struct Checkpoint {
  AnyModel model;
  std::optional<DicAutoencoder> m2_pretrained;  // extended model: M2 before the joint phase
  TrainConfig config;
  PopulationStats stats;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  nlohmann::json provenance = nlohmann::json::object();
};

// File layout: the 8 bytes "TAPELAB1", the header length as a little-endian uint64, the
// UTF-8 JSON header, then every parameter and basis entry as little-endian float64. The
// header lists each network's layer descriptors with per-tensor shapes and blob offsets.

std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Throws InvalidData on a malformed container; `source` names it in messages.
Checkpoint decode_checkpoint(std::string_view bytes, std::string_view source = "checkpoint");

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tapelab
