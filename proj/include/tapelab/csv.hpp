#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tapelab/compaction.hpp"
#include "tapelab/profile.hpp"

namespace tapelab {

// Profile CSV:  id,label,spacing_um,h_0,...,h_{N-1}
// Micro CSV:    id,label,spacing_um,component,h_0,...,h_{N-1}   (component in {micro, macro})
// DIC CSV:      id,stage,eps_z_um,artifact_value,d_0,...,d_{M-1}
//
// Lines starting with '#' are comments; writers use one to record provenance.
// Numbers are written in shortest round-trip form, so save -> load is exact.

enum class ProfileFileKind { kProfiles, kMicro };

ProfileFileKind detect_profile_file(const std::filesystem::path& path);

std::vector<RoughnessProfile> load_profiles(const std::filesystem::path& path);
void save_profiles(std::span<const RoughnessProfile> profiles, const std::filesystem::path& path,
                   const std::string& provenance = {});

std::vector<MicroProfile> load_micro_profiles(const std::filesystem::path& path);
void save_micro_profiles(std::span<const MicroProfile> profiles,
                         const std::filesystem::path& path, const std::string& provenance = {});

/// Loads micro-roughness from either file kind: micro rows of a micro CSV, or the
/// decomposition of a plain profile CSV (skipped when cutoff_um <= 0).
std::vector<RoughnessProfile> load_micro_heights(const std::filesystem::path& path,
                                                 double cutoff_um);

std::vector<DicCurve> load_dic(const std::filesystem::path& path);
void save_dic(std::span<const DicCurve> curves, const std::filesystem::path& path,
              const std::string& provenance = {});

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

}  // namespace tapelab
