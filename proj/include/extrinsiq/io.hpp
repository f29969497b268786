#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "extrinsiq/calibration.hpp"
#include "extrinsiq/sim.hpp"

namespace extrinsiq {

// JSON text <-> in-memory types. Parse failures throw ParseError, file
// failures IoError. Floats are written in shortest round-trip form.

std::string rig_to_json(const SensorRig& rig);
SensorRig rig_from_json(std::string_view text);

std::string dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(std::string_view text);

/// {"pairs": [...]}; pose is a_from_b (quaternion wxyz, translation xyz).
std::string results_to_json(std::span<const PairCalibration> pairs);
std::vector<PairCalibration> results_from_json(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
/// Overwrites `path`.
void write_text_file(const std::filesystem::path& path, std::string_view text);

SensorRig load_rig(const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
std::vector<PairCalibration> load_results(const std::filesystem::path& path);
void save_results(const std::filesystem::path& path, std::span<const PairCalibration> pairs);

}  // namespace extrinsiq
