#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedgansim/mlp.hpp"
#include "fedgansim/tensor.hpp"

namespace fedgan::gan {

// "FGS1" container, the on-disk float format:
//
//   bytes 0..3   magic "FGS1"
//   bytes 4..7   uint32, little endian: header length H
//   bytes 8..8+H UTF-8 JSON header; must carry "count" (payload length)
//   then         count * 8 bytes of IEEE-754 float64, little endian
//
// The header's "kind" field says what the payload is ("params", "samples",
// "dataset"); type-specific fields live next to it.

void write_blob(const std::filesystem::path& path, nlohmann::json header,
                std::span<const double> payload);

struct Blob {
  nlohmann::json header;
  std::vector<double> payload;
};

Blob read_blob(const std::filesystem::path& path);

nlohmann::json spec_to_json(const MlpSpec& spec);
MlpSpec spec_from_json(const nlohmann::json& j);

void save_params(const std::filesystem::path& path, const MlpSpec& spec,
                 const ParamVector& params, std::uint64_t step);
std::pair<MlpSpec, ParamVector> load_params(const std::filesystem::path& path);

void save_samples(const std::filesystem::path& path, const ad::Tensor& samples);
ad::Tensor load_samples(const std::filesystem::path& path);

}  // namespace fedgan::gan
