#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "elicitd/net.hpp"
#include "json.hpp"

namespace elicitd::net {

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

inline constexpr char kParamsMagic[4] = {'E', 'L', 'N', 'D'};
inline constexpr std::uint16_t kParamsVersion = 1;

// "ELND", u16 version, then per tensor: rank u8, dims u32..., f64 values.
// All integers and floats little-endian, values row-major.
std::vector<std::uint8_t> encode_params(const NetworkParams& params);
NetworkParams decode_params(const std::vector<std::uint8_t>& bytes);

void save_params(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_params(const std::filesystem::path& path);

// Throws ShapeError when `params` does not fit `spec`.
void check_params(const NetworkSpec& spec, const NetworkParams& params);

}  // namespace elicitd::net
