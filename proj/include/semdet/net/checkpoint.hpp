#pragma once

#include "semdet/net/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace semdet::net {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    ModelConfig model;
    int epoch = 0;
    std::string dataset_id;
    std::uint64_t seed = 0;
    double input_mean = 0.0;  // normalization the weights were trained with
    double input_std = 1.0;
    nlohmann::json extra = nlohmann::json::object();
};

/// Layout: "SEMDETCK" | u32 version | u64 meta length | meta JSON |
/// u32 parameter count | per parameter (u32 name length, name, u32 rank,
/// u32 dims..., little-endian f32 values) | u32 CRC-32 of all preceding bytes.
void save_checkpoint(const Network<float>& model, const CheckpointMeta& meta, const std::filesystem::path& path);

struct LoadedCheckpoint {
    Network<float> model;
    CheckpointMeta meta;
};

/// Throws VersionMismatch, CorruptCheckpoint (bad magic, checksum or
/// structure) or IoFailure.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

struct RemapReport {
    std::vector<std::string> copied;
    std::vector<std::string> reinitialized;
};

/// Loads weights into a freshly initialized network of `target`: parameters
/// whose name and shape match are copied, the rest keep their fresh values.
Network<float> load_checkpoint_into(const std::filesystem::path& path, const ModelConfig& target,
                                    std::uint64_t init_seed, RemapReport* report = nullptr,
                                    CheckpointMeta* meta = nullptr);

nlohmann::json to_json(const CheckpointMeta& meta);
CheckpointMeta checkpoint_meta_from_json(const nlohmann::json& j);

} // namespace semdet::net
