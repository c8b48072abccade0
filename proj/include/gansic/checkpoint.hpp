#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "gansic/adam.hpp"
#include "gansic/nn.hpp"

namespace gansic {

// Versioned JSON network snapshots. Doubles rely on the serializer's
// shortest round-trip encoding, so save -> load -> forward is bitwise
// identical to the in-memory network.
inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json network_to_json(const NetworkParams& net);
NetworkParams network_from_json(const nlohmann::json& j);

nlohmann::json adam_to_json(const AdamState& state);
AdamState adam_from_json(const nlohmann::json& j);

// Wraps `body` with {format_version: ...} and writes it; load verifies the
// version tag and returns the document.
void save_checkpoint(const std::filesystem::path& path, nlohmann::json body);
nlohmann::json load_checkpoint(const std::filesystem::path& path);

}  // namespace gansic
