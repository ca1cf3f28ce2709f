#ifndef KI_CHECKPOINT_HPP
#define KI_CHECKPOINT_HPP

#include <string>

#include "ki/hash.hpp"
#include "ki/model.hpp"

namespace ki {

// KICKPT v1: text header (config + named-tensor index), then a flat
// little-endian float32 blob.
std::string serialize_checkpoint(const ModelConfig& config, const Params<float>& params);

struct Checkpoint {
    ModelConfig config;
    Params<float> params;
    Sha256 hash{};  // sha256 of the serialized bytes
};

Sha256 save_checkpoint(const std::string& path, const ModelConfig& config,
                       const Params<float>& params);
Checkpoint load_checkpoint(const std::string& path);
Checkpoint parse_checkpoint(const std::string& bytes);

}  // namespace ki

#endif
