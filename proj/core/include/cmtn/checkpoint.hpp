#pragma once

#include <string>

#include "cmtn/model.hpp"

namespace cmtn {

// Text container: model config, an optional opaque training-config block,
// then every parameter tensor as hexfloats, so round-trips reproduce values
// bit for bit.
void save_checkpoint(const std::string& path, const CmtnParams& params, const ModelConfig& cfg,
                     const std::string& training_config_text = "");

struct LoadedCheckpoint {
    CmtnParams params;
    ModelConfig config;
    std::string training_config_text;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace cmtn
