#pragma once

#include <cstdint>
#include <filesystem>

#include "ser/config.hpp"
#include "ser/model.hpp"

namespace ser {

struct Checkpoint {
    RunConfig config;  // echo of the training configuration
    DataDims dims;
    std::uint64_t vocab_hash = 0;
    ModelParams params;
};

// Self-describing container: 8-byte magic "SERCKPT1", little-endian u64
// header length, JSON header (config echo, data dims, vocabulary hash, tensor
// directory), then the named tensors' doubles in directory order,
// little-endian. Loading verifies the tensor set against the config echo.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const RunConfig& config, std::uint64_t vocab_hash);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ser
