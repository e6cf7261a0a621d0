#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vser/tensor.hpp"

namespace vser {

// Checkpoint container: magic "VSCK", version u16, metadata length u32 +
// UTF-8 text, tensor count u32, then per tensor: name length u16 + name,
// rank u8, dims u32 each, little-endian f32 payload. Round-trips are
// bit-exact.
struct NamedTensorData {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct CheckpointData {
    uint16_t version = 1;
    std::string meta;  // key-value text, e.g. a serialized model spec
    std::vector<NamedTensorData> tensors;

    const NamedTensorData* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path,
                     const CheckpointData& ckpt);
CheckpointData load_checkpoint(const std::filesystem::path& path);

}  // namespace vser
