#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vser {

enum class Role { teacher, student, square_variant, custom };
enum class Positional { none, image_coordinate };

const char* role_name(Role r);
const char* positional_name(Positional p);

// Full architectural description; both networks and the operation count
// derive from it. Canonical roles pin the reference configuration,
// `custom` allows ablations (e.g. a stem without coordinate channels).
struct ModelSpec {
    Role role = Role::custom;
    int depth = 3;
    int heads = 5;
    int token_dim = 256;
    int head_dim = 64;  // attention inner dim = heads * head_dim
    int patch_h = 128;
    int patch_w = 1;
    bool use_conv_stem = false;
    Positional positional = Positional::none;
    int n_classes = 7;
    int mlp_hidden = 1024;        // transformer block MLP width
    int classifier_hidden = 512;  // classifier MLP width

    static ModelSpec teacher(int depth, int heads, int n_classes);
    static ModelSpec student(int n_classes);
    static ModelSpec square_variant(int n_classes);

    int in_channels() const {
        return 1 + (positional == Positional::image_coordinate ? 2 : 0);
    }
    int patch_dim() const { return in_channels() * patch_h * patch_w; }
    int n_tokens() const;

    void validate() const;  // throws InvalidConfig

    std::string to_text() const;
    static ModelSpec from_text(const std::string& text);

    bool operator==(const ModelSpec&) const = default;
};

// Analytic operation count. A fused multiply-add counts as one operation;
// normalizations, activations and softmax are included.
struct FlopsReport {
    int64_t total = 0;
    std::vector<std::pair<std::string, int64_t>> parts;

    int64_t part(const std::string& name) const;
    std::string to_text() const;  // human-readable table
};

FlopsReport count_flops(const ModelSpec& spec);

}  // namespace vser
