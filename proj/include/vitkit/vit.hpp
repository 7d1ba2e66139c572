#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vitkit/tensor.hpp"

namespace vitkit {

// Architecture hyperparameters. Every parameter tensor shape is a function
// of this struct alone.
struct ViTConfig {
    std::size_t image_size = 224;  // pixels per side
    std::size_t patch_size = 16;   // pixels per side, must divide image_size
    std::size_t channels = 3;
    std::size_t embed_dim = 768;
    std::size_t depth = 12;
    std::size_t heads = 12;
    double mlp_ratio = 4.0;        // encoder MLP hidden = embed_dim * mlp_ratio
    std::size_t head_hidden = 768; // projector hidden width, 0 = linear head
    std::size_t num_classes = 3;
    double drop_rate = 0.0;

    std::size_t grid() const { return image_size / patch_size; }
    std::size_t num_patches() const { return grid() * grid(); }
    std::size_t tokens() const { return num_patches() + 1; }  // + class token
    std::size_t patch_dim() const { return patch_size * patch_size * channels; }
    std::size_t head_dim() const { return embed_dim / heads; }
    std::size_t mlp_hidden() const {
        return static_cast<std::size_t>(static_cast<double>(embed_dim) * mlp_ratio);
    }

    void validate() const;  // throws ShapeError on divisibility violations

    bool operator==(const ViTConfig &) const = default;
};

// ViT-Base-like geometry: 224/16 input (196 patches), embed 768, depth 12.
ViTConfig vit_base_config();

// Desk-scale geometry used by the test suite: image 32, patch 8, embed 32,
// depth 2, heads 2, mlp_ratio 2.
ViTConfig vit_tiny_config();

struct BlockParams {
    Tensor ln1_gamma, ln1_beta;
    Tensor qkv_weight, qkv_bias;    // [embed x 3*embed], [3*embed]
    Tensor proj_weight, proj_bias;  // [embed x embed], [embed]
    Tensor ln2_gamma, ln2_beta;
    Tensor mlp_fc1_weight, mlp_fc1_bias;  // [embed x hidden], [hidden]
    Tensor mlp_fc2_weight, mlp_fc2_bias;  // [hidden x embed], [embed]
};

struct ViTParams {
    ViTConfig config;
    Tensor patch_proj_weight;  // [patch_dim x embed]
    Tensor patch_proj_bias;    // [embed]
    Tensor cls_token;          // [1 x embed]
    Tensor pos_embed;          // [tokens x embed]
    std::vector<BlockParams> blocks;
    Tensor final_gamma, final_beta;        // [embed]
    Tensor head_fc1_weight, head_fc1_bias; // only when head_hidden > 0
    Tensor head_fc2_weight, head_fc2_bias; // [.. x classes], [classes]

    // Canonical (name, tensor) enumeration; fixed order drives checkpoints,
    // checksums, initialization and optimizer state.
    std::vector<std::pair<std::string, Tensor>> named_tensors() const;
    std::vector<Tensor> all_tensors() const;
    std::vector<Tensor> head_tensors() const;      // projector head only
    std::vector<Tensor> backbone_tensors() const;  // everything else

    void set_requires_grad(bool flag);
    void zero_grads();
};

struct ForwardOptions {
    bool train_mode = false;
    bool retain_attention = false;
    SplitMix64 *dropout_rng = nullptr;  // required when train_mode and drop_rate > 0
};

struct ForwardTrace {
    Tensor logits;  // [1 x num_classes]
    // attention[block][head] is the [tokens x tokens] softmax output; empty
    // unless retain_attention was requested.
    std::vector<std::vector<Tensor>> attention;
};

// Rows are the flattened [channels x patch x patch] pixels of each
// non-overlapping patch, patches ordered left-to-right then top-to-bottom.
Tensor patchify(const Tensor &image, std::size_t patch_size);

ForwardTrace vit_forward(const ViTParams &params, const Tensor &image,
                         const ForwardOptions &opts = {});

// Truncated normal (std 0.02) weights, zero biases, identity layer-norm
// affines; deterministic per seed.
ViTParams init_params(const ViTConfig &config, std::uint64_t seed);

ViTParams clone_params(const ViTParams &params);

// FNV-1a over every tensor name and payload in canonical order.
std::uint64_t params_checksum(const ViTParams &params);

void save_checkpoint(const ViTParams &params, const std::string &path);
ViTParams load_checkpoint(const std::string &path);

}  // namespace vitkit
