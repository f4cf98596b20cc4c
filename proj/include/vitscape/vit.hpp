#pragma once

#include "vitscape/graph.hpp"
#include "vitscape/mim.hpp"
#include "vitscape/params.hpp"
#include "vitscape/rng.hpp"

#include <string>
#include <vector>

namespace vitscape {

struct ViTConfig {
    int image_size = 16; // H == W
    int channels = 1;
    int patch_size = 4;
    int encoder_depth = 2;
    int decoder_depth = 1;
    int embed_dim = 32;
    int decoder_dim = 16;
    int heads = 4;
    double mlp_ratio = 4.0;
    int num_classes = 8;

    int grid_size() const { return image_size / patch_size; }
    int n_patches() const { return grid_size() * grid_size(); }
    int patch_dim() const { return patch_size * patch_size * channels; }
    int mlp_hidden(int dim) const { return static_cast<int>(dim * mlp_ratio + 0.5); }
    void validate() const;
    bool operator==(const ViTConfig&) const = default;
};

// Which parameter groups a model carries. Pretraining models own a decoder,
// classifier models own a linear head; both share the encoder layout.
struct ViTModel {
    ViTConfig config;
    bool with_decoder = false;
    bool with_head = false;
    ParameterSet params;
};

std::vector<std::string> vit_param_names(const ViTConfig& cfg, bool with_decoder, bool with_head);
ViTModel make_vit(const ViTConfig& cfg, bool with_decoder, bool with_head, Rng& init_rng);

// fixed 2-D sin-cos positional table, [grid^2 x dim]; dim must be divisible by 4
Tensor sincos_pos_embed(int grid, int dim);

// image [C x H x W] -> patches [N x (P^2 C)], raster order, exact round trip
Tensor patchify(const Tensor& image, const ViTConfig& cfg);
Tensor unpatchify(const Tensor& patches, const ViTConfig& cfg);

// Encoder over the visible patches only; returns [|V| x embed_dim] tokens.
Var vit_encode(Graph& g, const BoundParams& p, const ViTConfig& cfg, const Tensor& patches,
               const std::vector<int>& visible);

// Decoder over the full token sequence with the mask token filling masked
// positions; returns per-patch predictions [N x (P^2 C)].
Var vit_decode(Graph& g, const BoundParams& p, const ViTConfig& cfg, Var latent, const MaskSpec& mask);

// Classifier logits [1 x K] from mean-pooled encoder tokens over the full
// (unmasked) sequence.
Var vit_classify(Graph& g, const BoundParams& p, const ViTConfig& cfg, const Tensor& patches);

// Convenience: full masked-autoencoder forward, encode + decode.
Var vit_reconstruct(Graph& g, const BoundParams& p, const ViTConfig& cfg, const Tensor& patches,
                    const MaskSpec& mask);

} // namespace vitscape
