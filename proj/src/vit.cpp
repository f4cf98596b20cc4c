#include "vitscape/vit.hpp"

#include "vitscape/errors.hpp"

#include <cmath>

namespace vitscape {

void ViTConfig::validate() const {
    require(image_size > 0 && patch_size > 0 && channels > 0, "image/patch dimensions must be positive");
    require(image_size % patch_size == 0, "image size must be a multiple of the patch size");
    require(encoder_depth >= 0 && decoder_depth >= 0, "depths must be nonnegative");
    require(embed_dim > 0 && decoder_dim > 0 && heads > 0, "dims and heads must be positive");
    require(embed_dim % heads == 0, "embed dim must divide evenly into heads");
    require(decoder_dim % heads == 0, "decoder dim must divide evenly into heads");
    require(embed_dim % 4 == 0 && decoder_dim % 4 == 0, "dims must be divisible by 4 for 2-D sin-cos tables");
    require(mlp_ratio > 0.0, "mlp ratio must be positive");
    require(num_classes >= 2, "need at least two classes");
}

namespace {

void add_block_names(std::vector<std::string>& names, const std::string& prefix, int depth) {
    for (int i = 0; i < depth; ++i) {
        const std::string b = prefix + ".block" + std::to_string(i);
        names.push_back(b + ".norm1.gain");
        names.push_back(b + ".norm1.bias");
        names.push_back(b + ".attn.qkv.weight");
        names.push_back(b + ".attn.qkv.bias");
        names.push_back(b + ".attn.proj.weight");
        names.push_back(b + ".attn.proj.bias");
        names.push_back(b + ".norm2.gain");
        names.push_back(b + ".norm2.bias");
        names.push_back(b + ".mlp.fc1.weight");
        names.push_back(b + ".mlp.fc1.bias");
        names.push_back(b + ".mlp.fc2.weight");
        names.push_back(b + ".mlp.fc2.bias");
    }
}

std::vector<int> block_param_shape(const std::string& name, int dim, int hidden) {
    if (name.ends_with("norm1.gain") || name.ends_with("norm1.bias") ||
        name.ends_with("norm2.gain") || name.ends_with("norm2.bias") ||
        name.ends_with("attn.proj.bias") || name.ends_with("mlp.fc2.bias")) {
        return {dim};
    }
    if (name.ends_with("attn.qkv.weight")) {
        return {dim, 3 * dim};
    }
    if (name.ends_with("attn.qkv.bias")) {
        return {3 * dim};
    }
    if (name.ends_with("attn.proj.weight")) {
        return {dim, dim};
    }
    if (name.ends_with("mlp.fc1.weight")) {
        return {dim, hidden};
    }
    if (name.ends_with("mlp.fc1.bias")) {
        return {hidden};
    }
    if (name.ends_with("mlp.fc2.weight")) {
        return {hidden, dim};
    }
    fail_contract("unknown block parameter: " + name);
}

std::vector<int> param_shape(const ViTConfig& cfg, const std::string& name) {
    const int e = cfg.embed_dim, d = cfg.decoder_dim, pd = cfg.patch_dim();
    if (name == "patch_embed.weight") return {pd, e};
    if (name == "patch_embed.bias") return {e};
    if (name == "enc.norm.gain" || name == "enc.norm.bias") return {e};
    if (name == "dec.embed.weight") return {e, d};
    if (name == "dec.embed.bias") return {d};
    if (name == "dec.mask_token") return {1, d};
    if (name == "dec.norm.gain" || name == "dec.norm.bias") return {d};
    if (name == "dec.pred.weight") return {d, pd};
    if (name == "dec.pred.bias") return {pd};
    if (name == "head.weight") return {e, cfg.num_classes};
    if (name == "head.bias") return {cfg.num_classes};
    if (name.starts_with("enc.block")) {
        return block_param_shape(name, e, cfg.mlp_hidden(e));
    }
    if (name.starts_with("dec.block")) {
        return block_param_shape(name, d, cfg.mlp_hidden(d));
    }
    fail_contract("unknown parameter: " + name);
}

} // namespace

std::vector<std::string> vit_param_names(const ViTConfig& cfg, bool with_decoder, bool with_head) {
    std::vector<std::string> names;
    names.push_back("patch_embed.weight");
    names.push_back("patch_embed.bias");
    add_block_names(names, "enc", cfg.encoder_depth);
    names.push_back("enc.norm.gain");
    names.push_back("enc.norm.bias");
    if (with_decoder) {
        names.push_back("dec.embed.weight");
        names.push_back("dec.embed.bias");
        names.push_back("dec.mask_token");
        add_block_names(names, "dec", cfg.decoder_depth);
        if (cfg.decoder_depth > 0) {
            names.push_back("dec.norm.gain");
            names.push_back("dec.norm.bias");
        }
        names.push_back("dec.pred.weight");
        names.push_back("dec.pred.bias");
    }
    if (with_head) {
        names.push_back("head.weight");
        names.push_back("head.bias");
    }
    return names;
}

ViTModel make_vit(const ViTConfig& cfg, bool with_decoder, bool with_head, Rng& init_rng) {
    cfg.validate();
    ViTModel m;
    m.config = cfg;
    m.with_decoder = with_decoder;
    m.with_head = with_head;
    const double init_std = 0.02;
    for (const std::string& name : vit_param_names(cfg, with_decoder, with_head)) {
        Tensor t = Tensor::zeros(param_shape(cfg, name));
        if (name.ends_with(".gain")) {
            for (long long i = 0; i < t.numel(); ++i) {
                t[i] = 1.0;
            }
        } else if (!name.ends_with(".bias")) {
            // weights and the mask token draw from the init stream
            for (long long i = 0; i < t.numel(); ++i) {
                t[i] = init_std * init_rng.normal();
            }
        }
        m.params.add(name, std::move(t));
    }
    return m;
}

Tensor sincos_pos_embed(int grid, int dim) {
    require(dim % 4 == 0, "pos embed dim must be divisible by 4");
    const int n = grid * grid;
    const int quarter = dim / 4;
    Tensor out = Tensor::zeros({n, dim});
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            const int row = gy * grid + gx;
            for (int k = 0; k < quarter; ++k) {
                const double omega = std::pow(10000.0, -static_cast<double>(k) / quarter);
                out(row, k) = std::sin(gy * omega);
                out(row, quarter + k) = std::cos(gy * omega);
                out(row, 2 * quarter + k) = std::sin(gx * omega);
                out(row, 3 * quarter + k) = std::cos(gx * omega);
            }
        }
    }
    return out;
}

Tensor patchify(const Tensor& image, const ViTConfig& cfg) {
    const std::vector<int> want{cfg.channels, cfg.image_size, cfg.image_size};
    if (image.shape() != want) {
        throw DimensionError("patchify: image " + image.shape_str() + " vs config " + shape_to_string(want));
    }
    const int p = cfg.patch_size, g = cfg.grid_size(), c = cfg.channels, hw = cfg.image_size;
    Tensor out = Tensor::zeros({cfg.n_patches(), cfg.patch_dim()});
    for (int gy = 0; gy < g; ++gy) {
        for (int gx = 0; gx < g; ++gx) {
            const int row = gy * g + gx;
            int col = 0;
            for (int ch = 0; ch < c; ++ch) {
                for (int py = 0; py < p; ++py) {
                    for (int px = 0; px < p; ++px) {
                        const long long idx =
                            (static_cast<long long>(ch) * hw + (gy * p + py)) * hw + (gx * p + px);
                        out(row, col++) = image[idx];
                    }
                }
            }
        }
    }
    return out;
}

Tensor unpatchify(const Tensor& patches, const ViTConfig& cfg) {
    const std::vector<int> want{cfg.n_patches(), cfg.patch_dim()};
    if (patches.shape() != want) {
        throw DimensionError("unpatchify: patches " + patches.shape_str() + " vs config " + shape_to_string(want));
    }
    const int p = cfg.patch_size, g = cfg.grid_size(), c = cfg.channels, hw = cfg.image_size;
    Tensor out = Tensor::zeros({c, hw, hw});
    for (int gy = 0; gy < g; ++gy) {
        for (int gx = 0; gx < g; ++gx) {
            const int row = gy * g + gx;
            int col = 0;
            for (int ch = 0; ch < c; ++ch) {
                for (int py = 0; py < p; ++py) {
                    for (int px = 0; px < p; ++px) {
                        const long long idx =
                            (static_cast<long long>(ch) * hw + (gy * p + py)) * hw + (gx * p + px);
                        out[idx] = patches(row, col++);
                    }
                }
            }
        }
    }
    return out;
}

namespace {

constexpr double kLayerNormEps = 1e-10;

// pre-norm transformer block shared by encoder and decoder
Var transformer_block(Graph& g, const BoundParams& p, const std::string& prefix, Var x, int dim, int heads) {
    const int head_dim = dim / heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    Var xn = g.add_rowvec(g.mul_rowvec(g.layer_norm_rows(x, kLayerNormEps), p[prefix + ".norm1.gain"]),
                          p[prefix + ".norm1.bias"]);
    Var qkv = g.add_rowvec(g.matmul(xn, p[prefix + ".attn.qkv.weight"]), p[prefix + ".attn.qkv.bias"]);
    Var q = g.slice_cols(qkv, 0, dim);
    Var k = g.slice_cols(qkv, dim, dim);
    Var v = g.slice_cols(qkv, 2 * dim, dim);

    std::vector<Var> head_outputs;
    head_outputs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Var qh = g.slice_cols(q, h * head_dim, head_dim);
        Var kh = g.slice_cols(k, h * head_dim, head_dim);
        Var vh = g.slice_cols(v, h * head_dim, head_dim);
        Var scores = g.scale(g.matmul(qh, g.transpose(kh)), att_scale);
        Var attn = g.softmax(scores, 1);
        head_outputs.push_back(g.matmul(attn, vh));
    }
    Var merged = heads == 1 ? head_outputs[0] : g.concat_cols(head_outputs);
    Var proj = g.add_rowvec(g.matmul(merged, p[prefix + ".attn.proj.weight"]), p[prefix + ".attn.proj.bias"]);
    x = g.add(x, proj);

    Var xn2 = g.add_rowvec(g.mul_rowvec(g.layer_norm_rows(x, kLayerNormEps), p[prefix + ".norm2.gain"]),
                           p[prefix + ".norm2.bias"]);
    Var hidden = g.gelu(g.add_rowvec(g.matmul(xn2, p[prefix + ".mlp.fc1.weight"]), p[prefix + ".mlp.fc1.bias"]));
    Var mlp_out = g.add_rowvec(g.matmul(hidden, p[prefix + ".mlp.fc2.weight"]), p[prefix + ".mlp.fc2.bias"]);
    return g.add(x, mlp_out);
}

Var final_norm(Graph& g, const BoundParams& p, const std::string& prefix, Var x) {
    return g.add_rowvec(g.mul_rowvec(g.layer_norm_rows(x, kLayerNormEps), p[prefix + ".norm.gain"]),
                        p[prefix + ".norm.bias"]);
}

} // namespace

Var vit_encode(Graph& g, const BoundParams& p, const ViTConfig& cfg, const Tensor& patches,
               const std::vector<int>& visible) {
    const std::vector<int> want{cfg.n_patches(), cfg.patch_dim()};
    if (patches.shape() != want) {
        throw DimensionError("encode: patches " + patches.shape_str() + " vs config " + shape_to_string(want));
    }
    if (visible.empty()) {
        fail_contract("encode: empty visible set, the encoder needs at least one token");
    }

    Var all_patches = g.constant(patches);
    Var vis = g.take_rows(all_patches, visible);
    Var tokens = g.add_rowvec(g.matmul(vis, p["patch_embed.weight"]), p["patch_embed.bias"]);

    Tensor pos = sincos_pos_embed(cfg.grid_size(), cfg.embed_dim);
    Tensor pos_vis = Tensor::zeros({static_cast<int>(visible.size()), cfg.embed_dim});
    for (std::size_t i = 0; i < visible.size(); ++i) {
        for (int j = 0; j < cfg.embed_dim; ++j) {
            pos_vis(static_cast<int>(i), j) = pos(visible[i], j);
        }
    }
    tokens = g.add(tokens, g.constant(std::move(pos_vis)));

    for (int b = 0; b < cfg.encoder_depth; ++b) {
        tokens = transformer_block(g, p, "enc.block" + std::to_string(b), tokens, cfg.embed_dim, cfg.heads);
    }
    return final_norm(g, p, "enc", tokens);
}

Var vit_decode(Graph& g, const BoundParams& p, const ViTConfig& cfg, Var latent, const MaskSpec& mask) {
    const Tensor& z = g.value(latent);
    if (z.rank() != 2 || z.rows() != static_cast<int>(mask.visible.size())) {
        throw DimensionError("decode: latent " + z.shape_str() + " vs " +
                             std::to_string(mask.visible.size()) + " visible patches");
    }
    Var proj = g.add_rowvec(g.matmul(latent, p["dec.embed.weight"]), p["dec.embed.bias"]);
    Var seq = g.assemble_rows(mask.n_patches, mask.visible, proj, p["dec.mask_token"]);
    seq = g.add(seq, g.constant(sincos_pos_embed(cfg.grid_size(), cfg.decoder_dim)));
    for (int b = 0; b < cfg.decoder_depth; ++b) {
        seq = transformer_block(g, p, "dec.block" + std::to_string(b), seq, cfg.decoder_dim, cfg.heads);
    }
    if (cfg.decoder_depth > 0) {
        seq = final_norm(g, p, "dec", seq);
    }
    return g.add_rowvec(g.matmul(seq, p["dec.pred.weight"]), p["dec.pred.bias"]);
}

Var vit_classify(Graph& g, const BoundParams& p, const ViTConfig& cfg, const Tensor& patches) {
    std::vector<int> all(static_cast<std::size_t>(cfg.n_patches()));
    for (int i = 0; i < cfg.n_patches(); ++i) {
        all[static_cast<std::size_t>(i)] = i;
    }
    Var tokens = vit_encode(g, p, cfg, patches, all);
    Var pooled = g.reshape(g.mean_rows(tokens), {1, cfg.embed_dim});
    return g.add_rowvec(g.matmul(pooled, p["head.weight"]), p["head.bias"]);
}

Var vit_reconstruct(Graph& g, const BoundParams& p, const ViTConfig& cfg, const Tensor& patches,
                    const MaskSpec& mask) {
    Var z = vit_encode(g, p, cfg, patches, mask.visible);
    return vit_decode(g, p, cfg, z, mask);
}

} // namespace vitscape
