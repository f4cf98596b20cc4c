#pragma once

#include "vitscape/params.hpp"
#include "vitscape/vit.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace vitscape {

enum class Regime { supervised, mae, rcmae, probe };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

// true when the regime's model carries a decoder (pretraining) rather than a
// classifier head
inline bool regime_has_decoder(Regime r) {
    return r == Regime::mae || r == Regime::rcmae;
}

struct CheckpointMeta {
    Regime regime = Regime::mae;
    std::uint64_t seed = 0;
    std::uint64_t data_seed = 0;
    int epochs = 0;
    double final_loss = 0.0;
    double mask_ratio = 0.75;
    double ema_decay = 0.996;
    double consistency_weight = 1.0;
    bool per_patch_norm = false;
    double probe_accuracy = -1.0; // probe regime only
};

struct Checkpoint {
    ViTConfig config;
    CheckpointMeta meta;
    ParameterSet params;
    std::optional<ParameterSet> teacher; // rcmae only
};

// On-disk layout, all integers little-endian:
//
//   [0]        8-byte magic "VSCKPT01"
//   [8]        u64 header length H
//   [16]       H bytes of UTF-8 JSON: version, config, metadata and a tensor
//              table (name, shape, element offset, element count), student
//              tensors first, teacher tensors after when present
//   [16+H]     payload: raw IEEE-754 doubles, little-endian, in table order
//   [16+H+P]   u64 FNV-1a checksum over the payload bytes
//
// Loads verify magic, version, checksum, and that the parameter names and
// shapes exactly match the name set derived from the stored config + regime.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::uint64_t fnv1a64(const unsigned char* data, std::size_t n);
std::string config_hash(const ViTConfig& cfg); // hex digest of the canonical config encoding

} // namespace vitscape
