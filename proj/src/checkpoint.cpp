#include "vitscape/checkpoint.hpp"

#include "vitscape/errors.hpp"
#include "vitscape/rng.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace vitscape {

using json = nlohmann::ordered_json;

std::string to_string(Regime r) {
    switch (r) {
    case Regime::supervised: return "supervised";
    case Regime::mae: return "mae";
    case Regime::rcmae: return "rcmae";
    case Regime::probe: return "probe";
    }
    return "?";
}

Regime regime_from_string(const std::string& s) {
    if (s == "supervised") return Regime::supervised;
    if (s == "mae") return Regime::mae;
    if (s == "rcmae") return Regime::rcmae;
    if (s == "probe") return Regime::probe;
    fail_contract("unknown regime: " + s);
}

std::uint64_t fnv1a64(const unsigned char* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

constexpr char kMagic[8] = {'V', 'S', 'C', 'K', 'P', 'T', '0', '1'};
constexpr int kVersion = 1;

void put_u64le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint64_t get_u64le(const std::string& in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    }
    return v;
}

void append_doubles_le(std::string& out, const Tensor& t) {
    for (long long i = 0; i < t.numel(); ++i) {
        put_u64le(out, std::bit_cast<std::uint64_t>(t[i]));
    }
}

json config_to_json(const ViTConfig& c) {
    json j;
    j["image_size"] = c.image_size;
    j["channels"] = c.channels;
    j["patch_size"] = c.patch_size;
    j["encoder_depth"] = c.encoder_depth;
    j["decoder_depth"] = c.decoder_depth;
    j["embed_dim"] = c.embed_dim;
    j["decoder_dim"] = c.decoder_dim;
    j["heads"] = c.heads;
    j["mlp_ratio"] = c.mlp_ratio;
    j["num_classes"] = c.num_classes;
    return j;
}

ViTConfig config_from_json(const json& j) {
    ViTConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.channels = j.at("channels").get<int>();
    c.patch_size = j.at("patch_size").get<int>();
    c.encoder_depth = j.at("encoder_depth").get<int>();
    c.decoder_depth = j.at("decoder_depth").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.decoder_dim = j.at("decoder_dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.mlp_ratio = j.at("mlp_ratio").get<double>();
    c.num_classes = j.at("num_classes").get<int>();
    return c;
}

json tensor_table(const ParameterSet& ps, long long& cursor) {
    json arr = json::array();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        json e;
        e["name"] = ps.name(i);
        e["shape"] = ps.value(i).shape();
        e["offset"] = cursor;
        e["count"] = ps.value(i).numel();
        cursor += ps.value(i).numel();
        arr.push_back(std::move(e));
    }
    return arr;
}

ParameterSet read_tensor_table(const json& table, const std::string& payload) {
    ParameterSet ps;
    for (const json& e : table) {
        const std::string name = e.at("name").get<std::string>();
        const std::vector<int> shape = e.at("shape").get<std::vector<int>>();
        const long long offset = e.at("offset").get<long long>();
        const long long count = e.at("count").get<long long>();
        Tensor t = Tensor::zeros(shape);
        if (t.numel() != count) {
            throw FormatError("checkpoint: tensor " + name + " count/shape mismatch");
        }
        const std::size_t byte_off = static_cast<std::size_t>(offset) * 8;
        if (byte_off + static_cast<std::size_t>(count) * 8 > payload.size()) {
            throw FormatError("checkpoint: tensor " + name + " exceeds payload");
        }
        for (long long i = 0; i < count; ++i) {
            t[i] = std::bit_cast<double>(get_u64le(payload, byte_off + static_cast<std::size_t>(i) * 8));
        }
        ps.add(name, std::move(t));
    }
    return ps;
}

void validate_names(const Checkpoint& c) {
    const bool dec = regime_has_decoder(c.meta.regime);
    const auto expected = vit_param_names(c.config, dec, !dec);
    if (c.params.names() != expected) {
        for (const std::string& n : c.params.names()) {
            bool known = false;
            for (const std::string& e : expected) {
                known = known || e == n;
            }
            if (!known) {
                throw FormatError("checkpoint: unknown parameter name " + n);
            }
        }
        throw FormatError("checkpoint: parameter name set does not match config");
    }
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    json header;
    header["version"] = kVersion;
    header["config"] = config_to_json(ckpt.config);
    json meta;
    meta["regime"] = to_string(ckpt.meta.regime);
    meta["seed"] = ckpt.meta.seed;
    meta["data_seed"] = ckpt.meta.data_seed;
    meta["epochs"] = ckpt.meta.epochs;
    meta["final_loss"] = ckpt.meta.final_loss;
    meta["mask_ratio"] = ckpt.meta.mask_ratio;
    meta["ema_decay"] = ckpt.meta.ema_decay;
    meta["consistency_weight"] = ckpt.meta.consistency_weight;
    meta["per_patch_norm"] = ckpt.meta.per_patch_norm;
    meta["probe_accuracy"] = ckpt.meta.probe_accuracy;
    header["metadata"] = std::move(meta);
    long long cursor = 0;
    header["tensors"] = tensor_table(ckpt.params, cursor);
    if (ckpt.teacher) {
        header["teacher_tensors"] = tensor_table(*ckpt.teacher, cursor);
    }

    std::string payload;
    payload.reserve(static_cast<std::size_t>(cursor) * 8);
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
        append_doubles_le(payload, ckpt.params.value(i));
    }
    if (ckpt.teacher) {
        for (std::size_t i = 0; i < ckpt.teacher->size(); ++i) {
            append_doubles_le(payload, ckpt.teacher->value(i));
        }
    }

    const std::string header_text = header.dump();
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u64le(out, header_text.size());
    out.append(header_text);
    out.append(payload);
    put_u64le(out, fnv1a64(reinterpret_cast<const unsigned char*>(payload.data()), payload.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw FormatError("cannot open " + path + " for writing");
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw FormatError("short write to " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw FormatError("cannot open " + path);
    }
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 24) {
        throw FormatError(path + ": too short for a checkpoint");
    }
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError(path + ": bad checkpoint magic");
    }
    const std::uint64_t header_len = get_u64le(bytes, 8);
    if (16 + header_len + 8 > bytes.size()) {
        throw FormatError(path + ": header exceeds file size");
    }
    json header;
    try {
        header = json::parse(bytes.substr(16, header_len));
    } catch (const std::exception& e) {
        throw FormatError(path + ": unreadable header: " + e.what());
    }
    const int version = header.at("version").get<int>();
    if (version != kVersion) {
        throw FormatError(path + ": checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(kVersion));
    }
    const std::string payload = bytes.substr(16 + header_len, bytes.size() - 16 - header_len - 8);
    const std::uint64_t want = get_u64le(bytes, bytes.size() - 8);
    const std::uint64_t got = fnv1a64(reinterpret_cast<const unsigned char*>(payload.data()), payload.size());
    if (want != got) {
        throw FormatError(path + ": payload checksum mismatch");
    }

    Checkpoint c;
    c.config = config_from_json(header.at("config"));
    const json& meta = header.at("metadata");
    c.meta.regime = regime_from_string(meta.at("regime").get<std::string>());
    c.meta.seed = meta.at("seed").get<std::uint64_t>();
    c.meta.data_seed = meta.at("data_seed").get<std::uint64_t>();
    c.meta.epochs = meta.at("epochs").get<int>();
    c.meta.final_loss = meta.at("final_loss").get<double>();
    c.meta.mask_ratio = meta.at("mask_ratio").get<double>();
    c.meta.ema_decay = meta.at("ema_decay").get<double>();
    c.meta.consistency_weight = meta.at("consistency_weight").get<double>();
    c.meta.per_patch_norm = meta.at("per_patch_norm").get<bool>();
    c.meta.probe_accuracy = meta.at("probe_accuracy").get<double>();
    c.params = read_tensor_table(header.at("tensors"), payload);
    if (header.contains("teacher_tensors")) {
        c.teacher = read_tensor_table(header.at("teacher_tensors"), payload);
    }

    validate_names(c);
    // shapes must match the config-derived layout exactly
    {
        Rng init(0);
        const bool dec = regime_has_decoder(c.meta.regime);
        ViTModel probe_layout = make_vit(c.config, dec, !dec, init);
        require_same_layout(probe_layout.params, c.params, "checkpoint " + path);
        if (c.teacher) {
            require_same_layout(c.params, *c.teacher, "checkpoint teacher " + path);
        }
    }
    return c;
}

std::string config_hash(const ViTConfig& cfg) {
    const std::string s = config_to_json(cfg).dump();
    const std::uint64_t h = fnv1a64(reinterpret_cast<const unsigned char*>(s.data()), s.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace vitscape
