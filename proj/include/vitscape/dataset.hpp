#pragma once

#include "vitscape/tensor.hpp"
#include "vitscape/vit.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vitscape {

struct Dataset {
    std::vector<Tensor> images; // each [C x H x W], values in [0, 1]
    std::vector<int> labels;
    std::string split = "train"; // "train" | "eval"
    int num_classes = 0;

    std::size_t size() const { return images.size(); }
};

// Number of distinct procedural pattern families available as classes.
constexpr int kPatternFamilies = 8;

// Procedural labeled images, one geometric family per class, balanced within
// one image, deterministic per seed. Gaussian pixel noise sigma = 0.1,
// clamped to [0, 1].
Dataset generate_synthetic(int n, const ViTConfig& cfg, int k_classes, std::uint64_t seed,
                           std::string split = "train");

namespace idx {

// Raw IDX codec (byte-level, big-endian dimensions).
struct Images {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> pixels; // count * rows * cols
};

struct Labels {
    std::vector<std::uint8_t> values;
};

void write_images(const std::string& path, const Images& im);
Images read_images(const std::string& path);
void write_labels(const std::string& path, const Labels& lb);
Labels read_labels(const std::string& path);

} // namespace idx

// IDX pair -> Dataset: pixels scaled to [0, 1], center-cropped or
// zero-padded to the config image size, channels replicated if needed.
Dataset load_idx(const std::string& images_path, const std::string& labels_path, const ViTConfig& cfg);

} // namespace vitscape
