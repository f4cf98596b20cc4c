#pragma once

#include "vitscape/checkpoint.hpp"
#include "vitscape/dataset.hpp"
#include "vitscape/mim.hpp"
#include "vitscape/optim.hpp"
#include "vitscape/vit.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace vitscape {

struct TrainConfig {
    Regime regime = Regime::mae;
    int epochs = 50;
    int batch_size = 64;
    double lr = 1e-3;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    double mask_ratio = 0.75;
    double ema_decay = 0.996;
    double consistency_weight = 1.0;
    bool per_patch_norm = false; // normalize reconstruction targets per patch
};

struct TrainResult {
    std::optional<ParameterSet> teacher; // rcmae final teacher
    std::vector<double> epoch_loss;      // mean loss per epoch
    double probe_accuracy = -1.0;        // probe only, on the eval split
};

double cross_entropy(const Tensor& logits, int label);
Var cross_entropy_node(Graph& g, Var logits, int label);

// optional per-patch target normalization (config flag, default off)
Tensor normalize_patch_targets(const Tensor& patches);

// In-place training of model.params. The seed drives three separate rng
// streams (data order, masking) while the caller owns initialization.
// Regimes: supervised trains encoder + head with cross-entropy; mae/rcmae
// train encoder + decoder with the reconstruction objectives.
TrainResult train(ViTModel& model, const Dataset& data, const TrainConfig& cfg);

// Trains only the classifier head; encoder parameters are never touched.
// Reports accuracy on eval_data after the last epoch.
TrainResult linear_probe(ViTModel& model, const Dataset& train_data, const Dataset& eval_data,
                         const TrainConfig& cfg);

// argmax-classify accuracy over a dataset
double classification_accuracy(const ViTModel& model, const Dataset& data);

} // namespace vitscape
