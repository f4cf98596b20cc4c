#pragma once

#include "vitscape/checkpoint.hpp"
#include "vitscape/dataset.hpp"
#include "vitscape/landscape.hpp"
#include "vitscape/train.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace vitscape {

// Everything a regime loss needs to score one parameter set over a fixed
// evaluation dataset: patchified images, per-image masks (one fixed mask per
// image, shared across all grid points), labels, and cached teacher
// predictions for rcmae. Pure and safe to share across worker threads.
struct EvalContext {
    ViTConfig config;
    Regime loss_regime = Regime::mae;
    std::vector<Tensor> patches;
    std::vector<Tensor> targets; // reconstruction targets
    std::vector<int> labels;
    std::vector<MaskSpec> masks;
    std::vector<Tensor> teacher_preds;
    double consistency_weight = 1.0;
};

EvalContext make_eval_context(const Checkpoint& ckpt, Regime loss_regime, const Dataset& data,
                              std::uint64_t eval_seed);

// Mean loss over the whole evaluation set, fixed summation order. Returns
// the first non-finite value encountered, if any.
double eval_dataset_loss(const EvalContext& ctx, const ParameterSet& params);

LossEval make_loss_eval(const EvalContext& ctx); // captures ctx by reference

// Zeroes both directions outside the classifier head (probe landscapes).
void restrict_directions_to_head(DirectionPair& dir);

void write_loss_history_csv(const std::string& path, const std::vector<double>& epoch_loss);

struct GridMetaInfo {
    Regime loss_regime;
    std::uint64_t direction_seed = 0;
    std::uint64_t eval_seed = 0;
    std::uint64_t data_seed = 0;
    int eval_images = 0;
    double half_range = 1.0;
    bool perturb_aux = false;
    bool head_only = false;
};

void write_grid_meta(const std::string& path, const LandscapeGrid& grid, const ViTConfig& config,
                     const GridMetaInfo& info, const CurvatureReport& rep);

// Full qualitative experiment: per seed, train the supervised baseline and
// both pretraining regimes, probe the mae encoder, evaluate all four
// landscapes, and compare curvature metrics across regimes.
struct ReproduceConfig {
    int n_seeds = 5;
    std::uint64_t seed_base = 0;
    ViTConfig model;
    int k_classes = 8;
    int train_images = 512;
    int eval_images = 128;
    int batch_size = 64;
    int pretrain_epochs = 50;
    int supervised_epochs = 50;
    int probe_epochs = 30;
    double lr = 1e-3;
    double weight_decay = 0.05;
    double mask_ratio = 0.75;
    double ema_decay = 0.996;
    int resolution = 25;
    double half_range = 1.0;
    int workers = 1;
    std::string out_dir = "reproduce-out";
    bool write_figures = true;
};

struct SeedReport {
    std::uint64_t seed = 0;
    CurvatureReport supervised, mae, rcmae, probe;
    double probe_accuracy = -1.0;
    double supervised_final_loss = 0.0;
    double mae_final_loss = 0.0;
    double rcmae_final_loss = 0.0;
};

struct ReproduceSummary {
    std::vector<SeedReport> seeds;
    int convexity_wins = 0; // rcmae convexity fraction >= mae, pretraining grids
    int flatness_wins = 0;  // mae-probe flatness radius >= supervised, cross-entropy grids
    bool convexity_pass = false;
    bool flatness_pass = false;
};

ReproduceSummary run_reproduce(const ReproduceConfig& rc, std::ostream& log);
void write_reproduce_summary(const std::string& path, const ReproduceSummary& s);
std::string reproduce_table(const ReproduceSummary& s); // human-readable comparison table

} // namespace vitscape
