#include "vitscape/train.hpp"

#include "vitscape/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vitscape {

double cross_entropy(const Tensor& logits, int label) {
    const long long k = logits.numel();
    if (logits.rank() == 2 && logits.rows() != 1) {
        throw DimensionError("cross_entropy: expected one row of logits, got " + logits.shape_str());
    }
    if (label < 0 || label >= k) {
        fail_contract("cross_entropy: label " + std::to_string(label) + " out of [0, " + std::to_string(k) + ")");
    }
    double mx = logits[0];
    for (long long i = 1; i < k; ++i) {
        mx = std::max(mx, logits[i]);
    }
    double total = 0.0;
    for (long long i = 0; i < k; ++i) {
        total += std::exp(logits[i] - mx);
    }
    return std::log(total) + mx - logits[label];
}

Var cross_entropy_node(Graph& g, Var logits, int label) {
    return g.cross_entropy(logits, label);
}

Tensor normalize_patch_targets(const Tensor& patches) {
    Tensor out = patches;
    const int rows = out.rows(), cols = out.cols();
    for (int i = 0; i < rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < cols; ++j) {
            mean += out(i, j);
        }
        mean /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
            const double d = out(i, j) - mean;
            var += d * d;
        }
        var /= cols;
        const double inv = 1.0 / std::sqrt(var + 1e-6);
        for (int j = 0; j < cols; ++j) {
            out(i, j) = (out(i, j) - mean) * inv;
        }
    }
    return out;
}

namespace {

void check_regime_model(const ViTModel& model, Regime regime) {
    if (regime_has_decoder(regime)) {
        require(model.with_decoder, "regime " + to_string(regime) + " needs a model with a decoder");
    } else {
        require(model.with_head, "regime " + to_string(regime) + " needs a model with a classifier head");
    }
}

void no_post_step() {}

// Shared optimization loop. Each step builds one graph over the batch,
// backpropagates the batch-mean loss, and updates exactly the tracked
// parameter subset. post_step runs after every optimizer update.
template <class LossBuilder, class PostStep = void (*)()>
std::vector<double> optimize(ViTModel& model, const Dataset& data, const TrainConfig& cfg,
                             const std::vector<std::string>& trainable, LossBuilder&& build_loss,
                             PostStep&& post_step = no_post_step) {
    require(!data.images.empty(), "training needs a nonempty dataset");
    require(cfg.batch_size >= 1, "batch size must be positive");
    require(cfg.epochs >= 0, "epochs must be nonnegative");

    Rng order_rng = Rng::stream(cfg.seed, "data-order");
    Rng mask_rng = Rng::stream(cfg.seed, "mask");

    ParameterSet tracked_init;
    for (const std::string& n : trainable) {
        tracked_init.add(n, model.params.at(n));
    }
    OptimizerState state = OptimizerState::init(tracked_init);
    const AdamWConfig acfg{cfg.lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.adam_eps};

    const int n = static_cast<int>(data.images.size());
    std::vector<int> indices(static_cast<std::size_t>(n));
    std::vector<double> epoch_loss;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(indices.begin(), indices.end(), 0);
        order_rng.shuffle(indices);
        double loss_acc = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int end = std::min(n, start + cfg.batch_size);
            Graph g;
            BoundParams bp(g, model.params, trainable);
            Var total{};
            for (int bi = start; bi < end; ++bi) {
                const Var li = build_loss(g, bp, indices[static_cast<std::size_t>(bi)], mask_rng);
                total = (bi == start) ? li : g.add(total, li);
            }
            const Var mean = g.scale(total, 1.0 / static_cast<double>(end - start));
            const double loss_val = g.scalar(mean);
            if (!std::isfinite(loss_val)) {
                throw std::runtime_error("training loss became non-finite at epoch " + std::to_string(epoch) +
                                         ", step " + std::to_string(batches));
            }
            g.backward(mean);
            ParameterSet grads = collect_grads(g, bp, trainable);

            ParameterSet subset;
            for (const std::string& nm : trainable) {
                subset.add(nm, model.params.at(nm));
            }
            adamw_step(subset, grads, state, acfg);
            for (const std::string& nm : trainable) {
                model.params.at(nm) = subset.at(nm);
            }
            post_step();

            loss_acc += loss_val;
            batches += 1;
        }
        epoch_loss.push_back(loss_acc / batches);
    }
    return epoch_loss;
}

} // namespace

TrainResult train(ViTModel& model, const Dataset& data, const TrainConfig& cfg) {
    require(cfg.regime != Regime::probe, "probe training goes through linear_probe");
    check_regime_model(model, cfg.regime);
    const ViTConfig& mc = model.config;

    // patchified pixels and (optionally normalized) reconstruction targets
    std::vector<Tensor> patches, targets;
    patches.reserve(data.images.size());
    for (const Tensor& img : data.images) {
        patches.push_back(patchify(img, mc));
        if (regime_has_decoder(cfg.regime)) {
            targets.push_back(cfg.per_patch_norm ? normalize_patch_targets(patches.back()) : patches.back());
        }
    }

    TrainResult r;
    if (cfg.regime == Regime::supervised) {
        r.epoch_loss = optimize(model, data, cfg, model.params.names(),
                                [&](Graph& g, const BoundParams& bp, int i, Rng&) {
                                    Var logits = vit_classify(g, bp, mc, patches[static_cast<std::size_t>(i)]);
                                    return g.cross_entropy(logits, data.labels[static_cast<std::size_t>(i)]);
                                });
        return r;
    }

    if (cfg.regime == Regime::mae) {
        r.epoch_loss = optimize(model, data, cfg, model.params.names(),
                                [&](Graph& g, const BoundParams& bp, int i, Rng& mask_rng) {
                                    const auto idx = static_cast<std::size_t>(i);
                                    const MaskSpec mask = sample_mask(mc.n_patches(), cfg.mask_ratio, mask_rng);
                                    Var preds = vit_reconstruct(g, bp, mc, patches[idx], mask);
                                    return mae_loss_node(g, targets[idx], preds, mask);
                                });
        return r;
    }

    // rcmae: the teacher sees the identical mask; with consistency weight 0
    // the loss reduces to the mae path exactly and the teacher forward is
    // skipped (the teacher still tracks the student via ema updates)
    EmaTeacher teacher = EmaTeacher::init(model.params, cfg.ema_decay);
    r.epoch_loss = optimize(
        model, data, cfg, model.params.names(),
        [&](Graph& g, const BoundParams& bp, int i, Rng& mask_rng) {
            const auto idx = static_cast<std::size_t>(i);
            const MaskSpec mask = sample_mask(mc.n_patches(), cfg.mask_ratio, mask_rng);
            Var preds = vit_reconstruct(g, bp, mc, patches[idx], mask);
            if (cfg.consistency_weight == 0.0) {
                return mae_loss_node(g, targets[idx], preds, mask);
            }
            Graph tg;
            BoundParams tbp(tg, teacher.params, false);
            Var tpred = vit_reconstruct(tg, tbp, mc, patches[idx], mask);
            return rc_mae_loss_node(g, targets[idx], preds, tg.value(tpred), mask, cfg.consistency_weight);
        },
        [&]() { ema_update(teacher, model.params); });
    r.teacher = teacher.params;
    return r;
}

TrainResult linear_probe(ViTModel& model, const Dataset& train_data, const Dataset& eval_data,
                         const TrainConfig& cfg) {
    require(model.with_head, "linear_probe needs a model with a classifier head");
    const ViTConfig& mc = model.config;
    const std::vector<std::string> head_only{"head.weight", "head.bias"};

    std::vector<Tensor> patches;
    patches.reserve(train_data.images.size());
    for (const Tensor& img : train_data.images) {
        patches.push_back(patchify(img, mc));
    }

    TrainResult r;
    r.epoch_loss = optimize(model, train_data, cfg, head_only,
                            [&](Graph& g, const BoundParams& bp, int i, Rng&) {
                                Var logits = vit_classify(g, bp, mc, patches[static_cast<std::size_t>(i)]);
                                return g.cross_entropy(logits, train_data.labels[static_cast<std::size_t>(i)]);
                            });
    r.probe_accuracy = classification_accuracy(model, eval_data);
    return r;
}

double classification_accuracy(const ViTModel& model, const Dataset& data) {
    require(model.with_head, "classification_accuracy needs a classifier head");
    require(!data.images.empty(), "empty dataset");
    int correct = 0;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        Graph g;
        BoundParams bp(g, model.params, false);
        const Tensor logits = g.value(vit_classify(g, bp, model.config, patchify(data.images[i], model.config)));
        int best = 0;
        for (long long k = 1; k < logits.numel(); ++k) {
            if (logits[k] > logits[best]) {
                best = static_cast<int>(k);
            }
        }
        if (best == data.labels[i]) {
            correct += 1;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.images.size());
}

} // namespace vitscape
