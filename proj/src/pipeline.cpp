#include "vitscape/pipeline.hpp"

#include "vitscape/errors.hpp"
#include "vitscape/render.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace vitscape {

using json = nlohmann::ordered_json;

EvalContext make_eval_context(const Checkpoint& ckpt, Regime loss_regime, const Dataset& data,
                              std::uint64_t eval_seed) {
    EvalContext ctx;
    ctx.config = ckpt.config;
    ctx.loss_regime = loss_regime;
    ctx.consistency_weight = ckpt.meta.consistency_weight;
    ctx.patches.reserve(data.images.size());
    for (const Tensor& img : data.images) {
        ctx.patches.push_back(patchify(img, ckpt.config));
    }
    ctx.labels = data.labels;

    if (regime_has_decoder(loss_regime)) {
        ctx.targets.reserve(ctx.patches.size());
        for (const Tensor& p : ctx.patches) {
            ctx.targets.push_back(ckpt.meta.per_patch_norm ? normalize_patch_targets(p) : p);
        }
        Rng mask_rng = Rng::stream(eval_seed, "eval-mask");
        ctx.masks.reserve(ctx.patches.size());
        for (std::size_t i = 0; i < ctx.patches.size(); ++i) {
            ctx.masks.push_back(sample_mask(ckpt.config.n_patches(), ckpt.meta.mask_ratio, mask_rng));
        }
    }

    if (loss_regime == Regime::rcmae) {
        require(ckpt.teacher.has_value(), "rcmae evaluation needs teacher parameters in the checkpoint");
        ctx.teacher_preds.reserve(ctx.patches.size());
        for (std::size_t i = 0; i < ctx.patches.size(); ++i) {
            Graph g;
            BoundParams bp(g, *ckpt.teacher, false);
            Var pred = vit_reconstruct(g, bp, ckpt.config, ctx.patches[i], ctx.masks[i]);
            ctx.teacher_preds.push_back(g.value(pred));
        }
    }
    return ctx;
}

double eval_dataset_loss(const EvalContext& ctx, const ParameterSet& params) {
    require(!ctx.patches.empty(), "evaluation dataset is empty");
    double acc = 0.0;
    const std::size_t n = ctx.patches.size();
    for (std::size_t i = 0; i < n; ++i) {
        double li = 0.0;
        switch (ctx.loss_regime) {
        case Regime::supervised:
        case Regime::probe: {
            Graph g;
            BoundParams bp(g, params, false);
            Var logits = vit_classify(g, bp, ctx.config, ctx.patches[i]);
            li = cross_entropy(g.value(logits), ctx.labels[i]);
            break;
        }
        case Regime::mae: {
            Graph g;
            BoundParams bp(g, params, false);
            Var pred = vit_reconstruct(g, bp, ctx.config, ctx.patches[i], ctx.masks[i]);
            li = mae_loss(ctx.targets[i], g.value(pred), ctx.masks[i]);
            break;
        }
        case Regime::rcmae: {
            Graph g;
            BoundParams bp(g, params, false);
            Var pred = vit_reconstruct(g, bp, ctx.config, ctx.patches[i], ctx.masks[i]);
            li = rc_mae_loss(ctx.targets[i], g.value(pred), ctx.teacher_preds[i], ctx.masks[i],
                             ctx.consistency_weight);
            break;
        }
        }
        if (!std::isfinite(li)) {
            return li;
        }
        acc += li;
    }
    return acc * (1.0 / static_cast<double>(n));
}

LossEval make_loss_eval(const EvalContext& ctx) {
    return [&ctx](const ParameterSet& params) { return eval_dataset_loss(ctx, params); };
}

void restrict_directions_to_head(DirectionPair& dir) {
    for (ParameterSet* ps : {&dir.delta, &dir.eta}) {
        for (std::size_t i = 0; i < ps->size(); ++i) {
            if (!ps->name(i).starts_with("head.")) {
                ps->value(i) = Tensor::zeros(ps->value(i).shape());
            }
        }
    }
}

void write_loss_history_csv(const std::string& path, const std::vector<double>& epoch_loss) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("cannot open " + path + " for writing");
    }
    f << "epoch,mean_loss\n";
    char buf[40];
    for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%.17g", epoch_loss[e]);
        f << e << ',' << buf << '\n';
    }
}

namespace {

json curvature_to_json(const CurvatureReport& rep) {
    json j;
    j["convexity_fraction"] = rep.convexity_fraction;
    j["flatness_radius"] = rep.flatness_radius;
    j["loss_range"] = rep.loss_range;
    j["center_gap"] = rep.center_gap;
    j["epsilon"] = rep.epsilon;
    return j;
}

} // namespace

void write_grid_meta(const std::string& path, const LandscapeGrid& grid, const ViTConfig& config,
                     const GridMetaInfo& info, const CurvatureReport& rep) {
    json j;
    j["regime"] = to_string(info.loss_regime);
    j["direction_seed"] = info.direction_seed;
    j["eval_seed"] = info.eval_seed;
    j["data_seed"] = info.data_seed;
    j["eval_images"] = info.eval_images;
    j["config_hash"] = config_hash(config);
    j["resolution"] = grid.resolution();
    j["half_range"] = info.half_range;
    j["base_loss"] = grid.base_loss;
    j["filter_policy"] = filter_policy_name(info.perturb_aux);
    j["head_only"] = info.head_only;
    j["curvature"] = curvature_to_json(rep);
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("cannot open " + path + " for writing");
    }
    f << j.dump(2) << '\n';
}

namespace {

struct SeedArtifacts {
    Checkpoint supervised, mae, rcmae, probe;
    TrainResult supervised_result, mae_result, rcmae_result, probe_result;
};

Checkpoint to_checkpoint(const ViTModel& model, const TrainConfig& tc, std::uint64_t data_seed,
                         const TrainResult& tr) {
    Checkpoint c;
    c.config = model.config;
    c.meta.regime = tc.regime;
    c.meta.seed = tc.seed;
    c.meta.data_seed = data_seed;
    c.meta.epochs = tc.epochs;
    c.meta.final_loss = tr.epoch_loss.empty() ? -1.0 : tr.epoch_loss.back();
    c.meta.mask_ratio = tc.mask_ratio;
    c.meta.ema_decay = tc.ema_decay;
    c.meta.consistency_weight = tc.consistency_weight;
    c.meta.per_patch_norm = tc.per_patch_norm;
    c.meta.probe_accuracy = tr.probe_accuracy;
    c.params = model.params;
    c.teacher = tr.teacher;
    return c;
}

// landscape for one checkpoint: directions seeded per run, normalized
// against the trained weights, evaluated over the shared eval set
struct GridOutcome {
    LandscapeGrid grid;
    CurvatureReport report;
};

GridOutcome landscape_for(const Checkpoint& ckpt, Regime loss_regime, const Dataset& eval_data,
                          std::uint64_t direction_seed, std::uint64_t eval_seed, int resolution,
                          double half_range, int workers) {
    EvalContext ctx = make_eval_context(ckpt, loss_regime, eval_data, eval_seed);
    DirectionPair dir = sample_directions(ckpt.params, direction_seed);
    normalize_pair(dir, ckpt.params);
    GridOutcome out;
    out.grid = evaluate_grid(ckpt.params, make_loss_eval(ctx), dir, resolution, half_range, workers);
    out.grid.regime = to_string(loss_regime);
    out.report = curvature_report(out.grid, default_flatness_epsilon(out.grid.base_loss));
    return out;
}

void emit_grid_files(const std::string& stem, const GridOutcome& go, const Checkpoint& ckpt,
                     Regime loss_regime, const GridMetaInfo& info, bool figures) {
    write_grid_csv(stem + "_grid.csv", go.grid);
    write_grid_meta(stem + "_meta.json", go.grid, ckpt.config, info, go.report);
    if (figures) {
        RenderSpec spec;
        spec.mode = RenderSpec::Mode::both;
        spec.log_scale = regime_has_decoder(loss_regime);
        std::ofstream f(stem + ".svg", std::ios::trunc);
        f << render_svg(go.grid, spec);
    }
}

} // namespace

ReproduceSummary run_reproduce(const ReproduceConfig& rc, std::ostream& log) {
    namespace fs = std::filesystem;
    fs::create_directories(rc.out_dir);
    ReproduceSummary summary;

    for (int k = 0; k < rc.n_seeds; ++k) {
        const std::uint64_t seed = rc.seed_base + static_cast<std::uint64_t>(k);
        const std::string seed_dir = rc.out_dir + "/seed" + std::to_string(seed);
        fs::create_directories(seed_dir);
        log << "[seed " << seed << "] training supervised / mae / rcmae..." << std::endl;

        const Dataset train_data = generate_synthetic(rc.train_images, rc.model, rc.k_classes, seed, "train");
        const Dataset eval_data = generate_synthetic(rc.eval_images, rc.model, rc.k_classes, seed, "eval");

        TrainConfig base;
        base.batch_size = rc.batch_size;
        base.lr = rc.lr;
        base.weight_decay = rc.weight_decay;
        base.seed = seed;
        base.mask_ratio = rc.mask_ratio;
        base.ema_decay = rc.ema_decay;

        SeedArtifacts art;

        { // supervised baseline, from scratch
            Rng init = Rng::stream(seed, "init");
            ViTModel model = make_vit(rc.model, false, true, init);
            TrainConfig tc = base;
            tc.regime = Regime::supervised;
            tc.epochs = rc.supervised_epochs;
            art.supervised_result = train(model, train_data, tc);
            art.supervised = to_checkpoint(model, tc, seed, art.supervised_result);
            save_checkpoint(seed_dir + "/supervised.ckpt", art.supervised);
            write_loss_history_csv(seed_dir + "/supervised_history.csv", art.supervised_result.epoch_loss);
        }
        { // mae pretraining
            Rng init = Rng::stream(seed, "init");
            ViTModel model = make_vit(rc.model, true, false, init);
            TrainConfig tc = base;
            tc.regime = Regime::mae;
            tc.epochs = rc.pretrain_epochs;
            art.mae_result = train(model, train_data, tc);
            art.mae = to_checkpoint(model, tc, seed, art.mae_result);
            save_checkpoint(seed_dir + "/mae.ckpt", art.mae);
            write_loss_history_csv(seed_dir + "/mae_history.csv", art.mae_result.epoch_loss);
        }
        { // rcmae pretraining
            Rng init = Rng::stream(seed, "init");
            ViTModel model = make_vit(rc.model, true, false, init);
            TrainConfig tc = base;
            tc.regime = Regime::rcmae;
            tc.epochs = rc.pretrain_epochs;
            art.rcmae_result = train(model, train_data, tc);
            art.rcmae = to_checkpoint(model, tc, seed, art.rcmae_result);
            save_checkpoint(seed_dir + "/rcmae.ckpt", art.rcmae);
            write_loss_history_csv(seed_dir + "/rcmae_history.csv", art.rcmae_result.epoch_loss);
        }
        { // linear probe on the frozen mae encoder
            Rng head_init = Rng::stream(seed, "probe-head");
            ViTModel model = make_vit(rc.model, false, true, head_init);
            for (std::size_t i = 0; i < model.params.size(); ++i) {
                const std::string& n = model.params.name(i);
                if (!n.starts_with("head.")) {
                    model.params.value(i) = art.mae.params.at(n);
                }
            }
            TrainConfig tc = base;
            tc.regime = Regime::probe;
            tc.epochs = rc.probe_epochs;
            art.probe_result = linear_probe(model, train_data, eval_data, tc);
            art.probe = to_checkpoint(model, tc, seed, art.probe_result);
            save_checkpoint(seed_dir + "/probe.ckpt", art.probe);
            write_loss_history_csv(seed_dir + "/probe_history.csv", art.probe_result.epoch_loss);
        }

        log << "[seed " << seed << "] evaluating landscapes..." << std::endl;
        SeedReport rep;
        rep.seed = seed;
        rep.probe_accuracy = art.probe_result.probe_accuracy;
        rep.supervised_final_loss = art.supervised.meta.final_loss;
        rep.mae_final_loss = art.mae.meta.final_loss;
        rep.rcmae_final_loss = art.rcmae.meta.final_loss;

        const std::uint64_t dir_seed = seed;
        const std::uint64_t eval_seed = seed;
        GridMetaInfo info;
        info.direction_seed = dir_seed;
        info.eval_seed = eval_seed;
        info.data_seed = seed;
        info.eval_images = rc.eval_images;
        info.half_range = rc.half_range;

        struct Job {
            const Checkpoint* ckpt;
            Regime loss;
            const char* stem;
            CurvatureReport* out;
        };
        const Job jobs[] = {
            {&art.supervised, Regime::supervised, "supervised", &rep.supervised},
            {&art.mae, Regime::mae, "mae", &rep.mae},
            {&art.rcmae, Regime::rcmae, "rcmae", &rep.rcmae},
            {&art.probe, Regime::probe, "probe", &rep.probe},
        };
        for (const Job& job : jobs) {
            GridOutcome go = landscape_for(*job.ckpt, job.loss, eval_data, dir_seed, eval_seed,
                                           rc.resolution, rc.half_range, rc.workers);
            info.loss_regime = job.loss;
            emit_grid_files(seed_dir + "/" + job.stem, go, *job.ckpt, job.loss, info, rc.write_figures);
            *job.out = go.report;
            log << "  " << job.stem << ": base_loss=" << go.grid.base_loss
                << " convexity=" << go.report.convexity_fraction
                << " flatness_radius=" << go.report.flatness_radius << std::endl;
        }

        summary.seeds.push_back(rep);
        if (rep.rcmae.convexity_fraction >= rep.mae.convexity_fraction) {
            summary.convexity_wins += 1;
        }
        if (rep.probe.flatness_radius >= rep.supervised.flatness_radius) {
            summary.flatness_wins += 1;
        }
    }

    const int need = (rc.n_seeds * 3 + 4) / 5; // 3-of-5 scaled to the seed count
    summary.convexity_pass = summary.convexity_wins >= need;
    summary.flatness_pass = summary.flatness_wins >= need;

    write_reproduce_summary(rc.out_dir + "/summary.json", summary);
    {
        std::ofstream f(rc.out_dir + "/summary.txt", std::ios::trunc);
        f << reproduce_table(summary);
    }
    log << reproduce_table(summary);
    return summary;
}

void write_reproduce_summary(const std::string& path, const ReproduceSummary& s) {
    json j;
    json seeds = json::array();
    for (const SeedReport& r : s.seeds) {
        json e;
        e["seed"] = r.seed;
        e["supervised"] = curvature_to_json(r.supervised);
        e["mae"] = curvature_to_json(r.mae);
        e["rcmae"] = curvature_to_json(r.rcmae);
        e["probe"] = curvature_to_json(r.probe);
        e["probe_accuracy"] = r.probe_accuracy;
        e["supervised_final_loss"] = r.supervised_final_loss;
        e["mae_final_loss"] = r.mae_final_loss;
        e["rcmae_final_loss"] = r.rcmae_final_loss;
        seeds.push_back(std::move(e));
    }
    j["seeds"] = std::move(seeds);
    j["convexity_wins"] = s.convexity_wins;
    j["flatness_wins"] = s.flatness_wins;
    j["convexity_pass"] = s.convexity_pass;
    j["flatness_pass"] = s.flatness_pass;
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("cannot open " + path + " for writing");
    }
    f << j.dump(2) << '\n';
}

std::string reproduce_table(const ReproduceSummary& s) {
    std::ostringstream os;
    char line[256];
    os << "\nqualitative comparison (pretraining: convexity fraction; cross-entropy: flatness radius)\n";
    os << "  seed |  mae cvx | rcmae cvx | rc>=mae |  sup flat | probe flat | probe>=sup\n";
    os << "  -----+----------+-----------+---------+-----------+------------+-----------\n";
    for (const SeedReport& r : s.seeds) {
        std::snprintf(line, sizeof(line), "  %4llu | %8.4f | %9.4f | %7s | %9.4f | %10.4f | %s\n",
                      static_cast<unsigned long long>(r.seed), r.mae.convexity_fraction,
                      r.rcmae.convexity_fraction,
                      r.rcmae.convexity_fraction >= r.mae.convexity_fraction ? "yes" : "no",
                      r.supervised.flatness_radius, r.probe.flatness_radius,
                      r.probe.flatness_radius >= r.supervised.flatness_radius ? "yes" : "no");
        os << line;
    }
    os << "  rcmae convexity >= mae in " << s.convexity_wins << "/" << s.seeds.size()
       << " seeds -> " << (s.convexity_pass ? "pass" : "fail") << "\n";
    os << "  probe flatness >= supervised in " << s.flatness_wins << "/" << s.seeds.size()
       << " seeds -> " << (s.flatness_pass ? "pass" : "fail") << "\n";
    return os.str();
}

} // namespace vitscape
