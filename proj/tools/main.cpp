// vitscape command line: train tiny ViTs under supervised / mae / rcmae
// regimes, probe frozen encoders, evaluate filter-normalized loss
// landscapes around the trained weights, and render the grids as SVG.

#include "vitscape/checkpoint.hpp"
#include "vitscape/dataset.hpp"
#include "vitscape/errors.hpp"
#include "vitscape/landscape.hpp"
#include "vitscape/pipeline.hpp"
#include "vitscape/render.hpp"
#include "vitscape/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace vitscape;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kDefaultEvalSeed = 1000003;

std::string joined(const std::string& dir, const std::string& name) {
    if (name.empty() || fs::path(name).is_absolute()) {
        return name;
    }
    return (fs::path(dir) / name).string();
}

void print_loss(double v) {
    std::printf("%.17g\n", v);
}

struct ModelFlags {
    ViTConfig cfg;

    void attach(CLI::App* cmd) {
        cmd->add_option("--image-size", cfg.image_size, "image height and width in pixels");
        cmd->add_option("--channels", cfg.channels, "image channels");
        cmd->add_option("--patch-size", cfg.patch_size, "patch edge in pixels");
        cmd->add_option("--enc-depth", cfg.encoder_depth, "encoder blocks");
        cmd->add_option("--dec-depth", cfg.decoder_depth, "decoder blocks");
        cmd->add_option("--embed-dim", cfg.embed_dim, "encoder embedding dim");
        cmd->add_option("--decoder-dim", cfg.decoder_dim, "decoder embedding dim");
        cmd->add_option("--heads", cfg.heads, "attention heads");
        cmd->add_option("--mlp-ratio", cfg.mlp_ratio, "mlp hidden ratio");
        cmd->add_option("--classes", cfg.num_classes, "classifier classes");
    }
};

// Resolves which loss a landscape/eval run uses over which parameter set.
// The checkpoint's own regime is the default; explicit --loss overrides are
// validated against what the stored model can actually compute.
Checkpoint resolve_loss_choice(Checkpoint ck, Regime requested, const std::optional<Checkpoint>& probe_ck) {
    const Regime stored = ck.meta.regime;
    if (stored == requested) {
        return ck;
    }
    const bool stored_ce = !regime_has_decoder(stored);
    const bool requested_ce = !regime_has_decoder(requested);
    if (stored_ce && requested_ce) {
        // supervised and probe share the cross-entropy loss and layout
        ck.meta.regime = requested;
        return ck;
    }
    if (stored == Regime::rcmae && requested == Regime::mae) {
        ck.meta.regime = Regime::mae;
        ck.teacher.reset();
        return ck;
    }
    if (regime_has_decoder(stored) && requested == Regime::probe) {
        if (!probe_ck) {
            throw ContractError("checkpoint regime " + to_string(stored) + " does not match requested loss " +
                                to_string(requested) + "; pass --probe-checkpoint to evaluate probe loss over "
                                "this pretrained encoder");
        }
        if (regime_has_decoder(probe_ck->meta.regime)) {
            throw ContractError("--probe-checkpoint must hold a classifier model, got regime " +
                                to_string(probe_ck->meta.regime));
        }
        if (!(probe_ck->config == ck.config)) {
            throw ContractError("probe checkpoint config does not match the pretrained checkpoint");
        }
        Checkpoint composite;
        composite.config = ck.config;
        composite.meta = probe_ck->meta;
        composite.meta.regime = Regime::probe;
        composite.meta.data_seed = ck.meta.data_seed;
        for (const std::string& name : vit_param_names(ck.config, false, true)) {
            if (name.starts_with("head.")) {
                composite.params.add(name, probe_ck->params.at(name));
            } else {
                composite.params.add(name, ck.params.at(name));
            }
        }
        return composite;
    }
    throw ContractError("checkpoint regime " + to_string(stored) + " does not match requested loss " +
                        to_string(requested));
}

Dataset eval_dataset_for(const Checkpoint& ck, int eval_images, std::uint64_t data_seed) {
    return generate_synthetic(eval_images, ck.config, ck.config.num_classes, data_seed, "eval");
}

int run_app(int argc, char** argv) {
    CLI::App app{"loss-landscape laboratory for tiny vision transformers"};
    app.require_subcommand(1);
    app.fallthrough(); // global options may follow the subcommand

    std::string out_dir = ".";
    app.add_option("--out-dir", out_dir, "directory for outputs")
        ->envname("VITSCAPE_OUT_DIR");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train a model from scratch");
    std::string regime_name = "mae";
    TrainConfig tc;
    ModelFlags train_model;
    int train_images = 512;
    std::uint64_t data_seed = 0;
    bool data_seed_given = false;
    std::string ckpt_out = "", history_out = "";
    train_cmd->add_option("--regime", regime_name, "supervised | mae | rcmae")
        ->check(CLI::IsMember({"supervised", "mae", "rcmae"}));
    train_cmd->add_option("--seed", tc.seed, "run seed (init, data order, masks)");
    train_cmd->add_option("--epochs", tc.epochs, "training epochs")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--batch-size", tc.batch_size, "minibatch size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", tc.lr, "learning rate");
    train_cmd->add_option("--wd", tc.weight_decay, "decoupled weight decay");
    train_cmd->add_option("--beta1", tc.beta1, "adam beta1");
    train_cmd->add_option("--beta2", tc.beta2, "adam beta2");
    train_cmd->add_option("--mask-ratio", tc.mask_ratio, "masked patch fraction")
        ->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--ema-decay", tc.ema_decay, "teacher ema decay (rcmae)")
        ->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--consistency-weight", tc.consistency_weight, "consistency term weight (rcmae)");
    train_cmd->add_flag("--per-patch-norm", tc.per_patch_norm, "normalize reconstruction targets per patch");
    train_cmd->add_option("--train-images", train_images, "synthetic training images");
    train_cmd->add_option("--data-seed", data_seed, "synthetic dataset seed (default: --seed)")
        ->each([&](const std::string&) { data_seed_given = true; });
    train_cmd->add_option("--out", ckpt_out, "checkpoint path (default <regime>_seed<seed>.ckpt)");
    train_cmd->add_option("--history", history_out, "loss history csv path");
    train_model.attach(train_cmd);

    // ---- probe ----
    auto* probe_cmd = app.add_subcommand("probe", "train a linear classifier on a frozen encoder");
    std::string probe_src;
    TrainConfig pc;
    pc.epochs = 30;
    pc.regime = Regime::probe;
    int probe_train_images = 512, probe_eval_images = 128;
    std::uint64_t probe_data_seed = 0;
    bool probe_data_seed_given = false;
    std::string probe_out = "", probe_history = "";
    probe_cmd->add_option("--checkpoint", probe_src, "pretrained checkpoint to probe")->required();
    probe_cmd->add_option("--seed", pc.seed, "probe seed (head init, data order)");
    probe_cmd->add_option("--epochs", pc.epochs, "probe epochs");
    probe_cmd->add_option("--batch-size", pc.batch_size, "minibatch size");
    probe_cmd->add_option("--lr", pc.lr, "learning rate");
    probe_cmd->add_option("--wd", pc.weight_decay, "decoupled weight decay");
    probe_cmd->add_option("--train-images", probe_train_images, "synthetic training images");
    probe_cmd->add_option("--eval-images", probe_eval_images, "held-out images for accuracy");
    probe_cmd->add_option("--data-seed", probe_data_seed, "dataset seed (default: checkpoint data seed)")
        ->each([&](const std::string&) { probe_data_seed_given = true; });
    probe_cmd->add_option("--out", probe_out, "output checkpoint path");
    probe_cmd->add_option("--history", probe_history, "loss history csv path");

    // ---- eval-loss ----
    auto* eval_cmd = app.add_subcommand("eval-loss", "print the evaluation loss of a checkpoint");
    std::string eval_src, eval_loss_name, eval_probe_src;
    int eval_images = 128;
    std::uint64_t eval_seed = kDefaultEvalSeed, eval_data_seed = 0;
    bool eval_data_seed_given = false;
    eval_cmd->add_option("--checkpoint", eval_src, "checkpoint to evaluate")->required();
    eval_cmd->add_option("--loss", eval_loss_name, "loss regime override (default: checkpoint regime)")
        ->check(CLI::IsMember({"supervised", "mae", "rcmae", "probe"}));
    eval_cmd->add_option("--probe-checkpoint", eval_probe_src, "probe head checkpoint for probe loss overrides");
    eval_cmd->add_option("--eval-images", eval_images, "evaluation images");
    eval_cmd->add_option("--eval-seed", eval_seed, "evaluation mask seed");
    eval_cmd->add_option("--data-seed", eval_data_seed, "dataset seed (default: checkpoint data seed)")
        ->each([&](const std::string&) { eval_data_seed_given = true; });

    // ---- landscape ----
    auto* land_cmd = app.add_subcommand("landscape", "evaluate the loss grid around a checkpoint");
    std::string land_src, land_loss_name, land_probe_src, grid_out = "", meta_out = "";
    int resolution = 41, workers = 1, land_eval_images = 128;
    double half_range = 1.0;
    std::uint64_t direction_seed = 0, land_eval_seed = kDefaultEvalSeed, land_data_seed = 0;
    bool land_data_seed_given = false, perturb_aux = false, head_only = false;
    land_cmd->add_option("--checkpoint", land_src, "checkpoint holding the trained weights")->required();
    land_cmd->add_option("--loss", land_loss_name, "loss regime override (default: checkpoint regime)")
        ->check(CLI::IsMember({"supervised", "mae", "rcmae", "probe"}));
    land_cmd->add_option("--probe-checkpoint", land_probe_src, "probe head checkpoint for probe loss overrides");
    land_cmd->add_option("--resolution", resolution, "odd grid resolution");
    land_cmd->add_option("--half-range", half_range, "alpha/beta extent");
    land_cmd->add_option("--direction-seed", direction_seed, "gaussian direction seed");
    land_cmd->add_option("--workers", workers, "grid worker threads");
    land_cmd->add_option("--eval-images", land_eval_images, "evaluation images");
    land_cmd->add_option("--eval-seed", land_eval_seed, "evaluation mask seed");
    land_cmd->add_option("--data-seed", land_data_seed, "dataset seed (default: checkpoint data seed)")
        ->each([&](const std::string&) { land_data_seed_given = true; });
    land_cmd->add_flag("--perturb-aux", perturb_aux, "also perturb biases, norms and the mask token");
    land_cmd->add_flag("--head-only", head_only, "restrict perturbation to the classifier head");
    land_cmd->add_option("--out", grid_out, "grid csv path (default landscape.csv)");
    land_cmd->add_option("--meta", meta_out, "metadata json path (default landscape_meta.json)");

    // ---- render ----
    auto* render_cmd = app.add_subcommand("render", "render a grid csv as an SVG figure");
    std::string render_grid, render_meta, render_out = "", mode_name = "both";
    int levels = 8;
    bool flag_log = false, flag_no_log = false;
    render_cmd->add_option("--grid", render_grid, "grid csv")->required();
    render_cmd->add_option("--meta", render_meta, "metadata json (regime, used for log default)");
    render_cmd->add_option("--mode", mode_name, "contour | heatmap | both")
        ->check(CLI::IsMember({"contour", "heatmap", "both"}));
    render_cmd->add_option("--levels", levels, "contour levels");
    render_cmd->add_flag("--log", flag_log, "log-scale colors and levels");
    render_cmd->add_flag("--no-log", flag_no_log, "force linear scale");
    render_cmd->add_option("--out", render_out, "svg path (default landscape.svg)");

    // ---- compare ----
    auto* compare_cmd = app.add_subcommand("compare", "compare curvature metrics of two grids");
    std::string cmp_a, cmp_b, cmp_out;
    bool cmp_json = false;
    compare_cmd->add_option("--a", cmp_a, "first grid csv")->required();
    compare_cmd->add_option("--b", cmp_b, "second grid csv")->required();
    compare_cmd->add_flag("--json", cmp_json, "print machine-readable json");
    compare_cmd->add_option("--out", cmp_out, "also write the json report here");

    // ---- reproduce ----
    auto* repro_cmd = app.add_subcommand("reproduce", "full multi-seed pipeline with summary and figures");
    ReproduceConfig rc;
    rc.out_dir = "";
    repro_cmd->add_option("--seeds", rc.n_seeds, "number of seeds");
    repro_cmd->add_option("--seed-base", rc.seed_base, "first seed");
    repro_cmd->add_option("--train-images", rc.train_images, "training images per seed");
    repro_cmd->add_option("--eval-images", rc.eval_images, "landscape evaluation images");
    repro_cmd->add_option("--batch-size", rc.batch_size, "minibatch size");
    repro_cmd->add_option("--pretrain-epochs", rc.pretrain_epochs, "mae/rcmae epochs");
    repro_cmd->add_option("--supervised-epochs", rc.supervised_epochs, "supervised epochs");
    repro_cmd->add_option("--probe-epochs", rc.probe_epochs, "probe epochs");
    repro_cmd->add_option("--lr", rc.lr, "learning rate");
    repro_cmd->add_option("--wd", rc.weight_decay, "weight decay");
    repro_cmd->add_option("--mask-ratio", rc.mask_ratio, "mask ratio");
    repro_cmd->add_option("--ema-decay", rc.ema_decay, "teacher ema decay");
    repro_cmd->add_option("--resolution", rc.resolution, "landscape resolution");
    repro_cmd->add_option("--half-range", rc.half_range, "landscape extent");
    repro_cmd->add_option("--workers", rc.workers, "grid worker threads");
    bool no_figures = false;
    repro_cmd->add_flag("--no-figures", no_figures, "skip svg rendering");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // usage error
    }

    if (out_dir != "." && !out_dir.empty()) {
        fs::create_directories(out_dir);
    }

    if (train_cmd->parsed()) {
        tc.regime = regime_from_string(regime_name);
        train_model.cfg.validate();
        if (!data_seed_given) {
            data_seed = tc.seed;
        }
        const Dataset data =
            generate_synthetic(train_images, train_model.cfg, train_model.cfg.num_classes, data_seed, "train");
        Rng init = Rng::stream(tc.seed, "init");
        ViTModel model = make_vit(train_model.cfg, regime_has_decoder(tc.regime),
                                  !regime_has_decoder(tc.regime), init);
        const TrainResult result = train(model, data, tc);
        Checkpoint ck;
        ck.config = model.config;
        ck.meta.regime = tc.regime;
        ck.meta.seed = tc.seed;
        ck.meta.data_seed = data_seed;
        ck.meta.epochs = tc.epochs;
        ck.meta.final_loss = result.epoch_loss.empty() ? -1.0 : result.epoch_loss.back();
        ck.meta.mask_ratio = tc.mask_ratio;
        ck.meta.ema_decay = tc.ema_decay;
        ck.meta.consistency_weight = tc.consistency_weight;
        ck.meta.per_patch_norm = tc.per_patch_norm;
        ck.params = model.params;
        ck.teacher = result.teacher;
        if (ckpt_out.empty()) {
            ckpt_out = regime_name + "_seed" + std::to_string(tc.seed) + ".ckpt";
        }
        const std::string path = joined(out_dir, ckpt_out);
        save_checkpoint(path, ck);
        if (!history_out.empty()) {
            write_loss_history_csv(joined(out_dir, history_out), result.epoch_loss);
        }
        std::printf("checkpoint %s\n", path.c_str());
        std::printf("final_loss ");
        print_loss(ck.meta.final_loss);
        return 0;
    }

    if (probe_cmd->parsed()) {
        const Checkpoint src = load_checkpoint(probe_src);
        require(regime_has_decoder(src.meta.regime) || src.meta.regime == Regime::supervised,
                "probe needs a checkpoint with an encoder");
        if (!probe_data_seed_given) {
            probe_data_seed = src.meta.data_seed;
        }
        const Dataset train_data = generate_synthetic(probe_train_images, src.config,
                                                      src.config.num_classes, probe_data_seed, "train");
        const Dataset eval_data = generate_synthetic(probe_eval_images, src.config,
                                                     src.config.num_classes, probe_data_seed, "eval");
        Rng head_init = Rng::stream(pc.seed, "probe-head");
        ViTModel model = make_vit(src.config, false, true, head_init);
        for (std::size_t i = 0; i < model.params.size(); ++i) {
            const std::string& n = model.params.name(i);
            if (!n.starts_with("head.")) {
                model.params.value(i) = src.params.at(n);
            }
        }
        const TrainResult result = linear_probe(model, train_data, eval_data, pc);
        Checkpoint ck;
        ck.config = model.config;
        ck.meta.regime = Regime::probe;
        ck.meta.seed = pc.seed;
        ck.meta.data_seed = probe_data_seed;
        ck.meta.epochs = pc.epochs;
        ck.meta.final_loss = result.epoch_loss.empty() ? -1.0 : result.epoch_loss.back();
        ck.meta.probe_accuracy = result.probe_accuracy;
        ck.params = model.params;
        if (probe_out.empty()) {
            probe_out = "probe_seed" + std::to_string(pc.seed) + ".ckpt";
        }
        const std::string path = joined(out_dir, probe_out);
        save_checkpoint(path, ck);
        if (!probe_history.empty()) {
            write_loss_history_csv(joined(out_dir, probe_history), result.epoch_loss);
        }
        std::printf("checkpoint %s\n", path.c_str());
        std::printf("probe_accuracy %.6f\n", result.probe_accuracy);
        std::printf("final_loss ");
        print_loss(ck.meta.final_loss);
        return 0;
    }

    if (eval_cmd->parsed()) {
        Checkpoint ck = load_checkpoint(eval_src);
        const Regime requested =
            eval_loss_name.empty() ? ck.meta.regime : regime_from_string(eval_loss_name);
        std::optional<Checkpoint> probe_ck;
        if (!eval_probe_src.empty()) {
            probe_ck = load_checkpoint(eval_probe_src);
        }
        ck = resolve_loss_choice(std::move(ck), requested, probe_ck);
        if (!eval_data_seed_given) {
            eval_data_seed = ck.meta.data_seed;
        }
        const Dataset data = eval_dataset_for(ck, eval_images, eval_data_seed);
        const EvalContext ctx = make_eval_context(ck, ck.meta.regime, data, eval_seed);
        print_loss(eval_dataset_loss(ctx, ck.params));
        return 0;
    }

    if (land_cmd->parsed()) {
        Checkpoint ck = load_checkpoint(land_src);
        const Regime requested =
            land_loss_name.empty() ? ck.meta.regime : regime_from_string(land_loss_name);
        std::optional<Checkpoint> probe_ck;
        if (!land_probe_src.empty()) {
            probe_ck = load_checkpoint(land_probe_src);
        }
        ck = resolve_loss_choice(std::move(ck), requested, probe_ck);
        if (head_only) {
            require(!regime_has_decoder(ck.meta.regime), "--head-only needs a cross-entropy loss");
        }
        if (!land_data_seed_given) {
            land_data_seed = ck.meta.data_seed;
        }
        const Dataset data = eval_dataset_for(ck, land_eval_images, land_data_seed);
        const EvalContext ctx = make_eval_context(ck, ck.meta.regime, data, land_eval_seed);

        DirectionPair dir = sample_directions(ck.params, direction_seed);
        normalize_pair(dir, ck.params, perturb_aux);
        if (head_only) {
            restrict_directions_to_head(dir);
        }
        LandscapeGrid grid =
            evaluate_grid(ck.params, make_loss_eval(ctx), dir, resolution, half_range, workers);
        grid.regime = to_string(ck.meta.regime);
        const CurvatureReport rep =
            resolution >= 5 ? curvature_report(grid, default_flatness_epsilon(grid.base_loss))
                            : CurvatureReport{};

        const std::string grid_path = joined(out_dir, grid_out.empty() ? "landscape.csv" : grid_out);
        write_grid_csv(grid_path, grid);
        GridMetaInfo info;
        info.loss_regime = ck.meta.regime;
        info.direction_seed = direction_seed;
        info.eval_seed = land_eval_seed;
        info.data_seed = land_data_seed;
        info.eval_images = land_eval_images;
        info.half_range = half_range;
        info.perturb_aux = perturb_aux;
        info.head_only = head_only;
        const std::string meta_path =
            joined(out_dir, meta_out.empty() ? "landscape_meta.json" : meta_out);
        write_grid_meta(meta_path, grid, ck.config, info, rep);
        std::printf("grid %s\n", grid_path.c_str());
        std::printf("meta %s\n", meta_path.c_str());
        std::printf("base_loss ");
        print_loss(grid.base_loss);
        return 0;
    }

    if (render_cmd->parsed()) {
        LandscapeGrid grid = read_grid_csv(render_grid);
        RenderSpec spec;
        spec.contour_levels = levels;
        if (mode_name == "contour") {
            spec.mode = RenderSpec::Mode::contour;
        } else if (mode_name == "heatmap") {
            spec.mode = RenderSpec::Mode::heatmap;
        } else {
            spec.mode = RenderSpec::Mode::both;
        }
        if (!render_meta.empty()) {
            std::ifstream mf(render_meta);
            if (!mf) {
                throw FormatError("cannot open " + render_meta);
            }
            const auto meta = ordered_json::parse(mf);
            grid.regime = meta.value("regime", std::string{});
            // pretraining losses span orders of magnitude: log by default
            spec.log_scale = grid.regime == "mae" || grid.regime == "rcmae";
        }
        if (flag_log) {
            spec.log_scale = true;
        }
        if (flag_no_log) {
            spec.log_scale = false;
        }
        const std::string svg = render_svg(grid, spec);
        const std::string path = joined(out_dir, render_out.empty() ? "landscape.svg" : render_out);
        std::ofstream f(path, std::ios::trunc);
        if (!f) {
            throw FormatError("cannot open " + path + " for writing");
        }
        f << svg;
        std::printf("svg %s\n", path.c_str());
        return 0;
    }

    if (compare_cmd->parsed()) {
        const LandscapeGrid a = read_grid_csv(cmp_a);
        const LandscapeGrid b = read_grid_csv(cmp_b);
        if (a.alphas != b.alphas || a.betas != b.betas) {
            throw ContractError("grids disagree on coordinates: " + cmp_a + " vs " + cmp_b);
        }
        const CurvatureReport ra = curvature_report(a, default_flatness_epsilon(a.base_loss));
        const CurvatureReport rb = curvature_report(b, default_flatness_epsilon(b.base_loss));
        ordered_json j;
        auto put = [](const CurvatureReport& r) {
            ordered_json e;
            e["convexity_fraction"] = r.convexity_fraction;
            e["flatness_radius"] = r.flatness_radius;
            e["loss_range"] = r.loss_range;
            e["center_gap"] = r.center_gap;
            e["epsilon"] = r.epsilon;
            return e;
        };
        j["a"] = put(ra);
        j["b"] = put(rb);
        ordered_json d;
        d["convexity_fraction"] = rb.convexity_fraction - ra.convexity_fraction;
        d["flatness_radius"] = rb.flatness_radius - ra.flatness_radius;
        d["loss_range"] = rb.loss_range - ra.loss_range;
        j["delta_b_minus_a"] = std::move(d);
        if (cmp_json) {
            std::printf("%s\n", j.dump(2).c_str());
        } else {
            std::printf("metric                 a            b            delta(b-a)\n");
            std::printf("convexity_fraction  %12.6f %12.6f %12.6f\n", ra.convexity_fraction,
                        rb.convexity_fraction, rb.convexity_fraction - ra.convexity_fraction);
            std::printf("flatness_radius     %12.6f %12.6f %12.6f\n", ra.flatness_radius, rb.flatness_radius,
                        rb.flatness_radius - ra.flatness_radius);
            std::printf("loss_range          %12.6g %12.6g %12.6g\n", ra.loss_range, rb.loss_range,
                        rb.loss_range - ra.loss_range);
            std::printf("center_gap          %12.6g %12.6g %12.6g\n", ra.center_gap, rb.center_gap,
                        rb.center_gap - ra.center_gap);
        }
        if (!cmp_out.empty()) {
            std::ofstream f(joined(out_dir, cmp_out), std::ios::trunc);
            f << j.dump(2) << '\n';
        }
        return 0;
    }

    if (repro_cmd->parsed()) {
        rc.write_figures = !no_figures;
        if (rc.out_dir.empty()) {
            rc.out_dir = joined(out_dir, "reproduce-out");
        }
        run_reproduce(rc, std::cout);
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_app(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
