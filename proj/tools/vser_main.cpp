// vser: speech emotion recognition with vertically patched vision
// transformers. Subcommands cover the full pipeline: cache preparation,
// the three training stages, evaluation, attention-mask figures and the
// analytic operation count.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "vser/augment.hpp"
#include "vser/config.hpp"
#include "vser/dataset.hpp"
#include "vser/dsp.hpp"
#include "vser/error.hpp"
#include "vser/evalviz.hpp"
#include "vser/gemm.hpp"
#include "vser/image_io.hpp"
#include "vser/prepare.hpp"
#include "vser/rng.hpp"
#include "vser/trainer.hpp"

namespace fs = std::filesystem;
using namespace vser;

namespace {

constexpr const char* kVersion = "0.1.0";

struct GlobalArgs {
    std::string config_path;
    std::string run_dir = "run";
    std::string dataset;
    int64_t seed = -1;
    int threads = 0;  // 0 = hardware concurrency; 1 = strict determinism
};

RunConfig effective_config(const GlobalArgs& g) {
    RunConfig cfg = g.config_path.empty() ? RunConfig::defaults()
                                          : RunConfig::load(g.config_path);
    if (g.seed >= 0) cfg.set_int("seed", g.seed);
    if (!g.dataset.empty()) cfg.set("dataset.name", g.dataset);
    cfg.validate();
    return cfg;
}

StageConfig stage_config_from(const RunConfig& cfg) {
    StageConfig sc;
    sc.epochs = static_cast<int>(cfg.get_int("train.epochs"));
    sc.batch_size = static_cast<int>(cfg.get_int("train.batch_size"));
    sc.lr0 = cfg.get_double("train.lr0");
    sc.lr_halving_period = static_cast<int>(cfg.get_int("train.lr_halving_period"));
    sc.alpha = cfg.get_double("train.alpha");
    sc.validate();
    return sc;
}

ModelSpec teacher_spec_from(const RunConfig& cfg, int n_classes) {
    ModelSpec s;
    if (cfg.get_str("model.teacher_patch") == "square") {
        // 16x16-patch comparison network for the attention-mask experiment
        s = ModelSpec::square_variant(n_classes);
        s.depth = static_cast<int>(cfg.get_int("model.teacher_depth"));
        s.heads = static_cast<int>(cfg.get_int("model.teacher_heads"));
    } else {
        s = ModelSpec::teacher(
            static_cast<int>(cfg.get_int("model.teacher_depth")),
            static_cast<int>(cfg.get_int("model.teacher_heads")), n_classes);
    }
    s.token_dim = static_cast<int>(cfg.get_int("model.token_dim"));
    s.mlp_hidden = static_cast<int>(cfg.get_int("model.mlp_hidden"));
    s.classifier_hidden = static_cast<int>(cfg.get_int("model.classifier_hidden"));
    s.validate();
    return s;
}

ModelSpec student_spec_from(const RunConfig& cfg, int n_classes) {
    auto s = ModelSpec::student(n_classes);
    s.depth = static_cast<int>(cfg.get_int("model.student_depth"));
    s.heads = static_cast<int>(cfg.get_int("model.student_heads"));
    s.token_dim = static_cast<int>(cfg.get_int("model.token_dim"));
    s.mlp_hidden = static_cast<int>(cfg.get_int("model.mlp_hidden"));
    s.classifier_hidden = static_cast<int>(cfg.get_int("model.classifier_hidden"));
    s.validate();
    return s;
}

// Enough metadata to reproduce the run: config snapshot, seed, version.
void write_run_metadata(const fs::path& dir, const RunConfig& cfg,
                        int threads) {
    fs::create_directories(dir);
    std::ofstream os(dir / "run_info.txt");
    os << "vser_version = " << kVersion << "\n";
    os << "threads = " << threads << "\n";
    std::ofstream snap(dir / "config_snapshot.txt");
    snap << cfg.serialize();
}

void require_checkpoint(const fs::path& p, const char* hint) {
    if (!fs::exists(p))
        throw PrereqError("missing checkpoint " + p.string() + " (" + hint + ")");
}

int run_prepare(const GlobalArgs& g) {
    const auto cfg = effective_config(g);
    const auto stats = prepare_cache(cfg);
    std::printf("cache %s: %d computed, %d verified, %d failed; "
                "%d train files, %d test files\n",
                cfg.get_str("cache.dir").c_str(), stats.computed,
                stats.verified, stats.failed, stats.train_files,
                stats.test_files);
    return 0;
}

int run_train_teacher(const GlobalArgs& g) {
    const auto cfg = effective_config(g);
    const auto data = load_prepared(cfg.get_str("cache.dir"));
    const auto spec = teacher_spec_from(cfg, data.n_classes);
    const fs::path out = fs::path(g.run_dir) / "stage_a";
    write_run_metadata(out, cfg, g.threads);
    const auto run =
        train_stage_a(spec, data, stage_config_from(cfg),
                      static_cast<uint64_t>(cfg.get_int("seed")), out);
    std::printf("stage (a) done: best test WA %s at epoch %d -> %s\n",
                format_wa_percent(run.best_test_wa).c_str(), run.best_epoch,
                run.best_checkpoint.string().c_str());
    return 0;
}

int run_match(const GlobalArgs& g, const std::string& teacher_ckpt_arg) {
    const auto cfg = effective_config(g);
    const auto data = load_prepared(cfg.get_str("cache.dir"));
    const fs::path teacher_ckpt =
        teacher_ckpt_arg.empty()
            ? fs::path(g.run_dir) / "stage_a" / "best.vsck"
            : fs::path(teacher_ckpt_arg);
    require_checkpoint(teacher_ckpt, "run `train-teacher` first");
    const auto spec = student_spec_from(cfg, data.n_classes);
    const fs::path out = fs::path(g.run_dir) / "stage_b";
    write_run_metadata(out, cfg, g.threads);
    const auto run =
        train_stage_b(teacher_ckpt, spec, data, stage_config_from(cfg),
                      static_cast<uint64_t>(cfg.get_int("seed")), out);
    std::printf("stage (b) done: matched student -> %s\n",
                run.best_checkpoint.string().c_str());
    return 0;
}

int run_train_student(const GlobalArgs& g, const std::string& teacher_ckpt_arg,
                      const std::string& student_ckpt_arg) {
    const auto cfg = effective_config(g);
    const auto data = load_prepared(cfg.get_str("cache.dir"));
    const fs::path teacher_ckpt =
        teacher_ckpt_arg.empty()
            ? fs::path(g.run_dir) / "stage_a" / "best.vsck"
            : fs::path(teacher_ckpt_arg);
    const fs::path student_ckpt =
        student_ckpt_arg.empty()
            ? fs::path(g.run_dir) / "stage_b" / "best.vsck"
            : fs::path(student_ckpt_arg);
    require_checkpoint(teacher_ckpt, "run `train-teacher` first");
    require_checkpoint(student_ckpt, "run `match` first");
    const fs::path out = fs::path(g.run_dir) / "stage_c";
    write_run_metadata(out, cfg, g.threads);
    const auto run =
        train_stage_c(student_ckpt, teacher_ckpt, data, stage_config_from(cfg),
                      static_cast<uint64_t>(cfg.get_int("seed")), out);
    std::printf("stage (c) done: best test WA %s at epoch %d -> %s\n",
                format_wa_percent(run.best_test_wa).c_str(), run.best_epoch,
                run.best_checkpoint.string().c_str());
    return 0;
}

int run_eval(const GlobalArgs& g, const std::string& ckpt_arg) {
    const auto cfg = effective_config(g);
    const auto data = load_prepared(cfg.get_str("cache.dir"));
    const fs::path ckpt = ckpt_arg.empty()
                              ? fs::path(g.run_dir) / "stage_c" / "best.vsck"
                              : fs::path(ckpt_arg);
    require_checkpoint(ckpt, "train a model or pass --checkpoint");
    auto model = VitModel<float>::load(ckpt);
    model.set_requires_grad(false);

    NoGradGuard ng;
    std::vector<int> preds, labels;
    for (const auto& ex : data.test) {
        const auto res = model.forward(ex.image);
        int best = 0;
        for (int i = 1; i < static_cast<int>(res.logits.size()); ++i)
            if (res.logits.value()[static_cast<size_t>(i)] >
                res.logits.value()[static_cast<size_t>(best)])
                best = i;
        preds.push_back(best);
        labels.push_back(ex.label);
    }
    const auto report = make_eval_report(preds, labels, data.label_names);
    std::printf("%s", report.to_text().c_str());
    fs::create_directories(g.run_dir);
    std::ofstream os(fs::path(g.run_dir) / "eval_report.txt");
    os << report.to_text();
    return 0;
}

int run_attend(const GlobalArgs& g, const std::string& ckpt_arg,
               const std::string& clip_arg, double sigma) {
    const auto cfg = effective_config(g);
    const fs::path ckpt = ckpt_arg.empty()
                              ? fs::path(g.run_dir) / "stage_c" / "best.vsck"
                              : fs::path(ckpt_arg);
    require_checkpoint(ckpt, "train a model or pass --checkpoint");
    auto model = VitModel<float>::load(ckpt);
    model.set_requires_grad(false);

    fs::path clip_path = clip_arg;
    if (clip_arg.empty()) {
        const auto manifest =
            ingest(cfg.get_str("dataset.root"), cfg.get_str("dataset.name"));
        clip_path = manifest.entries.front().path;
    }
    const auto seed = static_cast<uint64_t>(cfg.get_int("seed"));
    const auto base = standardize(load_wav(clip_path));

    // original plus one variant per augmentation kind, as a 2x2 panel
    std::vector<AudioClip> variants = {base};
    for (auto kind :
         {AugmentKind::noise, AugmentKind::time_shift, AugmentKind::speed}) {
        const char* name = augment_kind_name(kind);
        const auto spec = AugmentSpec::sample(
            kind, derive_seed(seed, clip_path.string(), std::string(name) + "-param"));
        variants.push_back(augment(base, spec,
                                   derive_seed(seed, clip_path.string(),
                                               std::string(name) + "-rng")));
    }

    const auto params = StftParams::make(
        static_cast<int>(cfg.get_int("stft.n_fft")),
        static_cast<int>(cfg.get_int("stft.hop")),
        static_cast<int>(cfg.get_int("stft.win_length")));
    const auto fb = mel_filterbank(kImageSize, params.n_fft, 16000);

    NoGradGuard ng;
    std::vector<Image> logmels, masks;
    for (const auto& v : variants) {
        auto img = clip_to_log_mel(v, params, fb);
        const auto res = model.forward(img);
        auto mask = extract_attention_mask(res, model.spec());
        masks.push_back(gaussian_smooth(mask, sigma).image);
        logmels.push_back(std::move(img));
    }
    fs::create_directories(g.run_dir);
    const fs::path mask_path = fs::path(g.run_dir) / "attention_panel.pgm";
    const fs::path mel_path = fs::path(g.run_dir) / "logmel_panel.pgm";
    emit_figure(masks, 2, 2, mask_path);
    emit_figure(logmels, 2, 2, mel_path);
    std::printf("wrote %s and %s\n", mask_path.string().c_str(),
                mel_path.string().c_str());
    return 0;
}

int run_flops(const GlobalArgs& g, const std::string& which) {
    const auto cfg = effective_config(g);
    const int n_classes =
        static_cast<int>(dataset_labels(cfg.get_str("dataset.name")).size());
    ModelSpec spec;
    if (which == "teacher") spec = teacher_spec_from(cfg, n_classes);
    else if (which == "student") spec = student_spec_from(cfg, n_classes);
    else if (which == "square") spec = ModelSpec::square_variant(n_classes);
    else throw InvalidConfig("--model must be teacher, student or square");
    const auto report = count_flops(spec);
    std::printf("%s (depth %d, heads %d, %dx%d patches)\n", which.c_str(),
                spec.depth, spec.heads, spec.patch_h, spec.patch_w);
    std::printf("%s", report.to_text().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speech emotion recognition with vertical-patch vision "
                 "transformers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "configuration file");
    app.add_option("--seed", g.seed, "override the configured seed");
    app.add_option("--run-dir", g.run_dir, "artifact directory");
    app.add_option("--threads", g.threads,
                   "worker threads (1 = strict determinism, 0 = all cores)");
    app.add_option("--dataset", g.dataset,
                   "dataset name: savee, emodb, crema-d or fixture")
        ->check(CLI::IsMember({"savee", "emodb", "crema-d", "fixture"}));

    auto* cmd_prepare =
        app.add_subcommand("prepare", "build the spectrogram image cache");
    auto* cmd_teacher =
        app.add_subcommand("train-teacher", "stage (a): teacher CE training");
    auto* cmd_match =
        app.add_subcommand("match", "stage (b): feature-map matching");
    auto* cmd_student = app.add_subcommand(
        "train-student", "stage (c): student CE + alpha*L1 fine-tuning");
    auto* cmd_eval = app.add_subcommand("eval", "evaluate on the test split");
    auto* cmd_attend =
        app.add_subcommand("attend", "emit attention-mask figure panels");
    auto* cmd_flops =
        app.add_subcommand("flops", "print the analytic operation count");

    std::string teacher_ckpt, student_ckpt, eval_ckpt, attend_ckpt, clip;
    std::string flops_model = "student";
    double sigma = 2.0;
    cmd_match->add_option("--teacher-ckpt", teacher_ckpt,
                          "teacher checkpoint (default: stage_a/best.vsck)");
    cmd_student->add_option("--teacher-ckpt", teacher_ckpt,
                            "teacher checkpoint (default: stage_a/best.vsck)");
    cmd_student->add_option("--student-ckpt", student_ckpt,
                            "matched student (default: stage_b/best.vsck)");
    cmd_eval->add_option("--checkpoint", eval_ckpt,
                         "model checkpoint (default: stage_c/best.vsck)");
    cmd_attend->add_option("--checkpoint", attend_ckpt,
                           "model checkpoint (default: stage_c/best.vsck)");
    cmd_attend->add_option("--clip", clip,
                           "input clip (default: first dataset clip)");
    cmd_attend->add_option("--sigma", sigma, "Gaussian smoothing sigma");
    cmd_flops->add_option("--model", flops_model,
                          "teacher, student or square");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const int threads = g.threads > 0
                            ? g.threads
                            : static_cast<int>(std::thread::hardware_concurrency());
    detail::set_gemm_threads(threads);

    try {
        if (cmd_prepare->parsed()) return run_prepare(g);
        if (cmd_teacher->parsed()) return run_train_teacher(g);
        if (cmd_match->parsed()) return run_match(g, teacher_ckpt);
        if (cmd_student->parsed())
            return run_train_student(g, teacher_ckpt, student_ckpt);
        if (cmd_eval->parsed()) return run_eval(g, eval_ckpt);
        if (cmd_attend->parsed()) return run_attend(g, attend_ckpt, clip, sigma);
        if (cmd_flops->parsed()) return run_flops(g, flops_model);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const PrereqError& e) {
        std::fprintf(stderr, "prerequisite error: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
