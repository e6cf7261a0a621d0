#include "vser/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>

#include "vser/adam.hpp"
#include "vser/error.hpp"
#include "vser/ops.hpp"
#include "vser/rng.hpp"

namespace vser {

namespace fs = std::filesystem;

void StageConfig::validate() const {
    if (epochs < 1) throw InvalidConfig("epochs must be positive");
    if (batch_size < 1) throw InvalidConfig("batch_size must be positive");
    if (lr0 <= 0.0) throw InvalidConfig("lr0 must be positive");
    if (lr_halving_period < 1)
        throw InvalidConfig("lr_halving_period must be positive");
    if (alpha < 0.0) throw InvalidConfig("alpha must be non-negative");
}

double lr_at(int epoch, const StageConfig& cfg) {
    return cfg.lr0 * std::pow(0.5, epoch / cfg.lr_halving_period);
}

namespace {

int argmax(const std::vector<float>& v) {
    int best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[static_cast<size_t>(best)]) best = static_cast<int>(i);
    return best;
}

// Frozen-teacher features, precomputed when the dataset is small enough to
// hold them (the teacher is deterministic, so this is an exact cache).
class TeacherFeatures {
  public:
    TeacherFeatures(const VitModel<float>* teacher,
                    const std::vector<Example>& examples) {
        teacher_ = teacher;
        examples_ = &examples;
        if (teacher && examples.size() <= 4096) {
            cache_.resize(examples.size());
            NoGradGuard ng;
            for (size_t i = 0; i < examples.size(); ++i)
                cache_[i] = teacher->forward(examples[i].image).feature.value();
        }
    }

    Tensor<float> at(size_t i) const {
        const auto& sp = teacher_->spec();
        Shape shape{sp.n_tokens(), sp.token_dim};
        if (!cache_.empty())
            return Tensor<float>::from(shape, cache_[i]);
        NoGradGuard ng;
        return Tensor<float>::from(
            shape, teacher_->forward((*examples_)[i].image).feature.value());
    }

  private:
    const VitModel<float>* teacher_ = nullptr;
    const std::vector<Example>* examples_ = nullptr;
    std::vector<std::vector<float>> cache_;
};

struct SplitEval {
    double ce = 0, l1 = 0, total = 0, wa = 0;
};

SplitEval evaluate_split(const VitModel<float>& model,
                         const std::vector<Example>& examples,
                         const TeacherFeatures* teacher_feats, LossMode mode,
                         double alpha) {
    NoGradGuard ng;
    SplitEval ev;
    int correct = 0;
    for (size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        auto res = model.forward(ex.image);
        if (mode != LossMode::match_l1) {
            ev.ce += cross_entropy(res.logits, {ex.label}).item();
        }
        if (mode != LossMode::ce_only) {
            ev.l1 += l1_loss(res.feature, teacher_feats->at(i)).item();
        }
        if (argmax(res.logits.value()) == ex.label) ++correct;
    }
    const auto n = static_cast<double>(examples.size());
    ev.ce /= n;
    ev.l1 /= n;
    switch (mode) {
        case LossMode::ce_only: ev.total = ev.ce; break;
        case LossMode::match_l1: ev.total = ev.l1; break;
        case LossMode::composite: ev.total = ev.ce + alpha * ev.l1; break;
    }
    ev.wa = static_cast<double>(correct) / n;
    return ev;
}

void write_metrics_line(std::ofstream& os, const EpochMetrics& m) {
    os << m.epoch << "\t" << m.split << "\t" << m.lr << "\t" << m.ce << "\t"
       << m.l1 << "\t" << m.total << "\t" << m.wa << "\n";
    os.flush();
}

}  // namespace

TrainRun train_loop(VitModel<float>& model, const VitModel<float>* teacher,
                    LossMode mode, const TrainData& data,
                    const StageConfig& cfg, uint64_t seed,
                    const fs::path& out_dir) {
    cfg.validate();
    if (data.train.empty() || data.test.empty())
        throw InvalidDataset("training requires non-empty train and test splits");
    if (mode != LossMode::ce_only) {
        if (!teacher) throw MatchError("feature matching requires a teacher");
        if (teacher->spec().n_tokens() != model.spec().n_tokens() ||
            teacher->spec().token_dim != model.spec().token_dim)
            throw MatchError("teacher/student feature map shapes differ");
    }

    fs::create_directories(out_dir);
    std::ofstream metrics(out_dir / "metrics.tsv");
    std::ofstream batches(out_dir / "batches.tsv");
    if (!metrics || !batches)
        throw DataError("cannot write logs under " + out_dir.string());
    metrics << std::setprecision(12);
    batches << std::setprecision(12);
    metrics << "# epoch\tsplit\tlr\tce\tl1\ttotal\twa\n";
    batches << "# epoch\tbatch\tlr\tce\tl1\ttotal\n";

    TeacherFeatures train_feats(mode == LossMode::ce_only ? nullptr : teacher,
                                data.train);
    TeacherFeatures test_feats(mode == LossMode::ce_only ? nullptr : teacher,
                               data.test);

    Adam<float> opt(model.params());
    TrainRun run;
    run.best_checkpoint = out_dir / "best.vsck";
    run.final_checkpoint = out_dir / "final.vsck";
    // Stages selecting by accuracy track the best test WA; the matching
    // stage tracks the lowest test matching loss instead.
    double best_metric = mode == LossMode::match_l1
                             ? std::numeric_limits<double>::max()
                             : -1.0;

    std::vector<size_t> order(data.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    const float alpha_f = static_cast<float>(cfg.alpha);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg);
        Rng shuffle_rng(derive_seed(seed, "epoch" + std::to_string(epoch),
                                    "shuffle"));
        shuffle_rng.shuffle(order.begin(), order.end());

        double ep_ce = 0, ep_l1 = 0, ep_total = 0;
        int ep_correct = 0;
        const size_t n = order.size();
        size_t batch_idx = 0;
        for (size_t start = 0; start < n; start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(n, start + static_cast<size_t>(cfg.batch_size));
            const auto bsz = static_cast<float>(end - start);
            opt.zero_grad();
            double b_ce = 0, b_l1 = 0, b_total = 0;
            for (size_t bi = start; bi < end; ++bi) {
                const auto& ex = data.train[order[bi]];
                auto res = model.forward(ex.image);
                Tensor<float> loss;
                if (mode == LossMode::ce_only) {
                    loss = cross_entropy(res.logits, {ex.label});
                    b_ce += loss.item();
                } else if (mode == LossMode::match_l1) {
                    loss = l1_loss(res.feature, train_feats.at(order[bi]));
                    b_l1 += loss.item();
                } else {
                    auto ce = cross_entropy(res.logits, {ex.label});
                    auto l1 = l1_loss(res.feature, train_feats.at(order[bi]));
                    loss = add(ce, scale(l1, alpha_f));
                    b_ce += ce.item();
                    b_l1 += l1.item();
                }
                b_total += loss.item();
                scale(loss, 1.0f / bsz).backward();
                if (argmax(res.logits.value()) == ex.label) ++ep_correct;
            }
            opt.step(lr);
            batches << epoch << "\t" << batch_idx++ << "\t" << lr << "\t"
                    << b_ce / bsz << "\t" << b_l1 / bsz << "\t"
                    << b_total / bsz << "\n";
            ep_ce += b_ce;
            ep_l1 += b_l1;
            ep_total += b_total;
        }
        batches.flush();

        const auto n_d = static_cast<double>(n);
        EpochMetrics train_m{epoch, "train", lr, ep_ce / n_d, ep_l1 / n_d,
                             ep_total / n_d,
                             static_cast<double>(ep_correct) / n_d};
        write_metrics_line(metrics, train_m);
        run.log.push_back(train_m);

        const auto ev = evaluate_split(
            model, data.test, mode == LossMode::ce_only ? nullptr : &test_feats,
            mode, cfg.alpha);
        EpochMetrics test_m{epoch, "test", lr, ev.ce, ev.l1, ev.total, ev.wa};
        write_metrics_line(metrics, test_m);
        run.log.push_back(test_m);

        const bool improved = mode == LossMode::match_l1
                                  ? ev.l1 < best_metric
                                  : ev.wa > best_metric;
        if (improved) {
            best_metric = mode == LossMode::match_l1 ? ev.l1 : ev.wa;
            run.best_epoch = epoch;
            run.best_test_wa = ev.wa;
            model.save(run.best_checkpoint);
        }
        run.epochs_run = epoch + 1;
        if (cfg.stop_at_train_wa > 0.0 && train_m.wa >= cfg.stop_at_train_wa)
            break;
        if (cfg.stop_at_test_wa > 0.0 && ev.wa >= cfg.stop_at_test_wa) break;
    }
    model.save(run.final_checkpoint);
    return run;
}

TrainRun train_stage_a(const ModelSpec& spec, const TrainData& data,
                       const StageConfig& cfg, uint64_t seed,
                       const fs::path& out_dir) {
    auto model = VitModel<float>::create(spec, derive_seed(seed, "stage_a", "init"));
    return train_loop(model, nullptr, LossMode::ce_only, data, cfg, seed,
                      out_dir);
}

TrainRun train_stage_b(const fs::path& teacher_ckpt,
                       const ModelSpec& student_spec, const TrainData& data,
                       const StageConfig& cfg, uint64_t seed,
                       const fs::path& out_dir) {
    if (!fs::exists(teacher_ckpt))
        throw PrereqError("missing teacher checkpoint " + teacher_ckpt.string());
    auto teacher = VitModel<float>::load(teacher_ckpt);
    teacher.set_requires_grad(false);
    auto student = VitModel<float>::create(
        student_spec, derive_seed(seed, "stage_b", "init"));
    return train_loop(student, &teacher, LossMode::match_l1, data, cfg, seed,
                      out_dir);
}

TrainRun train_stage_c(const fs::path& student_ckpt_from_b,
                       const fs::path& teacher_ckpt, const TrainData& data,
                       const StageConfig& cfg, uint64_t seed,
                       const fs::path& out_dir) {
    if (!fs::exists(student_ckpt_from_b))
        throw PrereqError("missing matched student checkpoint " +
                          student_ckpt_from_b.string());
    if (!fs::exists(teacher_ckpt))
        throw PrereqError("missing teacher checkpoint " + teacher_ckpt.string());
    auto teacher = VitModel<float>::load(teacher_ckpt);
    teacher.set_requires_grad(false);
    auto student = VitModel<float>::load(student_ckpt_from_b);
    student.reinit_classifier(derive_seed(seed, "stage_c", "head"));
    return train_loop(student, &teacher, LossMode::composite, data, cfg, seed,
                      out_dir);
}

}  // namespace vser
