#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vser/dataset.hpp"
#include "vser/model_spec.hpp"
#include "vser/vit.hpp"

namespace vser {

enum class Stage { a_teacher, b_match, c_student };

struct StageConfig {
    int epochs = 50;
    int batch_size = 4;
    double lr0 = 1e-4;
    int lr_halving_period = 10;  // epochs between halvings
    double alpha = 10.0;         // composite loss weight on the L1 term

    // Optional early exits for capacity smoke tests: stop once the train
    // (resp. test) weighted accuracy reaches the value. Negative disables.
    double stop_at_train_wa = -1.0;
    double stop_at_test_wa = -1.0;

    void validate() const;
};

// lr0 * 0.5^floor(epoch / period): piecewise constant, halves exactly at
// multiples of the halving period.
double lr_at(int epoch, const StageConfig& cfg);

struct EpochMetrics {
    int epoch = 0;
    std::string split;  // "train" or "test"
    double lr = 0, ce = 0, l1 = 0, total = 0, wa = 0;
};

struct TrainRun {
    std::vector<EpochMetrics> log;
    std::filesystem::path best_checkpoint, final_checkpoint;
    int best_epoch = -1;
    double best_test_wa = 0.0;
    int epochs_run = 0;
};

enum class LossMode {
    ce_only,    // stage (a): cross entropy
    match_l1,   // stage (b): L1 between student and frozen teacher features
    composite,  // stage (c): cross entropy + alpha * L1
};

// Shared optimization loop. `teacher`, when given, is used frozen (no
// gradients ever reach it). Writes metrics.tsv (per epoch/split) and
// batches.tsv (per optimizer step) plus best/final checkpoints to out_dir.
TrainRun train_loop(VitModel<float>& model, const VitModel<float>* teacher,
                    LossMode mode, const TrainData& data,
                    const StageConfig& cfg, uint64_t seed,
                    const std::filesystem::path& out_dir);

// Stage (a): train a network with cross entropy from scratch.
TrainRun train_stage_a(const ModelSpec& spec, const TrainData& data,
                       const StageConfig& cfg, uint64_t seed,
                       const std::filesystem::path& out_dir);

// Stage (b): feature-map matching against a frozen teacher checkpoint.
TrainRun train_stage_b(const std::filesystem::path& teacher_ckpt,
                       const ModelSpec& student_spec, const TrainData& data,
                       const StageConfig& cfg, uint64_t seed,
                       const std::filesystem::path& out_dir);

// Stage (c): fine-tune the matched student with CE + alpha * L1; its
// classifier head is freshly initialized (stage (b) never trains it).
TrainRun train_stage_c(const std::filesystem::path& student_ckpt_from_b,
                       const std::filesystem::path& teacher_ckpt,
                       const TrainData& data, const StageConfig& cfg,
                       uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace vser
