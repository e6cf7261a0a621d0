#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vser/image.hpp"
#include "vser/model_spec.hpp"
#include "vser/vit.hpp"

namespace vser {

// Micro-averaged accuracy: total correct over total evaluated.
double weighted_accuracy(const std::vector<int>& preds,
                         const std::vector<int>& labels, int n_classes);

// Percentage with the digits beyond the second decimal place discarded
// (truncated, not rounded): 0.97395 -> "97.39%".
std::string format_wa_percent(double wa);

struct EvalReport {
    std::vector<std::string> label_names;
    std::vector<int> per_class_correct, per_class_total;
    std::vector<int> confusion;  // n_classes * n_classes, row = true label
    double wa = 0.0;

    int n_classes() const { return static_cast<int>(per_class_total.size()); }
    std::string formatted_wa() const;  // truncation from integer counts
    std::string to_text() const;       // tabular UTF-8
};

EvalReport make_eval_report(const std::vector<int>& preds,
                            const std::vector<int>& labels,
                            const std::vector<std::string>& label_names);

struct AttentionMask {
    Image image;  // 128x128, min-max normalized to [0, 1]
    bool smoothed = false;
    double sigma = 0.0;
};

// Final-layer attention, averaged over heads; each token's received
// attention (mean over the query axis) is painted onto its patch
// footprint, then min-max normalized (a constant mask maps to zeros).
AttentionMask extract_attention_mask(const ForwardResult<float>& result,
                                     const ModelSpec& spec);

// 2-D Gaussian blur without the final normalization step; kernel radius
// ceil(3 sigma), truncated kernel mass renormalized per pixel.
Image gaussian_smooth_raw(const Image& mask, double sigma);

AttentionMask gaussian_smooth(const AttentionMask& mask, double sigma);

// Tiles same-sized images into a rows x cols PGM with 2-pixel white
// separators.
void emit_figure(const std::vector<Image>& images, int rows, int cols,
                 const std::filesystem::path& path);

}  // namespace vser
