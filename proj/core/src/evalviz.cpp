#include "vser/evalviz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "vser/error.hpp"
#include "vser/image_io.hpp"

namespace vser {

double weighted_accuracy(const std::vector<int>& preds,
                         const std::vector<int>& labels, int n_classes) {
    if (preds.size() != labels.size() || preds.empty())
        throw ShapeError("weighted_accuracy: prediction/label size mismatch");
    int correct = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || preds[i] >= n_classes || labels[i] < 0 ||
            labels[i] >= n_classes)
            throw InvalidLabel("weighted_accuracy: value outside [0, C)");
        if (preds[i] == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

namespace {
std::string truncate_percent(int64_t basis_points) {
    // basis_points = floor(wa * 10000)
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%02lld%%",
                  static_cast<long long>(basis_points / 100),
                  static_cast<long long>(basis_points % 100));
    return buf;
}
}  // namespace

std::string format_wa_percent(double wa) {
    // small epsilon so ratios that are exact two-decimal percentages do not
    // truncate one unit low from float representation
    auto bp = static_cast<int64_t>(std::floor(wa * 10000.0 + 1e-9));
    bp = std::clamp<int64_t>(bp, 0, 10000);
    return truncate_percent(bp);
}

std::string EvalReport::formatted_wa() const {
    int64_t correct = 0, total = 0;
    for (int c : per_class_correct) correct += c;
    for (int t : per_class_total) total += t;
    if (total == 0) return "0.00%";
    return truncate_percent(correct * 10000 / total);
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << "class\tcorrect\ttotal\taccuracy\n";
    for (int c = 0; c < n_classes(); ++c) {
        const int tot = per_class_total[static_cast<size_t>(c)];
        const int cor = per_class_correct[static_cast<size_t>(c)];
        os << label_names[static_cast<size_t>(c)] << "\t" << cor << "\t" << tot
           << "\t"
           << (tot > 0 ? format_wa_percent(static_cast<double>(cor) / tot)
                       : std::string("-"))
           << "\n";
    }
    os << "weighted_accuracy\t" << formatted_wa() << "\n";
    os << "confusion (rows = true label)\n";
    for (int r = 0; r < n_classes(); ++r) {
        for (int c = 0; c < n_classes(); ++c) {
            if (c) os << "\t";
            os << confusion[static_cast<size_t>(r) * n_classes() + c];
        }
        os << "\n";
    }
    return os.str();
}

EvalReport make_eval_report(const std::vector<int>& preds,
                            const std::vector<int>& labels,
                            const std::vector<std::string>& label_names) {
    const auto c_n = static_cast<int>(label_names.size());
    EvalReport r;
    r.label_names = label_names;
    r.per_class_correct.assign(static_cast<size_t>(c_n), 0);
    r.per_class_total.assign(static_cast<size_t>(c_n), 0);
    r.confusion.assign(static_cast<size_t>(c_n) * c_n, 0);
    r.wa = weighted_accuracy(preds, labels, c_n);
    for (size_t i = 0; i < preds.size(); ++i) {
        ++r.per_class_total[static_cast<size_t>(labels[i])];
        if (preds[i] == labels[i])
            ++r.per_class_correct[static_cast<size_t>(labels[i])];
        ++r.confusion[static_cast<size_t>(labels[i]) * c_n + preds[i]];
    }
    return r;
}

namespace {
void min_max_normalize(Image& img) {
    float lo = std::numeric_limits<float>::max();
    float hi = std::numeric_limits<float>::lowest();
    for (float v : img.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo <= 0.0f) {
        std::fill(img.data.begin(), img.data.end(), 0.0f);
    } else {
        const float inv = 1.0f / (hi - lo);
        for (float& v : img.data) v = (v - lo) * inv;
    }
}
}  // namespace

AttentionMask extract_attention_mask(const ForwardResult<float>& result,
                                     const ModelSpec& spec) {
    if (result.attn.empty()) throw ShapeError("forward result has no attention");
    const auto& last = result.attn.back();
    const int t_n = spec.n_tokens();
    const int heads = spec.heads;
    if (last.size() != static_cast<size_t>(heads) * t_n * t_n)
        throw ShapeError("attention stack size mismatch");

    // received attention per token: mean over heads and over the query axis
    std::vector<double> received(static_cast<size_t>(t_n), 0.0);
    for (int h = 0; h < heads; ++h)
        for (int i = 0; i < t_n; ++i)
            for (int j = 0; j < t_n; ++j)
                received[static_cast<size_t>(j)] +=
                    last[(static_cast<size_t>(h) * t_n + i) * t_n + j];
    for (auto& v : received) v /= static_cast<double>(heads) * t_n;

    // paint each token's scalar onto its patch footprint
    AttentionMask mask;
    mask.image = Image(kImageSize, kImageSize);
    const int grid_w = kImageSize / spec.patch_w;
    for (int t = 0; t < t_n; ++t) {
        const int gr = t / grid_w, gc = t % grid_w;
        const auto v = static_cast<float>(received[static_cast<size_t>(t)]);
        for (int r = 0; r < spec.patch_h; ++r)
            for (int c = 0; c < spec.patch_w; ++c)
                mask.image.at(gr * spec.patch_h + r, gc * spec.patch_w + c) = v;
    }
    min_max_normalize(mask.image);
    return mask;
}

Image gaussian_smooth_raw(const Image& mask, double sigma) {
    if (sigma <= 0.0) throw InvalidSigma("sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1) *
                               (2 * radius + 1));
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            kernel[static_cast<size_t>(dy + radius) * (2 * radius + 1) +
                   (dx + radius)] =
                std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));

    Image out(mask.height, mask.width);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            double acc = 0.0, mass = 0.0;
            for (int dy = -radius; dy <= radius; ++dy) {
                const int sy = y + dy;
                if (sy < 0 || sy >= mask.height) continue;
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int sx = x + dx;
                    if (sx < 0 || sx >= mask.width) continue;
                    const double k =
                        kernel[static_cast<size_t>(dy + radius) * (2 * radius + 1) +
                               (dx + radius)];
                    acc += k * mask.at(sy, sx);
                    mass += k;
                }
            }
            out.at(y, x) = static_cast<float>(acc / mass);
        }
    }

    // The per-pixel renormalization preserves constants but leaves a small
    // border-dependent mass bias; a global rescale restores the input mass
    // exactly. The caller's min-max normalization is scale-invariant.
    double sum_in = 0.0, sum_out = 0.0;
    for (float v : mask.data) sum_in += v;
    for (float v : out.data) sum_out += v;
    if (sum_out != 0.0) {
        const auto s = static_cast<float>(sum_in / sum_out);
        for (float& v : out.data) v *= s;
    }
    return out;
}

AttentionMask gaussian_smooth(const AttentionMask& mask, double sigma) {
    AttentionMask out;
    out.image = gaussian_smooth_raw(mask.image, sigma);
    min_max_normalize(out.image);
    out.smoothed = true;
    out.sigma = sigma;
    return out;
}

void emit_figure(const std::vector<Image>& images, int rows, int cols,
                 const std::filesystem::path& path) {
    if (images.empty() || rows < 1 || cols < 1 ||
        static_cast<size_t>(rows) * cols != images.size())
        throw ShapeError("emit_figure: layout does not match image count");
    const int ih = images[0].height, iw = images[0].width;
    for (const auto& img : images)
        if (img.height != ih || img.width != iw)
            throw ShapeError("emit_figure: images must share dimensions");

    constexpr int kSep = 2;
    Image canvas(rows * ih + kSep * (rows - 1), cols * iw + kSep * (cols - 1),
                 1.0f);  // separators render white
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const auto& img = images[static_cast<size_t>(r) * cols + c];
            const int oy = r * (ih + kSep), ox = c * (iw + kSep);
            for (int y = 0; y < ih; ++y)
                for (int x = 0; x < iw; ++x)
                    canvas.at(oy + y, ox + x) = img.at(y, x);
        }
    save_pgm(path, canvas);
}

}  // namespace vser
