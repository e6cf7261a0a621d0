#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vser/checkpoint.hpp"
#include "vser/image.hpp"
#include "vser/model_spec.hpp"
#include "vser/ops.hpp"
#include "vser/rng.hpp"
#include "vser/tensor.hpp"

namespace vser {

inline constexpr std::array<int, 7> kConvStemChannels = {1, 16, 32, 64,
                                                         32, 16, 1};

// x and y pixel coordinates normalized to [-1, 1]; channel 0 varies along
// columns, channel 1 along rows. Endpoints are exactly -1 and 1.
template <class S>
Tensor<S> coordinate_grid() {
    std::vector<S> v(2u * kImageSize * kImageSize);
    for (int r = 0; r < kImageSize; ++r) {
        for (int c = 0; c < kImageSize; ++c) {
            const auto i = static_cast<size_t>(r) * kImageSize + c;
            v[i] = static_cast<S>((2.0 * c - (kImageSize - 1)) /
                                  (kImageSize - 1));
            v[static_cast<size_t>(kImageSize) * kImageSize + i] =
                static_cast<S>((2.0 * r - (kImageSize - 1)) / (kImageSize - 1));
        }
    }
    return Tensor<S>::from({2, kImageSize, kImageSize}, std::move(v));
}

// Appends the coordinate channels: output channel order is
// [features, x_coords, y_coords].
template <class S>
Tensor<S> coordinate_encode(const Tensor<S>& x, const Tensor<S>& grid) {
    if (x.rank() != 3 || x.dim(0) != 1) throw ShapeError("expected [1,H,W]");
    return concat_channels(x, grid);
}

template <class S>
struct StemStage {
    Tensor<S> kernel, bias, norm_scale, norm_shift;
};

// Six [conv2d_3x3 -> instance_norm -> gelu] stages, channels
// 1->16->32->64->32->16->1, spatial size preserved throughout.
template <class S>
Tensor<S> conv_stem_forward(const Tensor<S>& x,
                            const std::vector<StemStage<S>>& stages) {
    if (x.rank() != 3 || x.dim(0) != 1) throw ShapeError("expected [1,H,W]");
    Tensor<S> h = x;
    for (const auto& st : stages) {
        h = conv2d_3x3(h, st.kernel, st.bias);
        h = instance_norm(h, st.norm_scale, st.norm_shift);
        h = gelu(h);
    }
    return h;
}

template <class S>
struct BlockParams {
    Tensor<S> ln1_scale, ln1_shift, ln2_scale, ln2_shift;
    AttentionParams<S> attn;
    Tensor<S> mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

// Pre-norm transformer block: x + MHSA(LN(x)), then x + MLP(LN(x)).
template <class S>
Tensor<S> block_forward(const Tensor<S>& x, const BlockParams<S>& p,
                        const AttentionConfig& cfg,
                        std::vector<S>* attn_out = nullptr) {
    auto a = multi_head_self_attention(layer_norm(x, p.ln1_scale, p.ln1_shift),
                                       p.attn, cfg);
    if (attn_out) *attn_out = std::move(a.attn);
    auto h = add(x, a.out);
    auto m = linear(layer_norm(h, p.ln2_scale, p.ln2_shift), p.mlp_w1, p.mlp_b1);
    m = linear(gelu(m), p.mlp_w2, p.mlp_b2);
    return add(h, m);
}

template <class S>
struct ForwardResult {
    Tensor<S> logits;   // [n_classes]
    Tensor<S> feature;  // [n_tokens, token_dim], final block output
    std::vector<std::vector<S>> attn;  // per layer, [heads * T * T]
};

template <class S>
class VitModel {
  public:
    static VitModel create(const ModelSpec& spec, uint64_t seed) {
        spec.validate();
        VitModel m;
        m.spec_ = spec;
        Rng rng(seed);
        auto tn = [&](Shape shape) {
            auto n = shape_numel(shape);
            std::vector<S> v(static_cast<size_t>(n));
            for (auto& e : v)
                e = static_cast<S>(rng.truncated_normal(0.02));
            return Tensor<S>::from(std::move(shape), std::move(v), true);
        };
        auto zeros = [](Shape shape) { return Tensor<S>::zeros(std::move(shape), true); };
        auto ones = [](Shape shape) { return Tensor<S>::full(std::move(shape), S(1), true); };

        if (spec.use_conv_stem) {
            for (size_t i = 0; i + 1 < kConvStemChannels.size(); ++i) {
                const int ci = kConvStemChannels[i];
                const int co = kConvStemChannels[i + 1];
                m.stem_.push_back({tn({co, ci, 3, 3}), zeros({co}), ones({co}),
                                   zeros({co})});
            }
        }
        if (spec.positional == Positional::image_coordinate)
            m.grid_ = coordinate_grid<S>();

        m.proj_w_ = tn({spec.patch_dim(), spec.token_dim});
        m.proj_b_ = zeros({spec.token_dim});

        const int inner = spec.heads * spec.head_dim;
        for (int i = 0; i < spec.depth; ++i) {
            BlockParams<S> b;
            b.ln1_scale = ones({spec.token_dim});
            b.ln1_shift = zeros({spec.token_dim});
            b.ln2_scale = ones({spec.token_dim});
            b.ln2_shift = zeros({spec.token_dim});
            b.attn.wq = tn({spec.token_dim, inner});
            b.attn.bq = zeros({inner});
            b.attn.wk = tn({spec.token_dim, inner});
            b.attn.bk = zeros({inner});
            b.attn.wv = tn({spec.token_dim, inner});
            b.attn.bv = zeros({inner});
            b.attn.wo = tn({inner, spec.token_dim});
            b.attn.bo = zeros({spec.token_dim});
            b.mlp_w1 = tn({spec.token_dim, spec.mlp_hidden});
            b.mlp_b1 = zeros({spec.mlp_hidden});
            b.mlp_w2 = tn({spec.mlp_hidden, spec.token_dim});
            b.mlp_b2 = zeros({spec.token_dim});
            m.blocks_.push_back(std::move(b));
        }
        m_init_classifier(m, rng);
        return m;
    }

    // Fresh classifier head (used when a matching stage never trained it).
    void reinit_classifier(uint64_t seed) {
        Rng rng(seed);
        VitModel& m = *this;
        m_init_classifier(m, rng);
    }

    const ModelSpec& spec() const { return spec_; }

    ForwardResult<S> forward(const Image& img) const {
        if (img.height != kImageSize || img.width != kImageSize)
            throw ShapeError("model input must be 128x128");
        std::vector<S> v(img.data.size());
        for (size_t i = 0; i < v.size(); ++i)
            v[i] = static_cast<S>(img.data[i]);
        Tensor<S> x =
            Tensor<S>::from({1, kImageSize, kImageSize}, std::move(v));

        if (spec_.use_conv_stem) x = conv_stem_forward(x, stem_);
        if (spec_.positional == Positional::image_coordinate)
            x = coordinate_encode(x, grid_);

        Tensor<S> tokens = patchify(x, spec_.patch_h, spec_.patch_w);
        Tensor<S> t = linear(tokens, proj_w_, proj_b_);

        ForwardResult<S> res;
        res.attn.resize(static_cast<size_t>(spec_.depth));
        const AttentionConfig cfg{spec_.token_dim, spec_.heads, spec_.head_dim};
        for (int i = 0; i < spec_.depth; ++i)
            t = block_forward(t, blocks_[static_cast<size_t>(i)], cfg,
                              &res.attn[static_cast<size_t>(i)]);
        res.feature = t;

        Tensor<S> pooled = mean_rows(t);
        Tensor<S> hidden = gelu(linear(pooled, head_w1_, head_b1_));
        res.logits = linear(hidden, head_w2_, head_b2_);
        return res;
    }

    std::vector<std::pair<std::string, Tensor<S>>> named_params() {
        std::vector<std::pair<std::string, Tensor<S>>> out;
        for (size_t i = 0; i < stem_.size(); ++i) {
            const std::string p = "stem." + std::to_string(i) + ".";
            out.emplace_back(p + "kernel", stem_[i].kernel);
            out.emplace_back(p + "bias", stem_[i].bias);
            out.emplace_back(p + "norm_scale", stem_[i].norm_scale);
            out.emplace_back(p + "norm_shift", stem_[i].norm_shift);
        }
        out.emplace_back("proj.weight", proj_w_);
        out.emplace_back("proj.bias", proj_b_);
        for (size_t i = 0; i < blocks_.size(); ++i) {
            const std::string p = "blocks." + std::to_string(i) + ".";
            auto& b = blocks_[i];
            out.emplace_back(p + "ln1.scale", b.ln1_scale);
            out.emplace_back(p + "ln1.shift", b.ln1_shift);
            out.emplace_back(p + "attn.wq", b.attn.wq);
            out.emplace_back(p + "attn.bq", b.attn.bq);
            out.emplace_back(p + "attn.wk", b.attn.wk);
            out.emplace_back(p + "attn.bk", b.attn.bk);
            out.emplace_back(p + "attn.wv", b.attn.wv);
            out.emplace_back(p + "attn.bv", b.attn.bv);
            out.emplace_back(p + "attn.wo", b.attn.wo);
            out.emplace_back(p + "attn.bo", b.attn.bo);
            out.emplace_back(p + "ln2.scale", b.ln2_scale);
            out.emplace_back(p + "ln2.shift", b.ln2_shift);
            out.emplace_back(p + "mlp.w1", b.mlp_w1);
            out.emplace_back(p + "mlp.b1", b.mlp_b1);
            out.emplace_back(p + "mlp.w2", b.mlp_w2);
            out.emplace_back(p + "mlp.b2", b.mlp_b2);
        }
        out.emplace_back("head.w1", head_w1_);
        out.emplace_back("head.b1", head_b1_);
        out.emplace_back("head.w2", head_w2_);
        out.emplace_back("head.b2", head_b2_);
        return out;
    }

    std::vector<Tensor<S>> params() {
        std::vector<Tensor<S>> out;
        for (auto& [name, t] : named_params()) out.push_back(t);
        return out;
    }

    void set_requires_grad(bool rg) {
        for (auto& t : params()) t.set_requires_grad(rg);
    }

    int64_t param_count() {
        int64_t n = 0;
        for (auto& t : params()) n += t.size();
        return n;
    }

    // -- checkpointing (f32 storage; models are trained at f32) -----------
    CheckpointData to_checkpoint() {
        CheckpointData ckpt;
        ckpt.meta = spec_.to_text();
        for (auto& [name, t] : named_params()) {
            NamedTensorData nt;
            nt.name = name;
            nt.shape = t.shape();
            nt.data.reserve(t.value().size());
            for (auto v : t.value())
                nt.data.push_back(static_cast<float>(v));
            ckpt.tensors.push_back(std::move(nt));
        }
        return ckpt;
    }

    void load_tensors(const CheckpointData& ckpt) {
        for (auto& [name, t] : named_params()) {
            const auto* src = ckpt.find(name);
            if (!src) throw FormatError("checkpoint missing tensor " + name);
            if (src->shape != t.shape())
                throw ShapeError("checkpoint shape mismatch for " + name);
            for (size_t i = 0; i < t.value().size(); ++i)
                t.value()[i] = static_cast<S>(src->data[i]);
        }
    }

    void save(const std::filesystem::path& path) {
        save_checkpoint(path, to_checkpoint());
    }

    static VitModel load(const std::filesystem::path& path) {
        const auto ckpt = load_checkpoint(path);
        auto model = create(ModelSpec::from_text(ckpt.meta), 0);
        model.load_tensors(ckpt);
        return model;
    }

    // Loading a checkpoint whose embedded spec differs from the expected
    // one is an error.
    static VitModel load_checked(const std::filesystem::path& path,
                                 const ModelSpec& expected) {
        const auto ckpt = load_checkpoint(path);
        const auto spec = ModelSpec::from_text(ckpt.meta);
        if (!(spec == expected))
            throw ConfigError("checkpoint model spec mismatch: " +
                              path.string());
        auto model = create(spec, 0);
        model.load_tensors(ckpt);
        return model;
    }

  private:
    static void m_init_classifier(VitModel& m, Rng& rng) {
        auto tn = [&](Shape shape) {
            auto n = shape_numel(shape);
            std::vector<S> v(static_cast<size_t>(n));
            for (auto& e : v)
                e = static_cast<S>(rng.truncated_normal(0.02));
            return Tensor<S>::from(std::move(shape), std::move(v), true);
        };
        m.head_w1_ = tn({m.spec_.token_dim, m.spec_.classifier_hidden});
        m.head_b1_ = Tensor<S>::zeros({m.spec_.classifier_hidden}, true);
        m.head_w2_ = tn({m.spec_.classifier_hidden, m.spec_.n_classes});
        m.head_b2_ = Tensor<S>::zeros({m.spec_.n_classes}, true);
    }

    ModelSpec spec_;
    std::vector<StemStage<S>> stem_;
    Tensor<S> grid_;  // constant, not a parameter
    Tensor<S> proj_w_, proj_b_;
    std::vector<BlockParams<S>> blocks_;
    Tensor<S> head_w1_, head_b1_, head_w2_, head_b2_;
};

}  // namespace vser
