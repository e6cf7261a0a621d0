#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "vser/model_spec.hpp"
#include "vser/rng.hpp"
#include "vser/vit.hpp"

using namespace vser;
using TD = Tensor<double>;

namespace {
Image random_image(uint64_t seed) {
    Image img(kImageSize, kImageSize);
    Rng rng(seed);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}
}  // namespace

TEST_CASE("conv stem preserves 128x128 and its parameter count checks out") {
    auto model = VitModel<double>::create(ModelSpec::teacher(1, 2, 4), 3);
    auto res = model.forward(random_image(1));
    CHECK(res.feature.dim(0) == 128);
    CHECK(res.feature.dim(1) == 256);

    // closed-form parameter count over the six stages, recomputed here
    const int chans[] = {1, 16, 32, 64, 32, 16, 1};
    int64_t conv = 0, affine = 0;
    for (int i = 0; i < 6; ++i) {
        conv += static_cast<int64_t>(chans[i + 1]) * chans[i] * 9 + chans[i + 1];
        affine += 2 * chans[i + 1];
    }
    CHECK(conv + affine == 46851);

    int64_t stem_params = 0;
    for (auto& [name, t] : model.named_params())
        if (name.rfind("stem.", 0) == 0) stem_params += t.size();
    CHECK(stem_params == conv + affine);
}

TEST_CASE("conv stem output shape is [1,128,128] stage by stage") {
    Rng rng(11);
    std::vector<StemStage<double>> stages;
    const int chans[] = {1, 16, 32, 64, 32, 16, 1};
    for (int i = 0; i < 6; ++i) {
        StemStage<double> st;
        std::vector<double> k(static_cast<size_t>(chans[i + 1]) * chans[i] * 9);
        for (auto& e : k) e = 0.05 * rng.gaussian();
        st.kernel = TD::from({chans[i + 1], chans[i], 3, 3}, std::move(k));
        st.bias = TD::zeros({chans[i + 1]});
        st.norm_scale = TD::full({chans[i + 1]}, 1.0);
        st.norm_shift = TD::zeros({chans[i + 1]});
        stages.push_back(std::move(st));
    }
    auto x = TD::zeros({1, kImageSize, kImageSize});
    auto y = conv_stem_forward(x, stages);
    REQUIRE(y.shape() == Shape{1, kImageSize, kImageSize});

    // zero input: border effects reach at most 6 pixels in, so the deep
    // interior is constant
    const double ref = y.value()[static_cast<size_t>(64) * kImageSize + 64];
    for (int r = 8; r < kImageSize - 8; r += 7)
        for (int c = 8; c < kImageSize - 8; c += 7)
            CHECK(y.value()[static_cast<size_t>(r) * kImageSize + c] ==
                  doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("coordinate grid: exact corners, linear spacing, input independence") {
    auto grid = coordinate_grid<double>();
    REQUIRE(grid.shape() == Shape{2, kImageSize, kImageSize});
    auto x_at = [&](int r, int c) {
        return grid.value()[static_cast<size_t>(r) * kImageSize + c];
    };
    auto y_at = [&](int r, int c) {
        return grid.value()[static_cast<size_t>(kImageSize) * kImageSize +
                            static_cast<size_t>(r) * kImageSize + c];
    };
    CHECK(x_at(0, 0) == -1.0);
    CHECK(y_at(0, 0) == -1.0);
    CHECK(x_at(127, 127) == 1.0);
    CHECK(y_at(127, 127) == 1.0);
    CHECK(x_at(5, 64) == doctest::Approx(1.0 / 127.0).epsilon(1e-12));
    // x varies only along columns, y only along rows
    for (int r = 0; r < kImageSize; r += 31)
        for (int c = 0; c < kImageSize; c += 31) {
            CHECK(x_at(r, c) == x_at(0, c));
            CHECK(y_at(r, c) == y_at(r, 0));
        }
    // grids are constants: two independently built grids are bit-identical
    auto grid2 = coordinate_grid<double>();
    CHECK(grid.value() == grid2.value());
}

TEST_CASE("coordinate_encode keeps features bitwise in channel 0") {
    Rng rng(13);
    std::vector<double> v(static_cast<size_t>(kImageSize) * kImageSize);
    for (auto& e : v) e = rng.gaussian();
    auto x = TD::from({1, kImageSize, kImageSize}, v);
    auto out = coordinate_encode(x, coordinate_grid<double>());
    REQUIRE(out.shape() == Shape{3, kImageSize, kImageSize});
    for (size_t i = 0; i < v.size(); ++i) CHECK(out.value()[i] == v[i]);
}

TEST_CASE("patchify: 128x1 tokens are image columns") {
    Rng rng(17);
    std::vector<double> v(static_cast<size_t>(kImageSize) * kImageSize);
    for (auto& e : v) e = rng.gaussian();
    auto x = TD::from({1, kImageSize, kImageSize}, v);
    auto tokens = patchify(x, kImageSize, 1);
    REQUIRE(tokens.shape() == Shape{kImageSize, kImageSize});
    for (int r = 0; r < kImageSize; ++r)
        CHECK(tokens.value()[static_cast<size_t>(5) * kImageSize + r] ==
              v[static_cast<size_t>(r) * kImageSize + 5]);  // token 5 = column 5
}

TEST_CASE("patchify shapes for 3-channel and square patches; round trip") {
    Rng rng(19);
    std::vector<double> v(3u * kImageSize * kImageSize);
    for (auto& e : v) e = rng.gaussian();
    auto x = TD::from({3, kImageSize, kImageSize}, v);

    auto vertical = patchify(x, kImageSize, 1);
    CHECK(vertical.shape() == Shape{128, 384});

    auto square = patchify(x, 16, 16);
    CHECK(square.shape() == Shape{64, 768});
    // row-major patch order: token 9 covers grid cell (1, 1); element
    // layout is channels-outer, column-major inside the patch
    const int t = 9, c = 2, col = 5, row = 7;
    const int e = c * 256 + col * 16 + row;
    CHECK(square.value()[static_cast<size_t>(t) * 768 + e] ==
          v[(static_cast<size_t>(c) * kImageSize + (16 + row)) * kImageSize +
            (16 + col)]);

    // exact round trip through unpatchify
    for (auto [ph, pw] : {std::pair{kImageSize, 1}, std::pair{16, 16}}) {
        auto toks = patchify(x, ph, pw);
        auto back = unpatchify(toks.value(), 3, kImageSize, kImageSize, ph, pw);
        CHECK(back == v);
    }
    CHECK_THROWS_AS(patchify(x, 100, 1), ShapeError);
}

TEST_CASE("teacher and student feature maps are both 128x256") {
    auto teacher = VitModel<float>::create(ModelSpec::teacher(2, 2, 7), 5);
    auto student = VitModel<float>::create(ModelSpec::student(7), 6);
    const auto img = random_image(2);
    NoGradGuard ng;
    auto rt = teacher.forward(img);
    auto rs = student.forward(img);
    CHECK(rt.feature.shape() == Shape{128, 256});
    CHECK(rs.feature.shape() == Shape{128, 256});
    CHECK(rt.logits.shape() == Shape{7});
    CHECK(rs.attn.size() == 3);
    CHECK(rs.attn[0].size() == 5u * 128 * 128);
    for (float v : rs.logits.value()) CHECK(std::isfinite(v));
}

TEST_CASE("model spec role invariants are enforced") {
    CHECK_THROWS_AS([] {
        ModelSpec s = ModelSpec::teacher(3, 5, 7);
        s.use_conv_stem = false;
        s.validate();
    }(), InvalidConfig);
    CHECK_THROWS_AS([] {
        ModelSpec s = ModelSpec::student(7);
        s.positional = Positional::image_coordinate;
        s.validate();
    }(), InvalidConfig);
    CHECK_THROWS_AS([] {
        ModelSpec s = ModelSpec::student(7);
        s.patch_h = 16;
        s.patch_w = 16;
        s.validate();
    }(), InvalidConfig);
    // custom role allows the stem-without-coordinates ablation
    ModelSpec ab = ModelSpec::teacher(2, 2, 4);
    ab.role = Role::custom;
    ab.positional = Positional::none;
    ab.validate();
}

TEST_CASE("student is permutation-equivariant, teacher is not") {
    const auto img = random_image(23);
    std::vector<int> perm(kImageSize);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(29);
    rng.shuffle(perm.begin(), perm.end());
    Image permuted(kImageSize, kImageSize);
    for (int r = 0; r < kImageSize; ++r)
        for (int c = 0; c < kImageSize; ++c)
            permuted.at(r, c) = img.at(r, static_cast<int>(perm[static_cast<size_t>(c)]));

    NoGradGuard ng;
    auto student = VitModel<double>::create(ModelSpec::student(7), 31);
    auto base = student.forward(img);
    auto shuf = student.forward(permuted);

    // feature rows permute identically; token c of the permuted input is
    // original token perm[c]
    for (int c = 0; c < kImageSize; ++c)
        for (int d = 0; d < 256; ++d)
            CHECK(std::abs(shuf.feature.value()[static_cast<size_t>(c) * 256 + d] -
                           base.feature.value()
                               [static_cast<size_t>(perm[static_cast<size_t>(c)]) * 256 + d]) <
                  1e-9);
    for (int i = 0; i < 7; ++i)
        CHECK(std::abs(shuf.logits.value()[static_cast<size_t>(i)] -
                       base.logits.value()[static_cast<size_t>(i)]) < 1e-9);

    auto teacher = VitModel<double>::create(ModelSpec::teacher(1, 2, 7), 37);
    auto t_base = teacher.forward(img);
    auto t_shuf = teacher.forward(permuted);
    double max_diff = 0.0;
    for (int i = 0; i < 7; ++i)
        max_diff = std::max(max_diff,
                            std::abs(t_shuf.logits.value()[static_cast<size_t>(i)] -
                                     t_base.logits.value()[static_cast<size_t>(i)]));
    CHECK(max_diff > 1e-6);
}

TEST_CASE("count_flops hits the reference figures within 25%") {
    const auto student = count_flops(ModelSpec::student(7)).total;
    CHECK(student > 0.32e9 * 0.75);
    CHECK(student < 0.32e9 * 1.25);

    const auto teacher65 = count_flops(ModelSpec::teacher(6, 5, 7)).total;
    CHECK(teacher65 > 1.43e9 * 0.75);
    CHECK(teacher65 < 1.43e9 * 1.25);

    const auto teacher1212 = count_flops(ModelSpec::teacher(12, 12, 7)).total;
    CHECK(teacher1212 > 3.58e9 * 0.75);
    CHECK(teacher1212 < 3.58e9 * 1.25);
}

TEST_CASE("count_flops: structural properties") {
    auto spec3 = ModelSpec::student(7);
    auto spec6 = spec3;
    spec6.depth = 6;
    const auto r3 = count_flops(spec3);
    const auto r6 = count_flops(spec6);
    // doubling depth exactly doubles every per-block component
    for (const char* part : {"block_attention", "block_mlp", "block_norms"})
        CHECK(r6.part(part) == 2 * r3.part(part));
    CHECK(r6.total > r3.total);

    auto more_heads = spec3;
    more_heads.heads = 6;
    CHECK(count_flops(more_heads).total > r3.total);

    // fewer tokens (wider patches), same image: the count shrinks
    auto fewer_tokens = spec3;
    fewer_tokens.role = Role::custom;
    fewer_tokens.patch_w = 2;
    CHECK(count_flops(fewer_tokens).total < r3.total);

    // breakdown sums to the total
    int64_t sum = 0;
    for (const auto& [k, v] : r3.parts) sum += v;
    CHECK(sum == r3.total);
}

TEST_CASE("model spec text round trip and checkpoint spec guard") {
    const auto spec = ModelSpec::teacher(6, 5, 7);
    const auto back = ModelSpec::from_text(spec.to_text());
    CHECK(back == spec);
}
