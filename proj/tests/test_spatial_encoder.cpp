// Hierarchical frame encoder: patchify + positional encoding, local/global
// attention stages, token pooling, and the per-frame embedding head.

#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "oracles.hpp"
#include "ttcnet/errors.hpp"
#include "ttcnet/layers.hpp"
#include "ttcnet/rng.hpp"
#include "ttcnet/spatial_encoder.hpp"
#include "ttcnet/tensor.hpp"

using namespace ttcnet;

namespace {

// Small two-stage hierarchy on 16x16 frames: local 2x2 mask units, then a
// pooled global stage.
SpatialConfig small_config() {
    SpatialConfig cfg;
    cfg.frame_size = 16;
    cfg.patch_size = 4;
    cfg.embed_dim = 8;
    cfg.num_heads = 2;
    cfg.ff_mult = 2;
    cfg.stages = {
        {/*pool=*/1, /*width=*/8, /*global=*/false, /*mask_unit=*/2, /*blocks=*/1},
        {/*pool=*/2, /*width=*/16, /*global=*/true, /*mask_unit=*/1, /*blocks=*/1},
    };
    return cfg;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

}  // namespace

TEST_CASE("patchify produces the expected grid and adds the positional encoding") {
    ParamRegistry reg;
    Rng rng(60);
    SpatialConfig cfg;
    cfg.frame_size = 32;
    cfg.patch_size = 8;
    cfg.embed_dim = 8;
    cfg.num_heads = 2;
    cfg.stages = {{1, 16, true, 1, 1}};
    SpatialEncoder enc(reg, "enc", cfg, rng);

    Tensor frame = Tensor::randn({32, 32, 3}, rng);
    Tensor tokens = enc.patchify(frame);
    CHECK(tokens.shape() == Shape{16, 16});  // 4x4 grid of width-16 tokens

    // An all-zero frame with the default zero bias leaves only the encoding.
    Tensor zero(Shape{32, 32, 3});
    Tensor pe_only = enc.patchify(zero);
    CHECK(max_abs_diff(pe_only, enc.positional_encoding()) == 0.0);
}

TEST_CASE("positional encodings are pairwise distinct over the grid") {
    ParamRegistry reg;
    Rng rng(61);
    SpatialEncoder enc(reg, "enc", SpatialConfig::defaults(), rng);
    const Tensor& pe = enc.positional_encoding();
    const std::size_t n = pe.dim(0), c = pe.dim(1);
    REQUIRE(n == 64);  // 32/4 = 8 -> 8x8 tokens
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            double diff = 0.0;
            for (std::size_t j = 0; j < c; ++j)
                diff = std::max(diff, std::abs(pe.at({a, j}) - pe.at({b, j})));
            CHECK(diff > 1e-6);
        }
    }
}

TEST_CASE("a full-grid mask unit equals global attention") {
    SpatialConfig local_cfg;
    local_cfg.frame_size = 16;
    local_cfg.patch_size = 4;
    local_cfg.embed_dim = 8;
    local_cfg.num_heads = 2;
    local_cfg.stages = {{1, 8, false, /*mask_unit=*/4, 1}};  // one 4x4 unit = whole grid
    SpatialConfig global_cfg = local_cfg;
    global_cfg.stages[0].global_attention = true;
    global_cfg.stages[0].mask_unit = 1;

    ParamRegistry reg_a, reg_b;
    Rng rng_a(62), rng_b(62);
    SpatialEncoder local_enc(reg_a, "e", local_cfg, rng_a);
    SpatialEncoder global_enc(reg_b, "e", global_cfg, rng_b);

    Rng frng(63);
    Tensor frame = Tensor::rand_uniform({16, 16, 3}, frng, 0.0, 1.0);
    Tensor ta = local_enc.patchify(frame);
    Tensor tb = global_enc.patchify(frame);
    REQUIRE(max_abs_diff(ta, tb) == 0.0);
    CHECK(max_abs_diff(local_enc.stage_forward(ta, 0), global_enc.stage_forward(tb, 0)) <= 1e-15);
}

TEST_CASE("local attention stays inside its mask unit") {
    ParamRegistry reg;
    Rng rng(64);
    SpatialConfig cfg = small_config();
    SpatialEncoder enc(reg, "enc", cfg, rng);
    // Stage 0: 4x4 grid, 2x2 units -> unit 0 covers tokens {0,1,4,5}.
    Tensor tokens = Tensor::randn({16, 8}, rng);
    Tensor base = enc.stage_forward(tokens, 0);
    Tensor poked = tokens.clone();
    poked.data()[0 * 8 + 3] += 1.5;  // token 0 lives in unit 0
    Tensor changed = enc.stage_forward(poked, 0);

    const std::vector<std::size_t> unit0 = {0, 1, 4, 5};
    for (std::size_t t = 0; t < 16; ++t) {
        bool in_unit0 = false;
        for (std::size_t u : unit0) in_unit0 |= (t == u);
        double diff = 0.0;
        for (std::size_t c = 0; c < 8; ++c)
            diff = std::max(diff, std::abs(changed.at({t, c}) - base.at({t, c})));
        if (in_unit0) {
            if (t == 0) CHECK(diff > 0.0);  // the poked token itself must move
        } else {
            CHECK(diff == 0.0);  // other units never see the perturbation
        }
    }
}

TEST_CASE("tokens constant within a mask unit stay constant within it") {
    ParamRegistry reg;
    Rng rng(65);
    SpatialEncoder enc(reg, "enc", small_config(), rng);
    // 4x4 grid, 2x2 units: give every token of a unit the same vector.
    Tensor tokens(Shape{16, 8});
    Rng vals(66);
    const std::vector<std::size_t> unit_of = {0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3};
    std::vector<std::vector<double>> unit_vec(4, std::vector<double>(8));
    for (auto& v : unit_vec)
        for (double& x : v) x = vals.normal();
    for (std::size_t t = 0; t < 16; ++t)
        for (std::size_t c = 0; c < 8; ++c) tokens.data()[t * 8 + c] = unit_vec[unit_of[t]][c];

    Tensor out = enc.stage_forward(tokens, 0);
    for (std::size_t t = 0; t < 16; ++t) {
        // Compare each token against the first token of its unit.
        std::size_t first = 0;
        while (unit_of[first] != unit_of[t]) ++first;
        for (std::size_t c = 0; c < 8; ++c) CHECK(out.at({t, c}) == out.at({first, c}));
    }
}

TEST_CASE("pooling halves the grid and doubles the width") {
    ParamRegistry reg;
    Rng rng(67);
    SpatialEncoder enc(reg, "enc", small_config(), rng);
    CHECK(enc.grid_side(0) == 4);
    CHECK(enc.grid_side(1) == 2);
    Tensor tokens = Tensor::randn({16, 8}, rng);
    Tensor stage0 = enc.stage_forward(tokens, 0);
    Tensor stage1 = enc.stage_forward(stage0, 1);
    CHECK(stage1.shape() == Shape{4, 16});  // 4x4x8 -> 2x2x16
}

TEST_CASE("pooling averages each 2x2 token cell") {
    ParamRegistry reg;
    Rng rng(68);
    SpatialConfig cfg = small_config();
    SpatialEncoder enc(reg, "enc", cfg, rng);
    // Make the widen projection the identity on the first 8 channels and the
    // attention/ff contributions observable but deterministic; easier: zero
    // the widen weight except an identity block, zero its bias, and read the
    // pooled values before attention moves them. Since stage_forward fuses
    // pooling with the blocks, check the pooling arithmetic indirectly: a
    // token grid constant within each 2x2 pool cell pools to exactly that
    // constant vector, so the widen input is known.
    Tensor tokens(Shape{16, 8});
    const std::vector<std::size_t> cell_of = {0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3};
    Rng vals(69);
    std::vector<std::vector<double>> cell_vec(4, std::vector<double>(8));
    for (auto& v : cell_vec)
        for (double& x : v) x = vals.normal();
    for (std::size_t t = 0; t < 16; ++t)
        for (std::size_t c = 0; c < 8; ++c) tokens.data()[t * 8 + c] = cell_vec[cell_of[t]][c];

    // Mean over a constant cell is the constant itself, so stage 1 on these
    // tokens equals stage 1 on any other grid with the same per-cell means.
    Tensor mixed(Shape{16, 8});
    for (std::size_t t = 0; t < 16; ++t) {
        // Redistribute within each cell: +delta on the first row member,
        // -delta on the second, keeping the cell mean intact.
        const double delta = (t % 2 == 0) ? 0.25 : -0.25;
        for (std::size_t c = 0; c < 8; ++c)
            mixed.data()[t * 8 + c] = cell_vec[cell_of[t]][c] + delta;
    }
    Tensor a = enc.stage_forward(tokens, 1);
    Tensor b = enc.stage_forward(mixed, 1);
    CHECK(max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("encode_frame is deterministic and has the configured shape") {
    ParamRegistry reg;
    Rng rng(70);
    SpatialEncoder enc(reg, "enc", SpatialConfig::defaults(), rng);
    Tensor frame = Tensor::rand_uniform({32, 32, 3}, rng, 0.0, 1.0);
    Tensor z1 = enc.encode_frame(frame);
    Tensor z2 = enc.encode_frame(frame.clone());
    REQUIRE(z1.shape() == Shape{128});
    CHECK(max_abs_diff(z1, z2) == 0.0);
}

TEST_CASE("encode_clip maps frames independently and in order") {
    ParamRegistry reg;
    Rng rng(71);
    SpatialEncoder enc(reg, "enc", small_config(), rng);
    Tensor frames = Tensor::rand_uniform({3, 16, 16, 3}, rng, 0.0, 1.0);
    Tensor z = enc.encode_clip(frames);
    REQUIRE(z.shape() == Shape{3, 8});

    // Reversing the frames reverses the embeddings bitwise.
    Tensor reversed(Shape{3, 16, 16, 3});
    const std::size_t per = 16 * 16 * 3;
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t i = 0; i < per; ++i)
            reversed.data()[t * per + i] = frames.data()[(2 - t) * per + i];
    Tensor zr = enc.encode_clip(reversed);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t c = 0; c < 8; ++c) CHECK(zr.at({t, c}) == z.at({2 - t, c}));
}

TEST_CASE("invalid configurations are rejected") {
    Rng rng(72);
    auto build = [&](SpatialConfig cfg) {
        ParamRegistry reg;
        Rng r(72);
        SpatialEncoder enc(reg, "enc", cfg, r);
    };
    SpatialConfig cfg = small_config();

    SpatialConfig bad = cfg;
    bad.frame_size = 30;  // not divisible by patch 4
    CHECK_THROWS_AS(build(bad), ConfigError);

    bad = cfg;
    bad.stages[0].mask_unit = 3;  // does not divide side 4
    CHECK_THROWS_AS(build(bad), ConfigError);

    bad = cfg;
    bad.stages[0].pool = 2;  // stage 0 cannot pool
    CHECK_THROWS_AS(build(bad), ConfigError);

    bad = cfg;
    bad.stages[1].width = 8;  // pooling without widening
    CHECK_THROWS_AS(build(bad), ConfigError);

    bad = cfg;
    bad.stages[1].pool = 1;
    bad.stages[1].width = 16;  // widening without pooling
    CHECK_THROWS_AS(build(bad), ConfigError);

    bad = cfg;
    bad.stages[0].global_attention = true;  // local stage after a global one
    bad.stages[1].pool = 2;
    bad.stages[1].global_attention = false;
    bad.stages[1].mask_unit = 1;
    CHECK_THROWS_AS(build(bad), ConfigError);

    bad = cfg;
    bad.stages[0].width = 9;  // not divisible by 2 heads
    CHECK_THROWS_AS(build(bad), ConfigError);

    // Malformed frames are rejected at use.
    ParamRegistry reg;
    SpatialEncoder enc(reg, "enc", cfg, rng);
    Tensor wrong = Tensor::randn({8, 8, 3}, rng);
    CHECK_THROWS_AS(enc.encode_frame(wrong), DimensionError);
    Tensor wrong_rank = Tensor::randn({16, 16}, rng);
    CHECK_THROWS_AS(enc.encode_frame(wrong_rank), DimensionError);
}

TEST_CASE("pixel gradients agree with finite differences") {
    ParamRegistry reg;
    Rng rng(73);
    SpatialEncoder enc(reg, "enc", small_config(), rng);
    Rng frng(74);
    std::vector<Tensor> in = {Tensor::rand_uniform({16, 16, 3}, frng, 0.0, 1.0)};
    Tensor probe = Tensor::rand_uniform({8}, frng, -1.0, 1.0);
    auto loss = [&](const std::vector<Tensor>& t) {
        return sum(mul(enc.encode_frame(t[0]), probe));
    };
    auto res = oracle::check_gradients(loss, in);
    CHECK(res.max_rel_err < 1e-4);
    CHECK(res.checked == 16 * 16 * 3);
}

TEST_CASE("parameter gradients agree with finite differences on a tiny encoder") {
    ParamRegistry reg;
    Rng rng(75);
    SpatialConfig cfg;
    cfg.frame_size = 8;
    cfg.patch_size = 4;
    cfg.embed_dim = 4;
    cfg.num_heads = 2;
    cfg.stages = {{1, 4, true, 1, 1}};  // 2x2 grid, one global stage
    SpatialEncoder enc(reg, "enc", cfg, rng);
    Rng frng(76);
    Tensor frame = Tensor::rand_uniform({8, 8, 3}, frng, 0.0, 1.0);
    Tensor probe = Tensor::rand_uniform({4}, frng, -1.0, 1.0);
    auto loss_value = [&]() { return sum(mul(enc.encode_frame(frame), probe)); };

    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        reg.watch_all(tape);
        tape.backward(loss_value());
        for (auto& [name, t] : reg.entries()) {
            Tensor g = tape.grad(t);
            analytic.emplace_back(g.data(), g.data() + g.size());
        }
    }
    const double eps = 1e-5;
    double max_rel = 0.0;
    std::size_t slot = 0, checked = 0;
    for (auto& [name, t] : reg.entries()) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double orig = t.data()[i];
            t.data()[i] = orig + eps;
            const double lp = loss_value().item();
            t.data()[i] = orig - eps;
            const double lm = loss_value().item();
            t.data()[i] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double g = analytic[slot][i];
            max_rel = std::max(max_rel,
                               std::abs(g - fd) / std::max({1.0, std::abs(g), std::abs(fd)}));
            ++checked;
        }
        ++slot;
    }
    CHECK(max_rel < 1e-4);
    CHECK(checked > 100);
}
