// Normalization / de-normalization and the learned rescaler projector.

#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "oracles.hpp"
#include "ttcnet/errors.hpp"
#include "ttcnet/layers.hpp"
#include "ttcnet/rng.hpp"
#include "ttcnet/stationarity.hpp"
#include "ttcnet/tensor.hpp"

using namespace ttcnet;

namespace {

// Direct two-pass mean/std per dimension.
void two_pass_stats(const Tensor& z, std::vector<double>& mean, std::vector<double>& stddev) {
    const std::size_t n = z.dim(0), d = z.dim(1);
    mean.assign(d, 0.0);
    stddev.assign(d, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < d; ++j) mean[j] += z.at({t, j});
    for (std::size_t j = 0; j < d; ++j) mean[j] /= n;
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = z.at({t, j}) - mean[j];
            stddev[j] += c * c;
        }
    for (std::size_t j = 0; j < d; ++j) stddev[j] = std::sqrt(stddev[j] / n);
}

}  // namespace

TEST_CASE("normalize matches the two-pass statistics oracle") {
    Rng rng(10);
    Tensor z = Tensor::randn({64, 8}, rng, 2.0);
    // Shift dimensions so means are clearly nonzero.
    for (std::size_t t = 0; t < 64; ++t)
        for (std::size_t j = 0; j < 8; ++j) z.data()[t * 8 + j] += 0.5 * j;

    auto [zp, stats] = normalize(z);
    std::vector<double> mean, stddev;
    two_pass_stats(z, mean, stddev);
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(stats.mu.at({j}) == doctest::Approx(mean[j]).epsilon(1e-12));
        CHECK(stats.sigma.at({j}) == doctest::Approx(stddev[j]).epsilon(1e-12));
    }
    // Output statistics: mean 0, std 1 per dimension.
    std::vector<double> m2, s2;
    two_pass_stats(zp, m2, s2);
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(std::abs(m2[j]) < 1e-10);
        CHECK(std::abs(s2[j] - 1.0) < 1e-10);
    }
}

TEST_CASE("normalize is a fixed point on standardized input") {
    Rng rng(11);
    Tensor raw = Tensor::randn({40, 4}, rng);
    auto [z, stats0] = normalize(raw);  // now exactly standardized
    auto [z2, stats] = normalize(z);
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(std::abs(z2.data()[i] - z.data()[i]) < 1e-10);
    }
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(stats.mu.at({j})) < 1e-10);
        CHECK(stats.sigma.at({j}) == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("constant dimensions are clamped to zero output") {
    Tensor z(Shape{6, 2});
    for (std::size_t t = 0; t < 6; ++t) {
        z.data()[t * 2 + 0] = 3.25;                      // constant dim
        z.data()[t * 2 + 1] = static_cast<double>(t);    // varying dim
    }
    auto [zp, stats] = normalize(z);
    CHECK(stats.sigma.at({0}) == doctest::Approx(kSigmaFloor));
    for (std::size_t t = 0; t < 6; ++t) CHECK(zp.at({t, 0}) == 0.0);
    CHECK(stats.sigma.at({1}) > 1.0);
}

TEST_CASE("denormalize inverts normalize") {
    Rng rng(12);
    Tensor z = Tensor::randn({32, 5}, rng, 1.5);
    auto [zp, stats] = normalize(z);
    Tensor back = denormalize(zp, stats);
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(std::abs(back.data()[i] - z.data()[i]) <= 1e-9);
    }
    // And the other composition order.
    auto [zp2, stats2] = normalize(back);
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(std::abs(zp2.data()[i] - zp.data()[i]) <= 1e-9);
    }
}

TEST_CASE("denormalize evaluates the affine map directly") {
    Tensor zp(Shape{2, 1}, {1.0, -1.0});
    SeriesStats stats{Tensor(Shape{1}, {2.0}), Tensor(Shape{1}, {3.0})};
    Tensor out = denormalize(zp, stats);
    CHECK(out.at({0, 0}) == doctest::Approx(5.0));
    CHECK(out.at({1, 0}) == doctest::Approx(-1.0));

    SeriesStats identity{Tensor(Shape{1}), Tensor::full({1}, 1.0)};
    Tensor same = denormalize(zp, identity);
    for (std::size_t i = 0; i < zp.size(); ++i) CHECK(same.data()[i] == zp.data()[i]);
}

TEST_CASE("normalize input validation") {
    Tensor one_row(Shape{1, 3}, {1, 2, 3});
    CHECK_THROWS_AS(normalize(one_row), UsageError);
    Tensor wrong_rank(Shape{6}, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(normalize(wrong_rank), DimensionError);

    Tensor zp(Shape{2, 2}, {1, 2, 3, 4});
    SeriesStats bad{Tensor(Shape{3}), Tensor::full({3}, 1.0)};
    CHECK_THROWS_AS(denormalize(zp, bad), DimensionError);
}

TEST_CASE("zero-initialized projector yields identity rescalers") {
    ParamRegistry reg;
    Rng rng(13);
    RescalerProjector proj(reg, "proj", 6, 16, 5, rng);
    Tensor z = Tensor::randn({20, 6}, rng);
    auto [zp, stats] = normalize(z);
    Rescalers r = proj(stats, z);
    CHECK(r.tau.item() == 1.0);  // exp(0) exactly
    REQUIRE(r.delta.shape() == Shape{5});
    for (std::size_t j = 0; j < 5; ++j) CHECK(r.delta.at({j}) == 0.0);

    // identity_rescalers agrees with the zero-initialized projector output.
    Rescalers id = identity_rescalers(5);
    CHECK(id.tau.item() == 1.0);
    for (std::size_t j = 0; j < 5; ++j) CHECK(id.delta.at({j}) == 0.0);
}

TEST_CASE("projector tau is always positive") {
    ParamRegistry reg;
    Rng rng(14);
    RescalerProjector proj(reg, "proj", 4, 8, 3, rng);
    // Scribble over every parameter to leave the zero-init point.
    for (auto& [name, t] : reg.entries()) {
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-2.0, 2.0);
    }
    for (int trial = 0; trial < 10; ++trial) {
        Tensor z = Tensor::randn({16, 4}, rng, 3.0);
        auto [zp, stats] = normalize(z);
        Rescalers r = proj(stats, z);
        CHECK(r.tau.item() > 0.0);
        CHECK(r.delta.size() == 3);
    }
}

TEST_CASE("projector outputs are differentiable w.r.t. its parameters") {
    ParamRegistry reg;
    Rng rng(15);
    RescalerProjector proj(reg, "proj", 3, 6, 4, rng);
    // Move off the zero-init point so gradients are informative.
    for (auto& [name, t] : reg.entries()) {
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] += rng.uniform(-0.3, 0.3);
    }
    Tensor z = Tensor::randn({12, 3}, rng);
    Tensor probe = Tensor::rand_uniform({4}, rng, -1.0, 1.0);

    // Pack registry parameters as the checked inputs.
    std::vector<Tensor> inputs;
    for (auto& [name, t] : reg.entries()) inputs.push_back(t);
    auto loss = [&](const std::vector<Tensor>&) {
        // The projector reads the registry slots; watched handles were put
        // back into those slots by check_gradients' watch pass only for its
        // own tracked copies, so rebuild from the registry directly.
        auto [zp, stats] = normalize(z);
        Rescalers r = proj(stats, z);
        return add(mul(r.tau, r.tau), sum(mul(r.delta, probe)));
    };

    // check_gradients watches copies, not the registry slots; instead do the
    // tape pass manually against the registry and compare to finite
    // differences on the registry buffers.
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        reg.watch_all(tape);
        Tensor l = loss(inputs);
        tape.backward(l);
        for (auto& [name, t] : reg.entries()) {
            Tensor g = tape.grad(t);
            analytic.emplace_back(g.data(), g.data() + g.size());
        }
    }
    const double eps = 1e-5;
    double max_rel = 0.0;
    std::size_t slot = 0;
    for (auto& [name, t] : reg.entries()) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double orig = t.data()[i];
            t.data()[i] = orig + eps;
            const double lp = loss(inputs).item();
            t.data()[i] = orig - eps;
            const double lm = loss(inputs).item();
            t.data()[i] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double g = analytic[slot][i];
            const double rel = std::abs(g - fd) / std::max({1.0, std::abs(g), std::abs(fd)});
            max_rel = std::max(max_rel, rel);
        }
        ++slot;
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("gradients flow through normalize and denormalize") {
    Rng rng(16);
    std::vector<Tensor> in = {Tensor::rand_uniform({10, 3}, rng, -1.0, 1.0)};
    Tensor probe = Tensor::rand_uniform({10, 3}, rng, -1.0, 1.0);
    auto loss = [&](const std::vector<Tensor>& t) {
        auto [zp, stats] = normalize(t[0]);
        Tensor back = denormalize(mul(zp, zp), stats);
        return sum(mul(back, probe));
    };
    auto r = oracle::check_gradients(loss, in);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("parameter registry bookkeeping") {
    ParamRegistry reg;
    Rng rng(17);
    reg.add("a", Tensor(Shape{2, 3}));
    reg.add("b", Tensor(Shape{4}));
    CHECK(reg.tensor_count() == 2);
    CHECK(reg.scalar_count() == 10);
    CHECK(reg.find("a") != nullptr);
    CHECK(reg.find("missing") == nullptr);
    CHECK_THROWS_AS(reg.add("a", Tensor(Shape{1})), UsageError);

    Linear lin(reg, "lin", 3, 2, rng);
    CHECK(reg.tensor_count() == 4);
    CHECK(reg.find("lin.w") != nullptr);
    CHECK(reg.find("lin.b") != nullptr);

    // watch_all makes every slot differentiable on the tape.
    Tape tape;
    reg.watch_all(tape);
    for (auto& [name, t] : reg.entries()) CHECK(t.requires_grad());
}

TEST_CASE("dropout semantics") {
    Rng rng(18);
    Tensor x = Tensor::full({1000}, 1.0);

    SUBCASE("eval mode and rate zero are identities") {
        Tensor y = dropout(x, 0.5, /*training=*/false, rng);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == 1.0);
        Tensor y2 = dropout(x, 0.0, /*training=*/true, rng);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(y2.data()[i] == 1.0);
    }
    SUBCASE("training mode zeroes about `rate` of entries and rescales") {
        Tensor y = dropout(x, 0.25, /*training=*/true, rng);
        std::size_t zeros = 0;
        double mean = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y.data()[i] == 0.0) {
                ++zeros;
            } else {
                CHECK(y.data()[i] == doctest::Approx(1.0 / 0.75));
            }
            mean += y.data()[i];
        }
        mean /= y.size();
        CHECK(zeros > 200);
        CHECK(zeros < 300);
        CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
    }
    SUBCASE("invalid rates are rejected") {
        CHECK_THROWS_AS(dropout(x, -0.1, true, rng), ConfigError);
        CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ConfigError);
    }
}
