#include "oracles.hpp"

#include "semdet/common/errors.hpp"
#include "semdet/common/rng.hpp"
#include "semdet/net/loss.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace semdet;
using namespace semdet::net;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace

TEST_SUITE("loss") {

TEST_CASE("focal loss single-cell values")
{
    const std::vector<double> half{0.5};
    const std::vector<float> pos{1.0f}, neg{0.0f};
    CHECK(focal_loss<double>(half, pos, 2, 4) == doctest::Approx(0.25 * std::log(2.0)));
    CHECK(focal_loss<double>(half, neg, 2, 4) == doctest::Approx(0.25 * std::log(2.0)));

    std::vector<double> d(1);
    const std::vector<double> zero_logit{0.0};
    CHECK(focal_loss_logits<double>(zero_logit, pos, 2, 4, d) == doctest::Approx(0.25 * std::log(2.0)));
}

TEST_CASE("focal loss of a clipped perfect prediction is only the clipping residual")
{
    std::vector<float> y(64, 0.0f);
    y[10] = 1.0f;
    std::vector<double> pred(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) pred[i] = std::clamp<double>(y[i], kProbClip, 1.0 - kProbClip);
    CHECK(focal_loss<double>(pred, y, 2, 4) <= 2e-4);
}

TEST_CASE("focal loss normalizes by the number of centres")
{
    const std::vector<double> p{0.5, 0.5};
    const std::vector<float> two{1.0f, 1.0f};
    const std::vector<float> one{1.0f, 0.0f};
    CHECK(focal_loss<double>(p, two, 2, 4) == doctest::Approx(0.25 * std::log(2.0)));
    // the negative cell adds its own 0.25 ln 2
    CHECK(focal_loss<double>(p, one, 2, 4) == doctest::Approx(0.5 * std::log(2.0)));
}

TEST_CASE("focal loss on logits matches the probability form and its derivative")
{
    Rng rng = make_rng(4, 0, 0);
    std::vector<float> y(50);
    std::vector<double> z(50), p(50);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = i % 7 == 0 ? 1.0f : static_cast<float>(uniform_real(rng, 0.0, 0.99));
        z[i] = uniform_real(rng, -4.0, 4.0);
        p[i] = 1.0 / (1.0 + std::exp(-z[i]));
    }
    std::vector<double> dz(50);
    const double l = focal_loss_logits<double>(z, y, 2, 4, dz);
    CHECK(l == doctest::Approx(focal_loss<double>(p, y, 2, 4)).epsilon(1e-10));
    for (std::size_t i = 0; i < z.size(); ++i) {
        std::vector<double> up = z, down = z, scratch(50);
        up[i] += 1e-6;
        down[i] -= 1e-6;
        const double numeric = (focal_loss_logits<double>(up, y, 2, 4, scratch) -
                                focal_loss_logits<double>(down, y, 2, 4, scratch)) /
                               2e-6;
        // cells near a centre have gradients near 1e-7; allow for FD rounding there
        REQUIRE(std::abs(dz[i] - numeric) <= 1e-6 * std::abs(numeric) + 1e-9);
    }
}

TEST_CASE("clipped cells carry no gradient")
{
    const std::vector<float> y{1.0f, 0.0f};
    const std::vector<double> z{logit(1.0 - 1e-6), logit(1e-6)};
    std::vector<double> dz(2);
    focal_loss_logits<double>(z, y, 2, 4, dz);
    CHECK(dz[0] == 0.0);
    CHECK(dz[1] == 0.0);
}

TEST_CASE("masked L1 examples")
{
    // channel-major: x at cell 0 and 1, then y at cell 0 and 1
    const std::vector<double> pred{0.5, 0.9, 0.5, 0.1};
    const std::vector<float> target{0.0f, 0.0f, 0.25f, 0.0f};
    const std::vector<std::uint8_t> mask{1, 0};
    CHECK(masked_l1_loss<double>(pred, target, mask, 2) == doctest::Approx(0.375));

    const std::vector<std::uint8_t> empty{0, 0};
    CHECK(masked_l1_loss<double>(pred, target, empty, 2) == 0.0);

    const std::vector<float> same{0.5f, 0.9f, 0.5f, 0.1f};
    const std::vector<double> exact{0.5, 0.9f, 0.5, 0.1f};
    CHECK(masked_l1_loss<double>(exact, same, std::vector<std::uint8_t>{1, 1}, 2) == 0.0);

    std::vector<double> d(4);
    masked_l1_loss<double>(pred, target, mask, 2, d);
    CHECK(d[0] == doctest::Approx(0.5));
    CHECK(d[1] == 0.0);
    CHECK(d[2] == doctest::Approx(0.5));
    CHECK(d[3] == 0.0);
}

TEST_CASE("losses are never negative")
{
    Rng rng = make_rng(9, 0, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = uniform_int(rng, 1, 30);
        std::vector<float> y(static_cast<std::size_t>(n));
        std::vector<double> z(y.size()), d(y.size()), pred(2 * y.size());
        std::vector<float> t(2 * y.size());
        std::vector<std::uint8_t> m(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = uniform_int(rng, 0, 4) == 0 ? 1.0f : static_cast<float>(uniform_real(rng, 0, 1));
            z[i] = uniform_real(rng, -20, 20);
            m[i] = static_cast<std::uint8_t>(uniform_int(rng, 0, 1));
        }
        for (std::size_t i = 0; i < t.size(); ++i) {
            pred[i] = uniform_real(rng, -5, 5);
            t[i] = static_cast<float>(uniform_real(rng, -5, 5));
        }
        REQUIRE(focal_loss_logits<double>(z, y, 2, 4, d) >= 0.0);
        REQUIRE(masked_l1_loss<double>(pred, t, m, 2) >= 0.0);
    }
}

TEST_CASE("shape mismatches are rejected")
{
    const std::vector<double> p{0.5, 0.5};
    const std::vector<float> y{1.0f};
    CHECK_THROWS_AS(focal_loss<double>(p, y, 2, 4), ShapeMismatch);
    const std::vector<std::uint8_t> mask{1, 1, 1};
    const std::vector<float> t{0, 0, 0, 0};
    CHECK_THROWS_AS(masked_l1_loss<double>(std::vector<double>(4), t, mask, 2), ShapeMismatch);
}

TEST_CASE("loss weights validation")
{
    LossWeights w;
    w.validate();
    w.alpha = 0;
    CHECK_THROWS_AS(w.validate(), ValidationFailure);
    w = LossWeights{};
    w.size = -1;
    CHECK_THROWS_AS(w.validate(), ValidationFailure);
    w = LossWeights{};
    w.offset = std::nan("");
    CHECK_THROWS_AS(w.validate(), ValidationFailure);
}

}
