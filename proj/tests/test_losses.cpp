// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "wespe/errors.hpp"
#include "wespe/losses.hpp"

using namespace wespe;

TEST_CASE("content loss of an image with itself is zero") {
    std::string dir = testutil::temp_dir("loss_c");
    FeatureExtractor f(testutil::tiny_features(dir + "/f.wfa"));
    Tensor x = testutil::random_image(2, 3, 16, 16, 4);
    CHECK(content_loss(x, x, f, "relu2_1") == 0.0);
    Tensor y = testutil::random_image(2, 3, 16, 16, 5);
    CHECK(content_loss(x, y, f, "relu2_1") > 0.0);
}

TEST_CASE("content loss sums per-image feature MSE over the batch") {
    std::string dir = testutil::temp_dir("loss_cb");
    FeatureExtractor f(testutil::tiny_features(dir + "/f.wfa"));
    Tensor x1 = testutil::random_image(1, 3, 16, 16, 6);
    Tensor y1 = testutil::random_image(1, 3, 16, 16, 7);
    Tensor x2 = testutil::random_image(1, 3, 16, 16, 8);
    Tensor y2 = testutil::random_image(1, 3, 16, 16, 9);
    double l1 = content_loss(x1, y1, f, "relu2_1");
    double l2 = content_loss(x2, y2, f, "relu2_1");

    Tensor xb(2, 3, 16, 16), yb(2, 3, 16, 16);
    size_t half = x1.size();
    for (size_t i = 0; i < half; ++i) {
        xb[i] = x1[i];
        xb[half + i] = x2[i];
        yb[i] = y1[i];
        yb[half + i] = y2[i];
    }
    CHECK(content_loss(xb, yb, f, "relu2_1") ==
          doctest::Approx(l1 + l2).epsilon(1e-12));
}

TEST_CASE("tv loss identities and the two-pixel example") {
    Tensor flat(2, 3, 8, 8);
    flat.fill(0.37);
    CHECK(tv_loss(flat) == 0.0);
    CHECK(tv_loss(flat, true) == 0.0);

    // Single row of two pixels: one horizontal difference, |d| / (C*H*W).
    Tensor two(1, 1, 1, 2);
    two[0] = 0.2;
    two[1] = 0.9;
    CHECK(tv_loss(two) == doctest::Approx(0.7 / 2.0).epsilon(1e-12));

    Tensor dot(1, 1, 1, 1);
    CHECK_THROWS_AS(tv_loss(dot), ValidationError);
}

TEST_CASE("tv variants match hand-computed values on a 2x2 plane") {
    // [[0, 1], [0.5, 0.25]]: dh rows (1, -0.25), dv cols (0.5, -0.75).
    Tensor img(1, 1, 2, 2);
    img[0] = 0.0;
    img[1] = 1.0;
    img[2] = 0.5;
    img[3] = 0.25;
    double dh = std::sqrt(1.0 + 0.0625);
    double dv = std::sqrt(0.25 + 0.5625);
    CHECK(tv_loss(img) == doctest::Approx((dh + dv) / 4.0).epsilon(1e-12));

    // Isotropic: sqrt(dh^2 + dv^2) at each site that has any difference.
    double site00 = std::sqrt(1.0 * 1.0 + 0.5 * 0.5);
    double site01 = std::sqrt(0.0 + 0.75 * 0.75);
    double site10 = std::sqrt(0.25 * 0.25 + 0.0);
    CHECK(tv_loss(img, true) ==
          doctest::Approx((site00 + site01 + site10) / 4.0).epsilon(1e-12));
}

TEST_CASE("tv loss sums over the batch") {
    Tensor a = testutil::random_image(1, 3, 6, 6, 1);
    Tensor b = testutil::random_image(1, 3, 6, 6, 2);
    Tensor ab(2, 3, 6, 6);
    for (size_t i = 0; i < a.size(); ++i) {
        ab[i] = a[i];
        ab[a.size() + i] = b[i];
    }
    CHECK(tv_loss(ab) == doctest::Approx(tv_loss(a) + tv_loss(b)).epsilon(1e-12));
}

TEST_CASE("total loss applies the published weights exactly") {
    CHECK(total_loss(1.0, 2.0, 3.0, 0.1) ==
          doctest::Approx(1.0 + 5e-3 * (2.0 + 3.0) + 10.0 * 0.1)
              .epsilon(1e-15));
    CHECK(total_loss(1.0, 2.0, 3.0, 0.1) == doctest::Approx(2.025).epsilon(1e-15));
    CHECK(total_loss(0.0, 0.0, 0.0, 0.0) == 0.0);
    CHECK_THROWS_AS(total_loss(std::nan(""), 0, 0, 0), NumericError);
    CHECK_THROWS_AS(total_loss(0, 0, INFINITY, 0), NumericError);
}

TEST_CASE("discriminator cross entropy on constructed probabilities") {
    // real = e^-1 contributes exactly 1 per sample; fake = 1 - e^-1 too.
    Tensor real(3, 1, 1, 1), fake(3, 1, 1, 1);
    real.fill(std::exp(-1.0));
    fake.fill(1.0 - std::exp(-1.0));
    CHECK(discriminator_loss(real, fake) == doctest::Approx(6.0).epsilon(1e-12));

    // Saturated probabilities are clamped, never infinite.
    Tensor zero(1, 1, 1, 1), one(1, 1, 1, 1);
    one.fill(1.0);
    double l = discriminator_loss(zero, one);
    CHECK(std::isfinite(l));
    CHECK(l == doctest::Approx(-2.0 * std::log(kProbEps)).epsilon(1e-9));
}

TEST_CASE("adversarial generator losses are -sum log D") {
    std::string dir = testutil::temp_dir("loss_adv");
    DiscriminatorConfig dc_cfg;
    dc_cfg.input_hw = 12;
    dc_cfg.convs = {{4, 3, 2}, {6, 3, 2}};
    dc_cfg.fc_units = 8;
    Discriminator dc("dc", dc_cfg);
    dc_cfg.in_channels = 1;
    Discriminator dt("dt", dc_cfg);
    Rng rng(3, 4);
    dc.init(rng);
    dt.init(rng);

    BlurKernel k = make_blur_kernel(2);
    Tensor x = testutil::random_image(2, 3, 12, 12, 10);

    Tensor probs = dc.forward(blur(x, k));
    double expect = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) expect -= std::log(probs[i]);
    CHECK(color_loss(x, dc, k) == doctest::Approx(expect).epsilon(1e-12));

    Tensor gprobs = dt.forward(to_grayscale(x));
    expect = 0.0;
    for (size_t i = 0; i < gprobs.size(); ++i) expect -= std::log(gprobs[i]);
    CHECK(texture_loss(x, dt) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("loss log lines parse back exactly") {
    LossBreakdown b;
    b.content = 1.2345678901234567;
    b.color = 2.5e-3;
    b.texture = 7.0;
    b.tv = 1e-8;
    b.total = b.content + 5e-3 * (b.color + b.texture) + 10 * b.tv;
    b.d_color = 0.69314718055994531;
    b.d_texture = 1.0 / 3.0;
    std::string line = b.log_line(42);
    long step = 0;
    LossBreakdown back = LossBreakdown::parse_log_line(line, &step);
    CHECK(step == 42);
    CHECK(back.content == b.content);
    CHECK(back.color == b.color);
    CHECK(back.texture == b.texture);
    CHECK(back.tv == b.tv);
    CHECK(back.total == b.total);
    CHECK(back.d_color == b.d_color);
    CHECK(back.d_texture == b.d_texture);
}
