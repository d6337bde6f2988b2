// SPDX-License-Identifier: Apache-2.0
//
// Central finite differences against every analytic gradient, at double
// precision on tiny stand-in networks. Tolerance 1e-4 relative.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "wespe/losses.hpp"
#include "wespe/models.hpp"

using namespace wespe;
using testutil::fd_check;

namespace {
constexpr double kTol = 1e-4;

DiscriminatorConfig tiny_disc(int in_c) {
    DiscriminatorConfig cfg;
    cfg.in_channels = in_c;
    cfg.input_hw = 8;
    cfg.convs = {{4, 3, 2}, {6, 3, 2}};
    cfg.fc_units = 6;
    return cfg;
}
}  // namespace

TEST_CASE("tv gradients, both variants") {
    Tensor x = testutil::random_image(1, 3, 8, 8, 1);
    for (bool iso : {false, true}) {
        Tensor g;
        tv_loss_grad(x, g, iso);
        CHECK(fd_check(x, g, [&] { return tv_loss(x, iso); }) < kTol);
    }
}

TEST_CASE("content loss gradient w.r.t. the reconstruction") {
    std::string dir = testutil::temp_dir("gc_content");
    FeatureExtractor f(testutil::tiny_features(dir + "/f.wfa"));
    Tensor x = testutil::random_image(1, 3, 8, 8, 2);
    Tensor xr = testutil::random_image(1, 3, 8, 8, 3);
    Tensor g;
    content_loss_grad(x, xr, f, "relu2_1", g);
    CHECK(fd_check(xr, g,
                   [&] { return content_loss(x, xr, f, "relu2_1"); }) < kTol);
}

TEST_CASE("color loss gradient through blur and the discriminator") {
    Discriminator dc("dc", tiny_disc(3));
    Rng rng(4, 5);
    dc.init(rng);
    BlurKernel k = make_blur_kernel(2);
    Tensor x = testutil::random_image(1, 3, 8, 8, 4);
    Tensor g;
    color_loss_grad(x, dc, k, g);
    CHECK(fd_check(x, g, [&] { return color_loss(x, dc, k); }) < kTol);
}

TEST_CASE("texture loss gradient through the grayscale map") {
    Discriminator dt("dt", tiny_disc(1));
    Rng rng(5, 6);
    dt.init(rng);
    Tensor x = testutil::random_image(1, 3, 8, 8, 5);
    Tensor g;
    texture_loss_grad(x, dt, g);
    CHECK(fd_check(x, g, [&] { return texture_loss(x, dt); }) < kTol);
}

TEST_CASE("discriminator cross-entropy gradients") {
    Tensor real = testutil::random_image(3, 1, 1, 1, 6, 0.1, 0.9);
    Tensor fake = testutil::random_image(3, 1, 1, 1, 7, 0.1, 0.9);
    Tensor gr, gf;
    discriminator_loss_grad(real, fake, gr, gf);
    CHECK(fd_check(real, gr,
                   [&] { return discriminator_loss(real, fake); }) < kTol);
    CHECK(fd_check(fake, gf,
                   [&] { return discriminator_loss(real, fake); }) < kTol);
}

TEST_CASE("generator input and parameter gradients") {
    Generator gen("g", {4, 1, 3});
    Rng rng(6, 7);
    gen.init(rng);
    Tensor x = testutil::random_image(1, 3, 8, 8, 8);
    // Fixed random projection makes the scalar loss sensitive everywhere.
    Tensor proj = testutil::random_image(1, 3, 8, 8, 9, -1.0, 1.0);
    auto loss = [&] {
        Tensor y = gen.forward(x);
        double s = 0.0;
        for (size_t i = 0; i < y.size(); ++i) s += proj[i] * y[i];
        return s;
    };
    loss();
    Tensor gx = gen.backward(proj);
    CHECK(fd_check(x, gx, loss) < kTol);

    for (nn::Param* p : gen.params()) {
        INFO(p->name);
        loss();  // refresh caches before reading accumulated grads
        for (nn::Param* q : gen.params()) q->zero_grad();
        gen.backward(proj);
        Tensor& theta = p->value;
        CHECK(fd_check(theta, p->grad, loss) < kTol);
    }
}

TEST_CASE("discriminator probability gradients") {
    Discriminator d("d", tiny_disc(3));
    Rng rng(7, 8);
    d.init(rng);
    Tensor x = testutil::random_image(2, 3, 8, 8, 10);
    Tensor gp(2, 1, 1, 1);
    gp[0] = 1.3;
    gp[1] = -0.7;
    auto loss = [&] {
        Tensor p = d.forward(x);
        return gp[0] * p[0] + gp[1] * p[1];
    };
    loss();
    Tensor gx = d.backward(gp);
    CHECK(fd_check(x, gx, loss) < kTol);

    for (nn::Param* p : d.params()) {
        INFO(p->name);
        loss();
        for (nn::Param* q : d.params()) q->zero_grad();
        d.backward(gp);
        CHECK(fd_check(p->value, p->grad, loss) < kTol);
    }
}
