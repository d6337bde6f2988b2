// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include "helpers.hpp"
#include "wespe/errors.hpp"
#include "wespe/train.hpp"

using namespace wespe;
namespace fs = std::filesystem;

namespace {

// Small end-to-end configuration: 16x16 patches, narrow nets.
TrainConfig desk_config(const std::string& root, uint64_t seed = 1) {
    testutil::write_toy_images(root + "/src", 6, 40, 10 + seed, false);
    testutil::write_toy_images(root + "/tgt", 6, 40, 20 + seed, true);
    testutil::tiny_features(root + "/f.wfa");

    TrainConfig cfg;
    cfg.iterations = 3;
    cfg.batch_size = 2;
    cfg.patch_size = 16;
    cfg.blur_radius = 3;
    cfg.generator_width = 6;
    cfg.residual_blocks = 1;
    cfg.generator_entry_kernel = 3;
    cfg.disc_width_scale = 0.1;
    cfg.disc_fc_units = 8;
    cfg.perceptual_layer = "relu2_1";
    cfg.checkpoint_every = 2;
    cfg.seed = seed;
    cfg.deterministic = true;
    cfg.source_dir = root + "/src";
    cfg.target_dir = root + "/tgt";
    cfg.checkpoint_dir = root + "/ckpt";
    cfg.features_path = root + "/f.wfa";
    return cfg;
}

std::vector<double> snapshot(const std::vector<nn::Param*>& ps) {
    std::vector<double> out;
    for (const nn::Param* p : ps)
        out.insert(out.end(), p->value.data(), p->value.data() + p->value.size());
    return out;
}

}  // namespace

TEST_CASE("config serialization is canonical and hashing is stable") {
    TrainConfig a;
    a.learning_rate = 2.5e-4;
    a.source_dir = "/data/src";
    TrainConfig b = TrainConfig::parse(a.serialize());
    CHECK(b.serialize() == a.serialize());
    CHECK(b.hash() == a.hash());
    b.set("learning_rate", "1e-3");
    CHECK(b.hash() != a.hash());
    CHECK_THROWS_AS(a.set("no_such_knob", "1"), ValidationError);
    CHECK_THROWS_AS(TrainConfig::parse("batch_size = zebra"), ValidationError);
}

TEST_CASE("config validation catches bad ranges") {
    TrainConfig cfg;
    cfg.source_dir = "/s";
    cfg.target_dir = "/t";
    cfg.features_path = "/f";
    CHECK_NOTHROW(cfg.validate());
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.batch_size = 2;
    cfg.residual_blocks = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("adversarial gradients never leak into discriminator accumulators") {
    std::string root = testutil::temp_dir("detach0");
    TrainState s = make_train_state(desk_config(root));
    Tensor x = testutil::random_image(2, 3, 16, 16, 1);
    Tensor g;
    color_loss_grad(x, s.bundle.Dc, s.kernel, g);
    texture_loss_grad(x, s.bundle.Dt, g);
    for (nn::Param* p : s.bundle.dc_params())
        for (size_t i = 0; i < p->grad.size(); ++i) CHECK(p->grad[i] == 0.0);
    for (nn::Param* p : s.bundle.dt_params())
        for (size_t i = 0; i < p->grad.size(); ++i) CHECK(p->grad[i] == 0.0);
}

TEST_CASE("one train step moves every group but leaves features frozen") {
    std::string root = testutil::temp_dir("detach1");
    TrainState s = make_train_state(desk_config(root));
    UnpairedDataset ds(s.cfg.source_dir, s.cfg.target_dir, s.cfg.patch_size,
                       s.cfg.seed);

    auto g0 = snapshot(s.bundle.generator_params());
    auto dc0 = snapshot(s.bundle.dc_params());
    auto dt0 = snapshot(s.bundle.dt_params());
    std::vector<double> f0;
    for (const Tensor* t : s.bundle.features.weights())
        f0.insert(f0.end(), t->data(), t->data() + t->size());

    for (int i = 0; i < 10; ++i) {
        auto [x, y] = ds.sample_patch_batch(2);
        train_step(s, x, y);
    }
    CHECK(s.step == 10);
    CHECK(snapshot(s.bundle.generator_params()) != g0);
    CHECK(snapshot(s.bundle.dc_params()) != dc0);
    CHECK(snapshot(s.bundle.dt_params()) != dt0);

    std::vector<double> f1;
    for (const Tensor* t : s.bundle.features.weights())
        f1.insert(f1.end(), t->data(), t->data() + t->size());
    CHECK(f1 == f0);  // bitwise frozen
}

TEST_CASE("checkpoint round trip reproduces future steps bitwise") {
    std::string root = testutil::temp_dir("ckpt_rt");
    TrainConfig cfg = desk_config(root);
    TrainState a = make_train_state(cfg);
    UnpairedDataset da(cfg.source_dir, cfg.target_dir, cfg.patch_size, cfg.seed);
    for (int i = 0; i < 3; ++i) {
        auto [x, y] = da.sample_patch_batch(cfg.batch_size);
        train_step(a, x, y);
    }
    fs::create_directories(root + "/ckpt");
    save_checkpoint(a, root + "/ckpt/mid.ckpt", &da);

    TrainState b = make_train_state(cfg);
    UnpairedDataset db(cfg.source_dir, cfg.target_dir, cfg.patch_size, cfg.seed);
    load_checkpoint(b, root + "/ckpt/mid.ckpt", &db);
    CHECK(b.step == 3);
    CHECK(snapshot(b.bundle.generator_params()) ==
          snapshot(a.bundle.generator_params()));
    CHECK(snapshot(b.bundle.dc_params()) == snapshot(a.bundle.dc_params()));
    CHECK(snapshot(b.bundle.dt_params()) == snapshot(a.bundle.dt_params()));

    for (int i = 0; i < 3; ++i) {
        auto [xa, ya] = da.sample_patch_batch(cfg.batch_size);
        auto [xb, yb] = db.sample_patch_batch(cfg.batch_size);
        LossBreakdown la = train_step(a, xa, ya);
        LossBreakdown lb = train_step(b, xb, yb);
        CHECK(la.log_line(a.step) == lb.log_line(b.step));
    }
}

TEST_CASE("a corrupt checkpoint leaves the state untouched") {
    std::string root = testutil::temp_dir("ckpt_bad");
    TrainConfig cfg = desk_config(root);
    TrainState s = make_train_state(cfg);
    auto before = snapshot(s.bundle.generator_params());
    std::ofstream(root + "/bad.ckpt") << "garbage";
    CHECK_THROWS_AS(load_checkpoint(s, root + "/bad.ckpt"), IoError);
    CHECK(snapshot(s.bundle.generator_params()) == before);
}

TEST_CASE("two deterministic runs log identically; resume matches") {
    std::string root1 = testutil::temp_dir("repro1");
    std::string root2 = testutil::temp_dir("repro2");
    TrainConfig c1 = desk_config(root1, 9);
    TrainConfig c2 = desk_config(root2, 9);
    c1.iterations = c2.iterations = 4;

    std::vector<std::string> log1, log2;
    train(c1, std::nullopt,
          [&](long s, const LossBreakdown& b) { log1.push_back(b.log_line(s)); });
    train(c2, std::nullopt,
          [&](long s, const LossBreakdown& b) { log2.push_back(b.log_line(s)); });
    REQUIRE(log1.size() == 4);
    CHECK(log1 == log2);

    // Fresh run of the first two steps, then resume for the last two.
    std::string root3 = testutil::temp_dir("repro3");
    TrainConfig c3 = desk_config(root3, 9);
    c3.iterations = 2;
    std::string mid = train(c3);
    c3.iterations = 4;
    std::vector<std::string> log3;
    train(c3, mid,
          [&](long s, const LossBreakdown& b) { log3.push_back(b.log_line(s)); });
    REQUIRE(log3.size() == 2);
    CHECK(log3[0] == log1[2]);
    CHECK(log3[1] == log1[3]);
}

TEST_CASE("train writes a parsable log file and a loadable generator") {
    std::string root = testutil::temp_dir("train_io");
    TrainConfig cfg = desk_config(root, 4);
    std::string final_ckpt = train(cfg);
    CHECK(fs::exists(final_ckpt));
    CHECK(fs::exists(root + "/ckpt/latest.ckpt"));

    std::ifstream log(root + "/ckpt/train.log");
    REQUIRE(log.good());
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
        long step = 0;
        LossBreakdown b = LossBreakdown::parse_log_line(line, &step);
        CHECK(step == ++lines);
        CHECK(std::isfinite(b.total));
    }
    CHECK(lines == cfg.iterations);

    Generator g = load_generator(final_ckpt);
    Tensor y = g.forward(testutil::random_image(1, 3, 16, 16, 2));
    CHECK(y.shape() == std::array<int, 4>{1, 3, 16, 16});
}
