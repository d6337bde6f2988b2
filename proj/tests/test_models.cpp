// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "wespe/checkpoint.hpp"
#include "wespe/errors.hpp"
#include "wespe/models.hpp"

using namespace wespe;

TEST_CASE("generator preserves spatial shape and stays in [0,1]") {
    Generator g("g", {6, 2, 3});
    Rng rng(1, 2);
    g.init(rng);
    for (auto [h, w] : {std::pair{8, 8}, {13, 9}, {32, 17}}) {
        Tensor x = testutil::random_image(1, 3, h, w, 3);
        Tensor y = g.forward(x);
        CHECK(y.shape() == std::array<int, 4>{1, 3, h, w});
        for (size_t i = 0; i < y.size(); ++i) {
            CHECK(y[i] >= 0.0);
            CHECK(y[i] <= 1.0);
        }
    }
}

TEST_CASE("generator rejects inputs smaller than its largest kernel") {
    Generator g("g", {6, 1, 9});
    Rng rng(1, 2);
    g.init(rng);
    CHECK(g.min_input() == 9);
    CHECK_THROWS_AS(g.forward(Tensor(1, 3, 8, 8)), ValidationError);
    CHECK_NOTHROW(g.forward(testutil::random_image(1, 3, 9, 9, 1)));
}

TEST_CASE("a generator without residual blocks is rejected") {
    CHECK_THROWS_AS(Generator("g", {6, 0, 3}), ValidationError);
}

TEST_CASE("generator is translation covariant away from borders") {
    Generator g("g", {6, 1, 3});
    Rng rng(7, 2);
    g.init(rng);
    int r = g.receptive_radius();
    int hw = 4 * r + 8;
    Tensor base = testutil::random_image(1, 3, hw, hw, 17);

    // Shift the content one pixel right; interiors must shift identically.
    Tensor shifted(1, 3, hw, hw);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < hw; ++y)
            for (int x = 1; x < hw; ++x)
                shifted.at(0, c, y, x) = base.at(0, c, y, x - 1);
    Tensor yb = g.forward(base);
    Tensor ys = g.forward(shifted);
    for (int c = 0; c < 3; ++c)
        for (int y = r + 1; y < hw - r - 1; ++y)
            for (int x = r + 1; x < hw - r - 1; ++x)
                CHECK(ys.at(0, c, y, x) ==
                      doctest::Approx(yb.at(0, c, y, x - 1)).epsilon(1e-12));
}

TEST_CASE("discriminator yields one probability per image at its fixed size") {
    DiscriminatorConfig cfg;
    cfg.input_hw = 16;
    cfg.convs = {{4, 3, 2}, {8, 3, 2}};
    cfg.fc_units = 8;
    Discriminator d("d", cfg);
    Rng rng(2, 3);
    d.init(rng);
    Tensor p = d.forward(testutil::random_image(4, 3, 16, 16, 5));
    CHECK(p.shape() == std::array<int, 4>{4, 1, 1, 1});
    for (size_t i = 0; i < p.size(); ++i) {
        CHECK(p[i] > 0.0);
        CHECK(p[i] < 1.0);
    }
    CHECK_THROWS_AS(d.forward(Tensor(1, 3, 15, 16)), ValidationError);
}

TEST_CASE("feature archives rebuild bitwise from the same seed") {
    std::string dir = testutil::temp_dir("feat");
    auto layers = FeatureExtractor::vgg19_layers(0.05);
    FeatureExtractor::write_archive(dir + "/a.wfa", layers, 33);
    FeatureExtractor::write_archive(dir + "/b.wfa", layers, 33);
    FeatureExtractor fa(dir + "/a.wfa"), fb(dir + "/b.wfa");
    auto wa = fa.weights(), wb = fb.weights();
    REQUIRE(wa.size() == wb.size());
    for (size_t i = 0; i < wa.size(); ++i)
        for (size_t j = 0; j < wa[i]->size(); ++j)
            CHECK((*wa[i])[j] == (*wb[i])[j]);
}

TEST_CASE("feature layer selection and downsampling bookkeeping") {
    std::string dir = testutil::temp_dir("feat2");
    testutil::tiny_features(dir + "/f.wfa");
    FeatureExtractor f(dir + "/f.wfa");
    CHECK(f.has_layer("relu1_1"));
    CHECK(f.has_layer("relu3_1"));
    CHECK_FALSE(f.has_layer("relu9_9"));
    CHECK(f.default_layer() == "relu3_1");
    CHECK(f.downsample_factor("relu1_1") == 1);
    CHECK(f.downsample_factor("relu3_1") == 4);

    Tensor x = testutil::random_image(2, 3, 16, 16, 1);
    Tensor deep = f.forward(x, "relu3_1");
    CHECK(deep.shape() == std::array<int, 4>{2, 12, 4, 4});
    for (size_t i = 0; i < deep.size(); ++i) CHECK(deep[i] >= 0.0);
    CHECK_THROWS_AS(f.forward(x, "relu7_1"), ValidationError);
}

TEST_CASE("the canonical feature arrangement has 16 stages") {
    auto layers = FeatureExtractor::vgg19_layers();
    REQUIRE(layers.size() == 16);
    CHECK(layers[0].name == "conv1_1");
    CHECK(layers[0].out_c == 64);
    CHECK(layers[15].name == "conv5_4");
    CHECK(layers[15].out_c == 512);
    int pools = 0;
    for (const auto& l : layers) pools += l.pool_before ? 1 : 0;
    CHECK(pools == 4);  // one in front of each of blocks 2..5
}

TEST_CASE("bundle config survives a json round trip") {
    std::string dir = testutil::temp_dir("bundle");
    BundleConfig cfg = testutil::tiny_bundle_config(
        testutil::tiny_features(dir + "/f.wfa"));
    cfg.perceptual_layer = "relu2_1";
    BundleConfig back = BundleConfig::from_json(cfg.to_json());
    CHECK(back.generator.width == cfg.generator.width);
    CHECK(back.generator.blocks == cfg.generator.blocks);
    CHECK(back.generator.entry_kernel == cfg.generator.entry_kernel);
    CHECK(back.disc_convs.size() == cfg.disc_convs.size());
    CHECK(back.disc_fc_units == cfg.disc_fc_units);
    CHECK(back.patch_size == cfg.patch_size);
    CHECK(back.features_path == cfg.features_path);
    CHECK(back.perceptual_layer == cfg.perceptual_layer);
    CHECK(back.seed == cfg.seed);
}

TEST_CASE("G and F never share parameter storage") {
    std::string dir = testutil::temp_dir("gf");
    ModelBundle b = build_bundle(
        testutil::tiny_bundle_config(testutil::tiny_features(dir + "/f.wfa")));
    auto gp = b.G.params(), fp = b.F.params();
    REQUIRE(gp.size() == fp.size());
    bool any_diff = false;
    for (size_t i = 0; i < gp.size(); ++i) {
        CHECK(&gp[i]->value != &fp[i]->value);
        for (size_t j = 0; j < gp[i]->value.size(); ++j)
            if (gp[i]->value[j] != fp[i]->value[j]) any_diff = true;
    }
    CHECK(any_diff);  // independently initialized, not clones
}

TEST_CASE("tiled and untiled enhancement agree on tile interiors") {
    Generator g("g", {6, 1, 3});
    Rng rng(11, 2);
    g.init(rng);
    int tile = 64;
    Tensor img = testutil::random_image(1, 3, 150, 150, 21);
    Tensor whole = g.forward(img);
    Tensor tiled = enhance(g, img, tile);
    REQUIRE(tiled.same_shape(whole));

    // Compare pixels covered by exactly one tile: they carry full feather
    // weight and no blending, so they must equal the untiled output.
    int checked = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 150; ++y)
            for (int x = 0; x < 150; ++x)
                if (testutil::single_tile_interior(y, 150, tile, kTileOverlap) &&
                    testutil::single_tile_interior(x, 150, tile, kTileOverlap)) {
                    ++checked;
                    CHECK(std::abs(tiled.at(0, c, y, x) - whole.at(0, c, y, x)) <
                          1.0 / 255.0);
                }
    CHECK(checked > 0);
}

TEST_CASE("archive save/load round trips bitwise and checks corruption") {
    std::string dir = testutil::temp_dir("arch");
    Tensor t = testutil::random_image(2, 3, 4, 5, 8, -3.0, 3.0);
    nlohmann::json manifest;
    manifest["kind"] = "test";
    save_archive(dir + "/x.bin", manifest, {{"theta", &t}});
    Archive b = load_archive(dir + "/x.bin");
    CHECK(b.manifest["kind"] == "test");
    const Tensor& back = b.require("theta", t.shape());
    for (size_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);
    CHECK_THROWS_AS(b.require("missing", t.shape()), IoError);

    // Truncated file must be rejected.
    std::filesystem::resize_file(dir + "/x.bin",
                                 std::filesystem::file_size(dir + "/x.bin") / 2);
    CHECK_THROWS_AS(load_archive(dir + "/x.bin"), IoError);
}
