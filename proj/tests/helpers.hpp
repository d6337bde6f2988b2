// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wespe/blur.hpp"
#include "wespe/image.hpp"
#include "wespe/models.hpp"
#include "wespe/rng.hpp"
#include "wespe/tensor.hpp"

namespace testutil {

inline void fill_uniform(wespe::Tensor& t, wespe::Rng& rng, double lo = 0.0,
                         double hi = 1.0) {
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
}

inline wespe::Tensor random_image(int n, int c, int h, int w, uint64_t seed,
                                  double lo = 0.05, double hi = 0.95) {
    wespe::Rng rng(seed, 99);
    wespe::Tensor t(n, c, h, w);
    fill_uniform(t, rng, lo, hi);
    return t;
}

/// Max relative error between an analytic gradient and central finite
/// differences of `f` at `x`. Denominator floored so near-zero entries are
/// compared absolutely.
inline double fd_check(wespe::Tensor& x, const wespe::Tensor& analytic,
                       const std::function<double()>& f, double h = 1e-5,
                       double floor_abs = 1e-2) {
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double keep = x[i];
        x[i] = keep + h;
        double fp = f();
        x[i] = keep - h;
        double fm = f();
        x[i] = keep;
        double num = (fp - fm) / (2.0 * h);
        double denom = std::max(floor_abs, std::abs(num) + std::abs(analytic[i]));
        worst = std::max(worst, std::abs(num - analytic[i]) / denom);
    }
    return worst;
}

/// Shallow 3-stage feature archive for desk-scale tests; deepest ReLU is
/// "relu3_1" with downsample factor 4.
inline std::string tiny_features(const std::string& path, uint64_t seed = 11) {
    std::vector<wespe::FeatureLayerSpec> layers = {
        {"conv1_1", 6, false}, {"conv2_1", 8, true}, {"conv3_1", 12, true}};
    wespe::FeatureExtractor::write_archive(path, layers, seed);
    return path;
}

/// Bundle small enough for finite differences and 8x8 inputs.
inline wespe::BundleConfig tiny_bundle_config(const std::string& features_path,
                                              int patch = 8,
                                              uint64_t seed = 5) {
    wespe::BundleConfig cfg;
    cfg.generator = {6, 1, 3};  // width, blocks, entry kernel
    cfg.disc_convs = {{4, 3, 2}, {6, 3, 2}};
    cfg.disc_fc_units = 8;
    cfg.patch_size = patch;
    cfg.features_path = features_path;
    cfg.seed = seed;
    return cfg;
}

/// Writes n synthetic PNGs into dir: smooth color gradients plus seeded
/// noise, hw x hw, distinct per index. `bright` shifts the palette so the
/// two directories form visually distinct domains.
inline void write_toy_images(const std::string& dir, int n, int hw,
                             uint64_t seed, bool bright) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    wespe::Rng rng(seed, 0x70f);
    for (int i = 0; i < n; ++i) {
        wespe::Tensor img(1, 3, hw, hw);
        double base = bright ? 0.55 : 0.15;
        double phase = rng.uniform(0.0, 6.28);
        double freq = rng.uniform(0.05, 0.3);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < hw; ++y)
                for (int x = 0; x < hw; ++x) {
                    double v = base + 0.25 * std::sin(freq * (x + y) + phase + c) +
                               0.08 * rng.uniform(-1.0, 1.0);
                    img.at(0, c, y, x) = std::min(1.0, std::max(0.0, v));
                }
        char name[32];
        std::snprintf(name, sizeof(name), "img_%03d.png", i);
        wespe::save_image(img, (fs::path(dir) / name).string());
    }
}

/// Tile origins exactly as tiled enhancement lays them out: fixed stride,
/// last tile shifted back to end at the border.
inline std::vector<int> tile_origins(int extent, int tile, int overlap) {
    std::vector<int> out;
    int step = std::max(1, tile - overlap);
    for (int v = 0; v < extent; v += step) {
        out.push_back(std::min(v, std::max(0, extent - tile)));
        if (out.back() + tile >= extent) break;
    }
    return out;
}

/// True when coordinate v is covered by exactly one tile. Such pixels carry
/// full feather weight from their owning tile, so the tiled result there is
/// a single untouched generator output.
inline bool single_tile_interior(int v, int extent, int tile, int overlap) {
    int covering = 0;
    for (int o : tile_origins(extent, tile, overlap))
        if (v >= o && v < std::min(o + tile, extent)) ++covering;
    return covering == 1;
}

inline std::string temp_dir(const std::string& tag) {
    namespace fs = std::filesystem;
    fs::path p = fs::temp_directory_path() / ("wespe_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

}  // namespace testutil
