// SPDX-License-Identifier: Apache-2.0
#include "wespe/models.hpp"

#include <algorithm>
#include <cmath>

#include "wespe/checkpoint.hpp"
#include "wespe/errors.hpp"

namespace wespe {

using nlohmann::json;

json GeneratorConfig::to_json() const {
    return {{"width", width}, {"blocks", blocks}, {"entry_kernel", entry_kernel}};
}

GeneratorConfig GeneratorConfig::from_json(const json& j) {
    GeneratorConfig c;
    c.width = j.at("width");
    c.blocks = j.at("blocks");
    c.entry_kernel = j.at("entry_kernel");
    return c;
}

Generator::Generator(const std::string& name, const GeneratorConfig& cfg)
    : cfg_(cfg) {
    if (cfg.width < 1)
        throw ValidationError("generator: width must be >= 1");
    if (cfg.blocks < 1)
        throw ValidationError("generator: residual_blocks must be >= 1");
    if (cfg.entry_kernel < 1 || cfg.entry_kernel % 2 == 0)
        throw ValidationError("generator: entry_kernel must be odd and >= 1");
    int w = cfg.width;
    entry_ = nn::Conv2d(name + ".entry", 3, w, cfg.entry_kernel);
    for (int i = 0; i < cfg.blocks; ++i) {
        std::string bn = name + ".block" + std::to_string(i);
        block_conv_a_.emplace_back(bn + ".a", w, w, 3);
        block_conv_b_.emplace_back(bn + ".b", w, w, 3);
        block_relu_.emplace_back();
    }
    post1_ = nn::Conv2d(name + ".post1", w, w, 3);
    post2_ = nn::Conv2d(name + ".post2", w, w, 3);
    out_ = nn::Conv2d(name + ".out", w, 3, cfg.entry_kernel);
}

void Generator::init(Rng& rng) {
    entry_.init(rng);
    for (int i = 0; i < cfg_.blocks; ++i) {
        block_conv_a_[i].init(rng);
        block_conv_b_[i].init(rng);
    }
    post1_.init(rng);
    post2_.init(rng);
    out_.init(rng);
}

int Generator::receptive_radius() const {
    // Sum of kernel radii along the deepest path; all strides are 1.
    return 2 * (cfg_.entry_kernel / 2) + 2 * cfg_.blocks + 2;
}

Tensor Generator::forward(const Tensor& x) {
    if (x.c() != 3)
        throw ValidationError("generator: expected 3 channels, got " +
                              std::to_string(x.c()));
    if (x.h() < min_input() || x.w() < min_input())
        throw ValidationError("generator: input " + std::to_string(x.h()) +
                              "x" + std::to_string(x.w()) +
                              " below the minimum size of " +
                              std::to_string(min_input()));
    Tensor h = entry_relu_.forward(entry_.forward(x));
    for (int i = 0; i < cfg_.blocks; ++i) {
        Tensor r = block_conv_b_[i].forward(
            block_relu_[i].forward(block_conv_a_[i].forward(h)));
        h += r;
    }
    h = post1_relu_.forward(post1_.forward(h));
    h = post2_relu_.forward(post2_.forward(h));
    return out_act_.forward(out_.forward(h));
}

Tensor Generator::backward(const Tensor& gy, bool accumulate) {
    Tensor g = out_.backward(out_act_.backward(gy), accumulate);
    g = post2_.backward(post2_relu_.backward(g), accumulate);
    g = post1_.backward(post1_relu_.backward(g), accumulate);
    for (int i = cfg_.blocks - 1; i >= 0; --i) {
        Tensor gb = block_conv_b_[i].backward(g, accumulate);
        gb = block_conv_a_[i].backward(block_relu_[i].backward(gb), accumulate);
        g += gb;  // skip connection
    }
    return entry_.backward(entry_relu_.backward(g), accumulate);
}

std::vector<nn::Param*> Generator::params() {
    std::vector<nn::Param*> ps{&entry_.w, &entry_.b};
    for (int i = 0; i < cfg_.blocks; ++i) {
        ps.push_back(&block_conv_a_[i].w);
        ps.push_back(&block_conv_a_[i].b);
        ps.push_back(&block_conv_b_[i].w);
        ps.push_back(&block_conv_b_[i].b);
    }
    for (auto* c : {&post1_, &post2_, &out_}) {
        ps.push_back(&c->w);
        ps.push_back(&c->b);
    }
    return ps;
}

json DiscriminatorConfig::to_json() const {
    json convs = json::array();
    for (const auto& c : this->convs)
        convs.push_back({{"out_c", c.out_c}, {"kernel", c.kernel}, {"stride", c.stride}});
    return {{"in_channels", in_channels},
            {"input_hw", input_hw},
            {"convs", convs},
            {"fc_units", fc_units}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const json& j) {
    DiscriminatorConfig c;
    c.in_channels = j.at("in_channels");
    c.input_hw = j.at("input_hw");
    c.fc_units = j.at("fc_units");
    c.convs.clear();
    for (const auto& cj : j.at("convs"))
        c.convs.push_back({cj.at("out_c"), cj.at("kernel"), cj.at("stride")});
    return c;
}

Discriminator::Discriminator(const std::string& name,
                             const DiscriminatorConfig& cfg)
    : cfg_(cfg) {
    if (cfg.convs.empty())
        throw ValidationError("discriminator: needs at least one convolution");
    int in_c = cfg.in_channels;
    int hw = cfg.input_hw;
    for (size_t i = 0; i < cfg.convs.size(); ++i) {
        const auto& s = cfg.convs[i];
        convs_.emplace_back(name + ".conv" + std::to_string(i), in_c, s.out_c,
                            s.kernel, s.stride);
        relus_.emplace_back(0.2);
        hw = convs_.back().out_dim(hw);
        if (hw < 1)
            throw ValidationError(
                "discriminator: input_hw too small for the convolution stack");
        in_c = s.out_c;
    }
    flat_features_ = in_c * hw * hw;
    fc1_ = nn::Dense(name + ".fc1", flat_features_, cfg.fc_units);
    fc2_ = nn::Dense(name + ".fc2", cfg.fc_units, 1);
}

void Discriminator::init(Rng& rng) {
    for (auto& c : convs_) c.init(rng);
    fc1_.init(rng);
    fc2_.init(rng);
}

Tensor Discriminator::forward(const Tensor& x) {
    if (x.c() != cfg_.in_channels)
        throw ValidationError("discriminator: expected " +
                              std::to_string(cfg_.in_channels) +
                              " channels, got " + std::to_string(x.c()));
    if (x.h() != cfg_.input_hw || x.w() != cfg_.input_hw)
        throw ValidationError("discriminator: expected " +
                              std::to_string(cfg_.input_hw) + "x" +
                              std::to_string(cfg_.input_hw) + " input, got " +
                              std::to_string(x.h()) + "x" +
                              std::to_string(x.w()));
    Tensor h = x;
    for (size_t i = 0; i < convs_.size(); ++i)
        h = relus_[i].forward(convs_[i].forward(h));
    // flatten happens implicitly: Dense reads (n, features)
    Tensor flat(h.n(), flat_features_, 1, 1);
    std::copy(h.data(), h.data() + h.size(), flat.data());
    h = fc_relu_.forward(fc1_.forward(flat));
    return sigmoid_.forward(fc2_.forward(h));
}

Tensor Discriminator::backward(const Tensor& gprob, bool accumulate) {
    Tensor g = fc2_.backward(sigmoid_.backward(gprob), accumulate);
    g = fc1_.backward(fc_relu_.backward(g), accumulate);
    // unflatten to the last conv output shape
    int hw = cfg_.input_hw;
    for (auto& c : convs_) hw = c.out_dim(hw);
    Tensor gc(g.n(), cfg_.convs.back().out_c, hw, hw);
    std::copy(g.data(), g.data() + g.size(), gc.data());
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i)
        gc = convs_[i].backward(relus_[i].backward(gc), accumulate);
    return gc;
}

std::vector<nn::Param*> Discriminator::params() {
    std::vector<nn::Param*> ps;
    for (auto& c : convs_) {
        ps.push_back(&c.w);
        ps.push_back(&c.b);
    }
    ps.push_back(&fc1_.w);
    ps.push_back(&fc1_.b);
    ps.push_back(&fc2_.w);
    ps.push_back(&fc2_.b);
    return ps;
}

std::vector<FeatureLayerSpec> FeatureExtractor::vgg19_layers(
    double width_scale) {
    const int block_convs[5] = {2, 2, 4, 4, 4};
    const int block_widths[5] = {64, 128, 256, 512, 512};
    std::vector<FeatureLayerSpec> out;
    for (int b = 0; b < 5; ++b) {
        int w = std::max(1, static_cast<int>(std::lround(block_widths[b] *
                                                         width_scale)));
        for (int i = 0; i < block_convs[b]; ++i) {
            FeatureLayerSpec s;
            s.name = "conv" + std::to_string(b + 1) + "_" + std::to_string(i + 1);
            s.out_c = w;
            s.pool_before = (b > 0 && i == 0);
            out.push_back(s);
        }
    }
    return out;
}

void FeatureExtractor::write_archive(const std::string& path,
                                     const std::vector<FeatureLayerSpec>& layers,
                                     uint64_t seed, double input_scale,
                                     const std::array<double, 3>& input_mean) {
    if (layers.empty())
        throw ValidationError("feature archive: empty layer table");
    json manifest;
    manifest["kind"] = "wespe-features";
    manifest["input_scale"] = input_scale;
    manifest["input_mean"] = input_mean;
    json jl = json::array();
    for (const auto& l : layers)
        jl.push_back({{"name", l.name},
                      {"out_c", l.out_c},
                      {"pool_before", l.pool_before}});
    manifest["layers"] = jl;

    Rng rng(seed, 0xfea7);
    std::vector<Tensor> store;
    store.reserve(layers.size() * 2);
    int in_c = 3;
    for (const auto& l : layers) {
        Tensor w(l.out_c, in_c, 3, 3), b(l.out_c, 1, 1, 1);
        nn::init_uniform_fanin(w, in_c * 9, rng);
        nn::init_uniform_fanin(b, in_c * 9, rng);
        store.push_back(std::move(w));
        store.push_back(std::move(b));
        in_c = l.out_c;
    }
    std::vector<std::pair<std::string, const Tensor*>> entries;
    for (size_t i = 0; i < layers.size(); ++i) {
        entries.emplace_back(layers[i].name + ".w", &store[2 * i]);
        entries.emplace_back(layers[i].name + ".b", &store[2 * i + 1]);
    }
    save_archive(path, manifest, entries);
}

FeatureExtractor::FeatureExtractor(const std::string& archive_path) {
    Archive a = load_archive(archive_path);
    if (a.manifest.value("kind", "") != "wespe-features")
        throw IoError("feature archive: wrong kind in " + archive_path);
    input_scale_ = a.manifest.value("input_scale", 1.0);
    if (a.manifest.contains("input_mean")) {
        auto m = a.manifest["input_mean"];
        for (int i = 0; i < 3; ++i) input_mean_[i] = m.at(i);
    }
    int in_c = 3;
    for (const auto& jl : a.manifest.at("layers")) {
        FeatureLayerSpec s;
        s.name = jl.at("name");
        s.out_c = jl.at("out_c");
        s.pool_before = jl.at("pool_before");
        nn::Conv2d conv(s.name, in_c, s.out_c, 3, 1);
        conv.w.value = a.require(s.name + ".w", {s.out_c, in_c, 3, 3});
        conv.b.value = a.require(s.name + ".b", {s.out_c, 1, 1, 1});
        layers_.push_back(s);
        convs_.push_back(std::move(conv));
        relus_.emplace_back();
        pools_.emplace_back();
        in_c = s.out_c;
    }
    if (layers_.empty())
        throw IoError("feature archive: no layers in " + archive_path);
    default_layer_ = "relu" + layers_.back().name.substr(4);
}

int FeatureExtractor::layer_index(const std::string& relu_name) const {
    if (relu_name.rfind("relu", 0) != 0)
        throw ValidationError("features: layer must be named relu<b>_<i>, got " +
                              relu_name);
    std::string suffix = relu_name.substr(4);
    for (size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].name.substr(4) == suffix) return static_cast<int>(i);
    throw ValidationError("features: no layer " + relu_name +
                          " in the loaded archive");
}

bool FeatureExtractor::has_layer(const std::string& relu_name) const {
    if (relu_name.rfind("relu", 0) != 0) return false;
    std::string suffix = relu_name.substr(4);
    for (const auto& l : layers_)
        if (l.name.substr(4) == suffix) return true;
    return false;
}

int FeatureExtractor::downsample_factor(const std::string& relu_name) const {
    int j = layer_index(relu_name);
    int f = 1;
    for (int i = 0; i <= j; ++i)
        if (layers_[i].pool_before) f *= 2;
    return f;
}

Tensor FeatureExtractor::forward(const Tensor& x, const std::string& relu_name) {
    if (x.c() != 3)
        throw ValidationError("features: expected 3 channels, got " +
                              std::to_string(x.c()));
    int j = layer_index(relu_name);
    // Input adapter: the [0,1] pipeline convention -> the archive convention.
    Tensor h = x;
    for (int n = 0; n < h.n(); ++n)
        for (int c = 0; c < 3; ++c) {
            double* p = h.data() + h.offset(n, c, 0, 0);
            size_t plane = static_cast<size_t>(h.h()) * h.w();
            for (size_t i = 0; i < plane; ++i)
                p[i] = p[i] * input_scale_ - input_mean_[c];
        }
    for (int i = 0; i <= j; ++i) {
        if (layers_[i].pool_before) h = pools_[i].forward(h);
        h = relus_[i].forward(convs_[i].forward(h));
    }
    last_forward_layer_ = j;
    return h;
}

Tensor FeatureExtractor::backward(const Tensor& gy) {
    if (last_forward_layer_ < 0)
        throw ValidationError("features: backward without forward");
    Tensor g = gy;
    for (int i = last_forward_layer_; i >= 0; --i) {
        g = convs_[i].backward(relus_[i].backward(g), /*accumulate=*/false);
        if (layers_[i].pool_before) g = pools_[i].backward(g);
    }
    for (size_t i = 0; i < g.size(); ++i) g[i] *= input_scale_;
    return g;
}

std::vector<const Tensor*> FeatureExtractor::weights() const {
    std::vector<const Tensor*> out;
    for (const auto& c : convs_) {
        out.push_back(&c.w.value);
        out.push_back(&c.b.value);
    }
    return out;
}

json BundleConfig::to_json() const {
    json convs = json::array();
    for (const auto& c : disc_convs)
        convs.push_back({{"out_c", c.out_c}, {"kernel", c.kernel}, {"stride", c.stride}});
    return {{"generator", generator.to_json()},
            {"disc_convs", convs},
            {"disc_fc_units", disc_fc_units},
            {"patch_size", patch_size},
            {"features_path", features_path},
            {"perceptual_layer", perceptual_layer},
            {"seed", seed}};
}

BundleConfig BundleConfig::from_json(const json& j) {
    BundleConfig c;
    c.generator = GeneratorConfig::from_json(j.at("generator"));
    c.disc_convs.clear();
    for (const auto& cj : j.at("disc_convs"))
        c.disc_convs.push_back({cj.at("out_c"), cj.at("kernel"), cj.at("stride")});
    c.disc_fc_units = j.at("disc_fc_units");
    c.patch_size = j.at("patch_size");
    c.features_path = j.at("features_path");
    c.perceptual_layer = j.at("perceptual_layer");
    c.seed = j.at("seed");
    return c;
}

std::vector<nn::Param*> ModelBundle::generator_params() {
    auto ps = G.params();
    auto fs = F.params();
    ps.insert(ps.end(), fs.begin(), fs.end());
    return ps;
}

std::vector<nn::Param*> ModelBundle::dc_params() { return Dc.params(); }
std::vector<nn::Param*> ModelBundle::dt_params() { return Dt.params(); }

ModelBundle build_bundle(const BundleConfig& cfg) {
    ModelBundle b;
    b.cfg = cfg;
    b.G = Generator("G", cfg.generator);
    b.F = Generator("F", cfg.generator);
    DiscriminatorConfig dc;
    dc.in_channels = 3;
    dc.input_hw = cfg.patch_size;
    dc.convs = cfg.disc_convs;
    dc.fc_units = cfg.disc_fc_units;
    DiscriminatorConfig dt = dc;
    dt.in_channels = 1;
    b.Dc = Discriminator("Dc", dc);
    b.Dt = Discriminator("Dt", dt);
    b.features = FeatureExtractor(cfg.features_path);
    b.perceptual_layer = cfg.perceptual_layer.empty()
                             ? b.features.default_layer()
                             : cfg.perceptual_layer;
    if (!b.features.has_layer(b.perceptual_layer))
        throw ValidationError("build_bundle: perceptual layer " +
                              b.perceptual_layer + " not in feature archive");
    Rng rng(cfg.seed, 0x1417);
    b.G.init(rng);
    b.F.init(rng);
    b.Dc.init(rng);
    b.Dt.init(rng);
    return b;
}

static double feather_weight(int d_lo, int d_hi, bool lo_is_border,
                             bool hi_is_border) {
    double w = 1.0;
    if (!lo_is_border)
        w = std::min(w, static_cast<double>(d_lo + 1) / (kTileOverlap + 1));
    if (!hi_is_border)
        w = std::min(w, static_cast<double>(d_hi + 1) / (kTileOverlap + 1));
    return w;
}

Tensor enhance(Generator& g, const Tensor& img, std::optional<int> tile) {
    if (img.c() != 3)
        throw ValidationError("enhance: expected 3 channels");
    if (!tile) return g.forward(img);

    int t = *tile;
    if (t < g.min_input())
        throw ValidationError("enhance: tile size " + std::to_string(t) +
                              " below the generator minimum of " +
                              std::to_string(g.min_input()));
    int H = img.h(), W = img.w();
    if (t >= H && t >= W) return g.forward(img);

    int step = std::max(1, t - kTileOverlap);
    std::vector<int> ys, xs;
    for (int y = 0; y < H; y += step) {
        ys.push_back(std::min(y, std::max(0, H - t)));
        if (ys.back() + t >= H) break;
    }
    for (int x = 0; x < W; x += step) {
        xs.push_back(std::min(x, std::max(0, W - t)));
        if (xs.back() + t >= W) break;
    }

    Tensor acc(img.n(), 3, H, W);
    Tensor wsum(img.n(), 1, H, W);
    for (int y0 : ys) {
        for (int x0 : xs) {
            int th = std::min(t, H - y0), tw = std::min(t, W - x0);
            Tensor patch(img.n(), 3, th, tw);
            for (int n = 0; n < img.n(); ++n)
                for (int c = 0; c < 3; ++c)
                    for (int y = 0; y < th; ++y)
                        for (int x = 0; x < tw; ++x)
                            patch.at(n, c, y, x) = img.at(n, c, y0 + y, x0 + x);
            Tensor out = g.forward(patch);
            for (int n = 0; n < img.n(); ++n)
                for (int y = 0; y < th; ++y)
                    for (int x = 0; x < tw; ++x) {
                        double wy = feather_weight(y, th - 1 - y, y0 == 0,
                                                   y0 + th == H);
                        double wx = feather_weight(x, tw - 1 - x, x0 == 0,
                                                   x0 + tw == W);
                        double w = std::min(wy, wx);
                        for (int c = 0; c < 3; ++c)
                            acc.at(n, c, y0 + y, x0 + x) +=
                                w * out.at(n, c, y, x);
                        wsum.at(n, 0, y0 + y, x0 + x) += w;
                    }
        }
    }
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    acc.at(n, c, y, x) /= wsum.at(n, 0, y, x);
    return acc;
}

}  // namespace wespe
