// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wespe/nn.hpp"
#include "wespe/tensor.hpp"

namespace wespe {

/// Fully convolutional residual enhancer: 9x9 entry convolution to `width`
/// channels, `blocks` residual blocks of two 3x3 convolutions with a skip,
/// two 3x3 convolutions, a 9x9 output convolution back to 3 channels, and a
/// bounded activation onto [0,1]. Output spatial size equals input size.
struct GeneratorConfig {
    int width = 64;
    int blocks = 4;
    int entry_kernel = 9;

    nlohmann::json to_json() const;
    static GeneratorConfig from_json(const nlohmann::json& j);
};

class Generator {
public:
    Generator() = default;
    Generator(const std::string& name, const GeneratorConfig& cfg);

    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy, bool accumulate = true);

    std::vector<nn::Param*> params();
    /// Smallest accepted input side (the largest kernel in the stack).
    int min_input() const { return cfg_.entry_kernel; }
    /// Radius beyond which a border perturbation cannot affect a pixel.
    int receptive_radius() const;
    const GeneratorConfig& config() const { return cfg_; }

private:
    GeneratorConfig cfg_;
    nn::Conv2d entry_;
    nn::ReLU entry_relu_;
    std::vector<nn::Conv2d> block_conv_a_, block_conv_b_;
    std::vector<nn::ReLU> block_relu_;
    nn::Conv2d post1_, post2_, out_;
    nn::ReLU post1_relu_, post2_relu_;
    nn::TanhRange01 out_act_;
};

struct ConvSpec {
    int out_c = 0;
    int kernel = 0;
    int stride = 1;
};

/// Five strided convolutions (strides 4, 2, 1, 1, 2), a 1024-unit fully
/// connected layer, and a sigmoid scalar head: one probability per image.
/// The fully connected layer fixes the accepted input size to input_hw.
struct DiscriminatorConfig {
    int in_channels = 3;
    int input_hw = 100;
    std::vector<ConvSpec> convs = {
        {48, 11, 4}, {128, 5, 2}, {192, 3, 1}, {192, 3, 1}, {128, 3, 2}};
    int fc_units = 1024;

    nlohmann::json to_json() const;
    static DiscriminatorConfig from_json(const nlohmann::json& j);
};

class Discriminator {
public:
    Discriminator() = default;
    Discriminator(const std::string& name, const DiscriminatorConfig& cfg);

    void init(Rng& rng);
    /// Returns (n, 1, 1, 1) probabilities in (0, 1).
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gprob, bool accumulate = true);

    std::vector<nn::Param*> params();
    const DiscriminatorConfig& config() const { return cfg_; }

private:
    DiscriminatorConfig cfg_;
    std::vector<nn::Conv2d> convs_;
    std::vector<nn::ReLU> relus_;
    nn::Dense fc1_, fc2_;
    nn::ReLU fc_relu_{0.2};
    nn::Sigmoid sigmoid_;
    int flat_features_ = 0;
};

/// One convolutional stage of the frozen perceptual stack.
struct FeatureLayerSpec {
    std::string name;       // e.g. "conv3_2"; its ReLU output is "relu3_2"
    int out_c = 0;
    bool pool_before = false;  // 2x2 max pool in front of this convolution
};

/// Frozen VGG-arrangement feature stack loaded from a tensor archive. The
/// archive manifest carries the layer table plus the input convention
/// (scale and per-channel mean) expected by the stored weights; callers
/// always pass [0,1] RGB and the adapter is applied internally.
class FeatureExtractor {
public:
    FeatureExtractor() = default;
    explicit FeatureExtractor(const std::string& archive_path);

    /// The canonical 16-convolution VGG-19 layer table, optionally narrowed
    /// (width_scale < 1 shrinks channel counts for desk-scale runs).
    static std::vector<FeatureLayerSpec> vgg19_layers(double width_scale = 1.0);

    /// Writes a feature archive with deterministically seeded random weights.
    /// Stands in for converted pretrained weights where none are available.
    static void write_archive(const std::string& path,
                              const std::vector<FeatureLayerSpec>& layers,
                              uint64_t seed, double input_scale = 1.0,
                              const std::array<double, 3>& input_mean = {0, 0, 0});

    bool has_layer(const std::string& relu_name) const;
    /// Cumulative pooling stride in front of the named layer's output.
    int downsample_factor(const std::string& relu_name) const;
    const std::string& default_layer() const { return default_layer_; }

    /// ReLU activations of the named layer ("relu<block>_<idx>").
    Tensor forward(const Tensor& x, const std::string& relu_name);
    /// Input gradient of the last forward. Never touches the frozen weights.
    Tensor backward(const Tensor& gy);

    /// Frozen parameter values, for the bitwise-constancy checks.
    std::vector<const Tensor*> weights() const;
    const std::vector<FeatureLayerSpec>& layers() const { return layers_; }

private:
    int layer_index(const std::string& relu_name) const;

    std::vector<FeatureLayerSpec> layers_;
    std::vector<nn::Conv2d> convs_;
    std::vector<nn::ReLU> relus_;
    std::vector<nn::MaxPool2> pools_;
    double input_scale_ = 1.0;
    std::array<double, 3> input_mean_{0, 0, 0};
    std::string default_layer_;
    int last_forward_layer_ = -1;
    Tensor adapter_cache_;
};

struct BundleConfig {
    GeneratorConfig generator;
    std::vector<ConvSpec> disc_convs =
        DiscriminatorConfig{}.convs;
    int disc_fc_units = 1024;
    int patch_size = 100;
    std::string features_path;
    std::string perceptual_layer;  // empty: the archive's deepest ReLU
    uint64_t seed = 0;

    nlohmann::json to_json() const;
    static BundleConfig from_json(const nlohmann::json& j);
};

/// The four trainable networks plus the frozen feature extractor.
/// G and F share the architecture but never parameter storage.
struct ModelBundle {
    BundleConfig cfg;
    Generator G, F;
    Discriminator Dc, Dt;
    FeatureExtractor features;
    std::string perceptual_layer;

    std::vector<nn::Param*> generator_params();  // G then F
    std::vector<nn::Param*> dc_params();
    std::vector<nn::Param*> dt_params();
};

ModelBundle build_bundle(const BundleConfig& cfg);

/// Full-image enhancement. With a tile size set, the image is processed in
/// overlapping tiles (32 px overlap) blended with a linear feather; tile
/// interiors match the untiled result once the overlap covers the
/// generator's receptive radius.
Tensor enhance(Generator& g, const Tensor& img,
               std::optional<int> tile = std::nullopt);

constexpr int kTileOverlap = 32;

}  // namespace wespe
