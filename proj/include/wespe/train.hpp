// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "wespe/dataset.hpp"
#include "wespe/losses.hpp"
#include "wespe/models.hpp"

namespace wespe {

/// Every knob of the training procedure, serializable as a flat key = value
/// document. A run is a pure function of (config, datasets).
struct TrainConfig {
    long iterations = 20000;
    int batch_size = 30;
    int patch_size = 100;
    double learning_rate = 5e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double content_weight = 1.0;
    double adversarial_weight = kAdversarialWeight;
    double tv_weight = kTvWeight;
    std::string perceptual_layer;  // empty: deepest ReLU in the archive
    double blur_amplitude = 0.053;
    double blur_sigma = 3.0;
    int blur_radius = 10;
    bool blur_sigma_squared = false;  // divide by 2*sigma^2 instead of 2*sigma
    bool tv_isotropic = false;
    uint64_t seed = 0;
    long checkpoint_every = 1000;
    std::string source_dir;
    std::string target_dir;
    std::string checkpoint_dir = ".";
    std::string features_path;
    int generator_width = 64;
    int residual_blocks = 4;
    int generator_entry_kernel = 9;
    double disc_width_scale = 1.0;
    int disc_fc_units = 1024;
    bool recursive = false;
    bool deterministic = false;  // forces synchronous patch sampling

    /// Canonical key = value text, one key per line, sorted.
    std::string serialize() const;
    /// FNV-1a over the canonical serialization.
    uint64_t hash() const;

    static TrainConfig parse(const std::string& text);
    static TrainConfig load(const std::string& path);
    /// Applies one "key=value" override; unknown keys are errors.
    void set(const std::string& key, const std::string& value);

    BundleConfig bundle_config() const;
    BlurKernel make_kernel() const;
    void validate() const;
};

/// Mutable optimization state: the models, one Adam per update group
/// (D_c, D_t, and G+F jointly), and the step counter. Dataset RNG state is
/// checkpointed alongside so a resumed run is bitwise identical.
struct TrainState {
    TrainConfig cfg;
    ModelBundle bundle;
    BlurKernel kernel;
    nn::Adam opt_g, opt_dc, opt_dt;
    long step = 0;
};

TrainState make_train_state(const TrainConfig& cfg);

/// One iteration: D_c update on blurred real/fake, D_t update on grayscale
/// real/fake (fakes detached), then one joint G/F update on the total
/// objective with x_rec = F(G(x)). Throws NumericError on non-finite loss.
LossBreakdown train_step(TrainState& s, const Tensor& x, const Tensor& y);

void save_checkpoint(const TrainState& s, const std::string& path,
                     const UnpairedDataset* ds = nullptr);
/// Restores models, optimizer moments, step, and (when present in the
/// archive and a dataset is given) the sampler RNG state. Fails atomically:
/// on error the state is left untouched.
void load_checkpoint(TrainState& s, const std::string& path,
                     UnpairedDataset* ds = nullptr);

/// Runs cfg.iterations steps, logging one LossBreakdown line per step to
/// stdout and to <checkpoint_dir>/train.log, checkpointing every
/// checkpoint_every steps and at the end. Returns the final checkpoint path.
/// `resume` restarts from a previous checkpoint of the same config.
std::string train(
    const TrainConfig& cfg,
    const std::optional<std::string>& resume = std::nullopt,
    const std::function<void(long, const LossBreakdown&)>& on_step = {});

/// Loads only the forward generator G from a training checkpoint, for
/// inference without datasets or discriminators.
Generator load_generator(const std::string& checkpoint_path);

}  // namespace wespe
