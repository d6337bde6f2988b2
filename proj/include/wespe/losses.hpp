// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "wespe/blur.hpp"
#include "wespe/models.hpp"
#include "wespe/tensor.hpp"

namespace wespe {

/// Objective weights: total = content + 5e-3 (color + texture) + 10 tv.
constexpr double kAdversarialWeight = 5e-3;
constexpr double kTvWeight = 10.0;
/// Probabilities are clamped to [eps, 1-eps] inside every log.
constexpr double kProbEps = 1e-8;

/// Per-step scalar record. All components are finite by contract.
struct LossBreakdown {
    double content = 0.0;
    double color = 0.0;
    double texture = 0.0;
    double tv = 0.0;
    double total = 0.0;
    double d_color = 0.0;
    double d_texture = 0.0;

    /// One machine-parsable log line: "step=N content=... ... d_texture=...".
    std::string log_line(long step) const;
    static LossBreakdown parse_log_line(const std::string& line, long* step);
};

/// Perceptual distance: per-image mean over C_j*H_j*W_j of squared feature
/// differences at the selected layer, summed over the batch.
double content_loss(const Tensor& x, const Tensor& x_rec, FeatureExtractor& f,
                    const std::string& layer);
/// Same value; also returns d(loss)/d(x_rec). The extractor stays frozen.
double content_loss_grad(const Tensor& x, const Tensor& x_rec,
                         FeatureExtractor& f, const std::string& layer,
                         Tensor& grad_x_rec);

/// -sum_i log Dc(blur(enhanced)_i). Gradient flows into the image only.
double color_loss(const Tensor& enhanced, Discriminator& dc,
                  const BlurKernel& kernel);
double color_loss_grad(const Tensor& enhanced, Discriminator& dc,
                       const BlurKernel& kernel, Tensor& grad_enhanced);

/// -sum_i log Dt(gray(enhanced)_i). Gradient flows into the image only.
double texture_loss(const Tensor& enhanced, Discriminator& dt);
double texture_loss_grad(const Tensor& enhanced, Discriminator& dt,
                         Tensor& grad_enhanced);

/// Anisotropic total variation: per image, (|dh|_2 + |dv|_2) / (C*H*W) with
/// forward differences, summed over the batch. An isotropic variant
/// (pointwise sqrt(dh^2+dv^2)) is available behind the flag.
double tv_loss(const Tensor& img, bool isotropic = false);
double tv_loss_grad(const Tensor& img, Tensor& grad, bool isotropic = false);

/// The exact weighted sum. Any non-finite part is a NumericError naming the
/// offending term.
double total_loss(double content, double color, double texture, double tv);

/// Cross-entropy on clamped probabilities:
/// -sum log(real) - sum log(1 - fake). Probabilities are (n,1,1,1) tensors.
double discriminator_loss(const Tensor& real_probs, const Tensor& fake_probs);
double discriminator_loss_grad(const Tensor& real_probs,
                               const Tensor& fake_probs, Tensor& grad_real,
                               Tensor& grad_fake);

}  // namespace wespe
