// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "wespe/tensor.hpp"

namespace wespe {

/// Discrete blur kernel G[k,l] = A exp(-(k-mu_x)^2/(2 sx) - (l-mu_y)^2/(2 sy))
/// for k,l in [-radius, radius]. The denominator is 2*sigma as printed in the
/// source formula; set sigma_squared to divide by 2*sigma^2 instead.
struct BlurKernel {
    int radius = 0;
    double amplitude = 0.0;
    double sigma_x = 0.0, sigma_y = 0.0;
    double mu_x = 0.0, mu_y = 0.0;
    Tensor weights;  // (1, 1, 2r+1, 2r+1), row index = k+radius

    int side() const { return 2 * radius + 1; }
    double weight(int k, int l) const {
        return weights.at(0, 0, k + radius, l + radius);
    }
    double weight_sum() const;

    /// Unit impulse at the center; blur with it is the identity.
    static BlurKernel delta(int radius);
};

/// Kernel with mu = 0 and sigma_x = sigma_y = sigma. Defaults follow the
/// trained-blur constants A = 0.053, sigma = 3, radius 10 (weights beyond
/// that radius are below 6e-8 * A).
BlurKernel make_blur_kernel(int radius = 10, double amplitude = 0.053,
                            double sigma = 3.0, bool sigma_squared = false);

/// Per-channel 2-D cross-correlation with reflect padding (mirror about the
/// edge pixel). Output spatial size equals input size; values lie in
/// [0, weight_sum] for inputs in [0, 1].
Tensor blur(const Tensor& img, const BlurKernel& kernel);

/// Adjoint of blur with respect to the image.
Tensor blur_backward(const Tensor& grad_out, const BlurKernel& kernel);

}  // namespace wespe
