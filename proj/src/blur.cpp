// SPDX-License-Identifier: Apache-2.0
#include "wespe/blur.hpp"

#include <cmath>

#include "wespe/errors.hpp"

namespace wespe {

double BlurKernel::weight_sum() const {
    double s = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) s += weights[i];
    return s;
}

BlurKernel BlurKernel::delta(int radius) {
    BlurKernel k;
    k.radius = radius;
    k.amplitude = 1.0;
    k.sigma_x = k.sigma_y = 1.0;
    k.weights = Tensor(1, 1, 2 * radius + 1, 2 * radius + 1);
    k.weights.at(0, 0, radius, radius) = 1.0;
    return k;
}

BlurKernel make_blur_kernel(int radius, double amplitude, double sigma,
                            bool sigma_squared) {
    if (radius < 1)
        throw ValidationError("make_blur_kernel: radius must be >= 1");
    if (sigma <= 0.0)
        throw ValidationError("make_blur_kernel: sigma must be > 0");

    BlurKernel k;
    k.radius = radius;
    k.amplitude = amplitude;
    k.sigma_x = k.sigma_y = sigma;
    k.mu_x = k.mu_y = 0.0;
    k.weights = Tensor(1, 1, 2 * radius + 1, 2 * radius + 1);
    double denom = 2.0 * (sigma_squared ? sigma * sigma : sigma);
    for (int kk = -radius; kk <= radius; ++kk)
        for (int ll = -radius; ll <= radius; ++ll)
            k.weights.at(0, 0, kk + radius, ll + radius) =
                amplitude *
                std::exp(-(kk * kk) / denom - (ll * ll) / denom);
    return k;
}

// Mirror about the edge pixel: -1 -> 1, H -> H-2.
static inline int reflect(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

Tensor blur(const Tensor& img, const BlurKernel& kernel) {
    int r = kernel.radius, side = kernel.side();
    if (side > img.h() || side > img.w())
        throw ValidationError("blur: kernel " + std::to_string(side) + "x" +
                              std::to_string(side) + " larger than image " +
                              std::to_string(img.h()) + "x" +
                              std::to_string(img.w()));
    Tensor out(img.n(), img.c(), img.h(), img.w());
    int H = img.h(), W = img.w();
    for (int n = 0; n < img.n(); ++n) {
        for (int c = 0; c < img.c(); ++c) {
            const double* src = img.data() + img.offset(n, c, 0, 0);
            double* dst = out.data() + out.offset(n, c, 0, 0);
            for (int i = 0; i < H; ++i) {
                for (int j = 0; j < W; ++j) {
                    double acc = 0.0;
                    for (int k = -r; k <= r; ++k) {
                        const double* row =
                            src + static_cast<size_t>(reflect(i + k, H)) * W;
                        const double* wrow = kernel.weights.data() +
                                             static_cast<size_t>(k + r) * side;
                        for (int l = -r; l <= r; ++l)
                            acc += row[reflect(j + l, W)] * wrow[l + r];
                    }
                    dst[static_cast<size_t>(i) * W + j] = acc;
                }
            }
        }
    }
    return out;
}

Tensor blur_backward(const Tensor& grad_out, const BlurKernel& kernel) {
    int r = kernel.radius, side = kernel.side();
    int H = grad_out.h(), W = grad_out.w();
    Tensor gin(grad_out.n(), grad_out.c(), H, W);
    for (int n = 0; n < grad_out.n(); ++n) {
        for (int c = 0; c < grad_out.c(); ++c) {
            const double* g = grad_out.data() + grad_out.offset(n, c, 0, 0);
            double* dst = gin.data() + gin.offset(n, c, 0, 0);
            for (int i = 0; i < H; ++i) {
                for (int j = 0; j < W; ++j) {
                    double gij = g[static_cast<size_t>(i) * W + j];
                    for (int k = -r; k <= r; ++k) {
                        double* row =
                            dst + static_cast<size_t>(reflect(i + k, H)) * W;
                        const double* wrow = kernel.weights.data() +
                                             static_cast<size_t>(k + r) * side;
                        for (int l = -r; l <= r; ++l)
                            row[reflect(j + l, W)] += gij * wrow[l + r];
                    }
                }
            }
        }
    }
    return gin;
}

}  // namespace wespe
