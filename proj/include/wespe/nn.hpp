// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "wespe/rng.hpp"
#include "wespe/tensor.hpp"

namespace wespe::nn {

/// Named trainable tensor with its gradient accumulator.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    void alloc(const std::string& n, int a, int b, int c, int d) {
        name = n;
        value = Tensor(a, b, c, d);
        grad = Tensor(a, b, c, d);
    }
    void zero_grad() { grad.zero(); }
};

/// Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform_fanin(Tensor& t, int fan_in, Rng& rng);

/// 2-D convolution (cross-correlation) with zero padding, im2col + GEMM.
/// backward() must directly follow the forward() whose gradient it receives;
/// the layer caches only its last input.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(const std::string& name, int in_c, int out_c, int k, int stride = 1,
           int pad = -1);  // pad < 0 means k/2 ("same" at stride 1)

    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    /// Returns the input gradient; accumulates parameter gradients when
    /// accumulate is true (false for frozen or detached passes).
    Tensor backward(const Tensor& gy, bool accumulate = true);

    int out_dim(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }
    int in_channels() const { return in_c_; }
    int out_channels() const { return out_c_; }
    int kernel() const { return k_; }
    int stride() const { return stride_; }

    Param w, b;

private:
    void im2col(const Tensor& x, int n, double* cols) const;
    void col2im(const double* cols, Tensor& gx, int n) const;

    int in_c_ = 0, out_c_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    Tensor x_;
    std::vector<double> cols_;
};

/// Fully connected layer over flattened (n, features) input.
class Dense {
public:
    Dense() = default;
    Dense(const std::string& name, int in_f, int out_f);

    void init(Rng& rng);
    Tensor forward(const Tensor& x);  // x: (n, in_f, 1, 1)
    Tensor backward(const Tensor& gy, bool accumulate = true);

    int in_features() const { return in_f_; }
    int out_features() const { return out_f_; }

    Param w, b;  // w: (out_f, in_f, 1, 1)

private:
    int in_f_ = 0, out_f_ = 0;
    Tensor x_;
};

/// Elementwise max(x, slope*x). slope 0 is plain ReLU.
class ReLU {
public:
    explicit ReLU(double slope = 0.0) : slope_(slope) {}
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy) const;

private:
    double slope_;
    Tensor x_;
};

/// 0.5 * (tanh(x) + 1): bounded output activation onto [0, 1].
class TanhRange01 {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy) const;

private:
    Tensor y_;
};

class Sigmoid {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy) const;

private:
    Tensor y_;
};

/// 2x2 max pooling, stride 2. Odd trailing rows/columns are dropped.
class MaxPool2 {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy) const;

private:
    std::array<int, 4> in_shape_{0, 0, 0, 0};
    std::vector<int> argmax_;  // flat input index per output element
    Tensor dummy_;
};

/// Adam with bias correction, one instance per parameter group.
class Adam {
public:
    Adam() = default;
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    /// Applies one update from the accumulated gradients, then zeroes them.
    /// Moment slots are allocated on first use and stay aligned with the
    /// parameter order, which therefore must not change between steps.
    void step(const std::vector<Param*>& params);

    long t() const { return t_; }
    std::vector<Tensor>& moments_m() { return m_; }
    std::vector<Tensor>& moments_v() { return v_; }
    void restore_t(long t) { t_ = t; }
    double lr() const { return lr_; }

private:
    double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace wespe::nn
