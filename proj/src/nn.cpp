// SPDX-License-Identifier: Apache-2.0
#include "wespe/nn.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "wespe/errors.hpp"

namespace wespe::nn {

using MatRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

void init_uniform_fanin(Tensor& t, int fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

Conv2d::Conv2d(const std::string& name, int in_c, int out_c, int k, int stride,
               int pad)
    : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride),
      pad_(pad < 0 ? k / 2 : pad) {
    w.alloc(name + ".w", out_c, in_c, k, k);
    b.alloc(name + ".b", out_c, 1, 1, 1);
}

void Conv2d::init(Rng& rng) {
    int fan_in = in_c_ * k_ * k_;
    init_uniform_fanin(w.value, fan_in, rng);
    init_uniform_fanin(b.value, fan_in, rng);
}

void Conv2d::im2col(const Tensor& x, int n, double* cols) const {
    int H = x.h(), W = x.w();
    int oh = out_dim(H), ow = out_dim(W);
    size_t ohow = static_cast<size_t>(oh) * ow;
    for (int c = 0; c < in_c_; ++c) {
        const double* plane = x.data() + x.offset(n, c, 0, 0);
        for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
                double* row =
                    cols + ((static_cast<size_t>(c) * k_ + ky) * k_ + kx) * ohow;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride_ + ky - pad_;
                    if (iy < 0 || iy >= H) {
                        for (int ox = 0; ox < ow; ++ox) row[oy * ow + ox] = 0.0;
                        continue;
                    }
                    const double* src = plane + static_cast<size_t>(iy) * W;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride_ + kx - pad_;
                        row[oy * ow + ox] =
                            (ix < 0 || ix >= W) ? 0.0 : src[ix];
                    }
                }
            }
        }
    }
}

void Conv2d::col2im(const double* cols, Tensor& gx, int n) const {
    int H = gx.h(), W = gx.w();
    int oh = out_dim(H), ow = out_dim(W);
    size_t ohow = static_cast<size_t>(oh) * ow;
    for (int c = 0; c < in_c_; ++c) {
        double* plane = gx.data() + gx.offset(n, c, 0, 0);
        for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
                const double* row =
                    cols + ((static_cast<size_t>(c) * k_ + ky) * k_ + kx) * ohow;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride_ + ky - pad_;
                    if (iy < 0 || iy >= H) continue;
                    double* dst = plane + static_cast<size_t>(iy) * W;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride_ + kx - pad_;
                        if (ix >= 0 && ix < W) dst[ix] += row[oy * ow + ox];
                    }
                }
            }
        }
    }
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.c() != in_c_)
        throw ValidationError(w.name + ": expected " + std::to_string(in_c_) +
                              " input channels, got " + std::to_string(x.c()));
    int oh = out_dim(x.h()), ow = out_dim(x.w());
    if (oh < 1 || ow < 1)
        throw ValidationError(w.name + ": input " + std::to_string(x.h()) +
                              "x" + std::to_string(x.w()) +
                              " too small for kernel " + std::to_string(k_) +
                              " stride " + std::to_string(stride_));
    x_ = x;
    size_t ohow = static_cast<size_t>(oh) * ow;
    size_t rows = static_cast<size_t>(in_c_) * k_ * k_;
    cols_.resize(rows * ohow);

    Tensor y(x.n(), out_c_, oh, ow);
    CMapM W(w.value.data(), out_c_, rows);
    for (int n = 0; n < x.n(); ++n) {
        im2col(x, n, cols_.data());
        CMapM C(cols_.data(), rows, ohow);
        MapM Y(y.data() + y.offset(n, 0, 0, 0), out_c_, ohow);
        Y.noalias() = W * C;
        for (int oc = 0; oc < out_c_; ++oc)
            Y.row(oc).array() += b.value[oc];
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& gy, bool accumulate) {
    int oh = gy.h(), ow = gy.w();
    size_t ohow = static_cast<size_t>(oh) * ow;
    size_t rows = static_cast<size_t>(in_c_) * k_ * k_;
    cols_.resize(rows * ohow);
    std::vector<double> gcols(rows * ohow);

    Tensor gx(x_.n(), in_c_, x_.h(), x_.w());
    CMapM W(w.value.data(), out_c_, rows);
    MapM GW(w.grad.data(), out_c_, rows);
    for (int n = 0; n < x_.n(); ++n) {
        CMapM GY(gy.data() + gy.offset(n, 0, 0, 0), out_c_, ohow);
        if (accumulate) {
            im2col(x_, n, cols_.data());
            CMapM C(cols_.data(), rows, ohow);
            GW.noalias() += GY * C.transpose();
            for (int oc = 0; oc < out_c_; ++oc)
                b.grad[oc] += GY.row(oc).sum();
        }
        MapM GC(gcols.data(), rows, ohow);
        GC.noalias() = W.transpose() * GY;
        col2im(gcols.data(), gx, n);
    }
    return gx;
}

Dense::Dense(const std::string& name, int in_f, int out_f)
    : in_f_(in_f), out_f_(out_f) {
    w.alloc(name + ".w", out_f, in_f, 1, 1);
    b.alloc(name + ".b", out_f, 1, 1, 1);
}

void Dense::init(Rng& rng) {
    init_uniform_fanin(w.value, in_f_, rng);
    init_uniform_fanin(b.value, in_f_, rng);
}

Tensor Dense::forward(const Tensor& x) {
    size_t feat = x.size() / x.n();
    if (static_cast<int>(feat) != in_f_)
        throw ValidationError(w.name + ": expected " + std::to_string(in_f_) +
                              " features, got " + std::to_string(feat));
    x_ = x;
    Tensor y(x.n(), out_f_, 1, 1);
    CMapM X(x.data(), x.n(), in_f_);
    CMapM W(w.value.data(), out_f_, in_f_);
    MapM Y(y.data(), x.n(), out_f_);
    Y.noalias() = X * W.transpose();
    for (int i = 0; i < x.n(); ++i)
        for (int o = 0; o < out_f_; ++o) Y(i, o) += b.value[o];
    return y;
}

Tensor Dense::backward(const Tensor& gy, bool accumulate) {
    Tensor gx(x_.n(), x_.c(), x_.h(), x_.w());
    CMapM GY(gy.data(), x_.n(), out_f_);
    CMapM X(x_.data(), x_.n(), in_f_);
    CMapM W(w.value.data(), out_f_, in_f_);
    if (accumulate) {
        MapM GW(w.grad.data(), out_f_, in_f_);
        GW.noalias() += GY.transpose() * X;
        for (int o = 0; o < out_f_; ++o) b.grad[o] += GY.col(o).sum();
    }
    MapM GX(gx.data(), x_.n(), in_f_);
    GX.noalias() = GY * W;
    return gx;
}

Tensor ReLU::forward(const Tensor& x) {
    x_ = x;
    Tensor y = x;
    for (size_t i = 0; i < y.size(); ++i)
        if (y[i] < 0.0) y[i] *= slope_;
    return y;
}

Tensor ReLU::backward(const Tensor& gy) const {
    Tensor gx = gy;
    for (size_t i = 0; i < gx.size(); ++i)
        if (x_[i] < 0.0) gx[i] *= slope_;
    return gx;
}

Tensor TanhRange01::forward(const Tensor& x) {
    Tensor y = x;
    for (size_t i = 0; i < y.size(); ++i)
        y[i] = 0.5 * (std::tanh(y[i]) + 1.0);
    y_ = y;
    return y;
}

Tensor TanhRange01::backward(const Tensor& gy) const {
    // d/dx 0.5(tanh+1) = 0.5 (1 - tanh^2) = 2 y (1 - y)
    Tensor gx = gy;
    for (size_t i = 0; i < gx.size(); ++i)
        gx[i] *= 2.0 * y_[i] * (1.0 - y_[i]);
    return gx;
}

Tensor Sigmoid::forward(const Tensor& x) {
    Tensor y = x;
    for (size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-y[i]));
    y_ = y;
    return y;
}

Tensor Sigmoid::backward(const Tensor& gy) const {
    Tensor gx = gy;
    for (size_t i = 0; i < gx.size(); ++i) gx[i] *= y_[i] * (1.0 - y_[i]);
    return gx;
}

Tensor MaxPool2::forward(const Tensor& x) {
    in_shape_ = x.shape();
    int oh = x.h() / 2, ow = x.w() / 2;
    Tensor y(x.n(), x.c(), oh, ow);
    argmax_.assign(y.size(), 0);
    size_t o = 0;
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox, ++o) {
                    double best = -1e300;
                    int best_idx = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            int idx = static_cast<int>(
                                x.offset(n, c, oy * 2 + dy, ox * 2 + dx));
                            if (x[idx] > best) {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    y[o] = best;
                    argmax_[o] = best_idx;
                }
    return y;
}

Tensor MaxPool2::backward(const Tensor& gy) const {
    Tensor gx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
    for (size_t o = 0; o < gy.size(); ++o) gx[argmax_[o]] += gy[o];
    return gx;
}

void Adam::step(const std::vector<Param*>& params) {
    if (m_.empty()) {
        for (auto* p : params) {
            m_.emplace_back(p->value.n(), p->value.c(), p->value.h(),
                            p->value.w());
            v_.emplace_back(p->value.n(), p->value.c(), p->value.h(),
                            p->value.w());
        }
    }
    if (m_.size() != params.size())
        throw ValidationError("Adam: parameter group changed size");
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        for (size_t j = 0; j < p.value.size(); ++j) {
            double g = p.grad[j];
            m_[i][j] = b1_ * m_[i][j] + (1.0 - b1_) * g;
            v_[i][j] = b2_ * v_[i][j] + (1.0 - b2_) * g * g;
            double mhat = m_[i][j] / bc1;
            double vhat = v_[i][j] / bc2;
            p.value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
        p.zero_grad();
    }
}

}  // namespace wespe::nn
