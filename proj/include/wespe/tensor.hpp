// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace wespe {

/// Dense rank-4 array in NCHW order. Lower-rank data (vectors, matrices)
/// uses trailing singleton dimensions. Double precision throughout so the
/// finite-difference gradient checks are meaningful.
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w)
        : shape_{n, c, h, w},
          v_(static_cast<size_t>(n) * c * h * w, 0.0) {
        if (n < 0 || c < 0 || h < 0 || w < 0)
            throw std::invalid_argument("Tensor: negative dimension");
    }

    static Tensor scalar(double x) {
        Tensor t(1, 1, 1, 1);
        t.v_[0] = x;
        return t;
    }

    int n() const { return shape_[0]; }
    int c() const { return shape_[1]; }
    int h() const { return shape_[2]; }
    int w() const { return shape_[3]; }
    const std::array<int, 4>& shape() const { return shape_; }

    size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    double& operator[](size_t i) { return v_[i]; }
    double operator[](size_t i) const { return v_[i]; }

    double& at(int n, int c, int h, int w) {
        return v_[offset(n, c, h, w)];
    }
    double at(int n, int c, int h, int w) const {
        return v_[offset(n, c, h, w)];
    }

    size_t offset(int n, int c, int h, int w) const {
        return ((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) *
                   shape_[3] +
               w;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(double x) { std::fill(v_.begin(), v_.end(), x); }
    void zero() { fill(0.0); }

    Tensor& operator+=(const Tensor& o) {
        require_same_shape(o, "+=");
        for (size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        require_same_shape(o, "-=");
        for (size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
        return *this;
    }
    Tensor& operator*=(double s) {
        for (double& x : v_) x *= s;
        return *this;
    }

    /// Adds s * o into this tensor.
    void axpy(double s, const Tensor& o) {
        require_same_shape(o, "axpy");
        for (size_t i = 0; i < v_.size(); ++i) v_[i] += s * o.v_[i];
    }

    std::string shape_str() const {
        return "(" + std::to_string(shape_[0]) + ", " +
               std::to_string(shape_[1]) + ", " + std::to_string(shape_[2]) +
               ", " + std::to_string(shape_[3]) + ")";
    }

private:
    void require_same_shape(const Tensor& o, const char* op) const {
        if (!same_shape(o))
            throw std::invalid_argument(std::string("Tensor") + op +
                                        ": shape mismatch " + shape_str() +
                                        " vs " + o.shape_str());
    }

    std::array<int, 4> shape_{0, 0, 0, 0};
    std::vector<double> v_;
};

}  // namespace wespe
