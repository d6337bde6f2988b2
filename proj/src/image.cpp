// SPDX-License-Identifier: Apache-2.0
#include "wespe/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "wespe/errors.hpp"

namespace wespe {

void check_image_batch(const Tensor& img, const char* who) {
    if (img.empty())
        throw ValidationError(std::string(who) + ": empty image batch");
    if (img.c() != 1 && img.c() != 3)
        throw ValidationError(std::string(who) + ": channels must be 1 or 3, got " +
                              std::to_string(img.c()));
    for (size_t i = 0; i < img.size(); ++i) {
        double v = img[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw ValidationError(std::string(who) +
                                  ": pixel value outside [0,1]: " +
                                  std::to_string(v));
    }
}

Tensor load_image(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
    if (m.empty())
        throw IoError("load_image: cannot decode '" + path + "'");

    double max_code;
    switch (m.depth()) {
        case CV_8U: max_code = 255.0; break;
        case CV_16U: max_code = 65535.0; break;
        default:
            throw IoError("load_image: unsupported bit depth in '" + path +
                          "' (8- or 16-bit integer rasters only)");
    }

    int ch = m.channels();
    if (ch == 4) {  // drop alpha
        cv::Mat rgb;
        cv::mixChannels({m}, {rgb = cv::Mat(m.size(), CV_MAKETYPE(m.depth(), 3))},
                        {0, 0, 1, 1, 2, 2});
        m = rgb;
        ch = 3;
    }
    if (ch != 1 && ch != 3)
        throw IoError("load_image: unsupported channel count " +
                      std::to_string(ch) + " in '" + path + "'");

    Tensor out(1, ch, m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            if (ch == 1) {
                double v = m.depth() == CV_8U ? m.at<uint8_t>(y, x)
                                              : m.at<uint16_t>(y, x);
                out.at(0, 0, y, x) = v / max_code;
            } else {
                // OpenCV stores BGR; the pipeline is RGB.
                if (m.depth() == CV_8U) {
                    auto px = m.at<cv::Vec3b>(y, x);
                    out.at(0, 0, y, x) = px[2] / max_code;
                    out.at(0, 1, y, x) = px[1] / max_code;
                    out.at(0, 2, y, x) = px[0] / max_code;
                } else {
                    auto px = m.at<cv::Vec3w>(y, x);
                    out.at(0, 0, y, x) = px[2] / max_code;
                    out.at(0, 1, y, x) = px[1] / max_code;
                    out.at(0, 2, y, x) = px[0] / max_code;
                }
            }
        }
    }
    return out;
}

static cv::Mat to_mat8(const Tensor& img) {
    int h = img.h(), w = img.w(), ch = img.c();
    cv::Mat m(h, w, ch == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (ch == 1) {
                m.at<uint8_t>(y, x) =
                    static_cast<uint8_t>(quantize8(img.at(0, 0, y, x)));
            } else {
                cv::Vec3b px;
                px[2] = static_cast<uint8_t>(quantize8(img.at(0, 0, y, x)));
                px[1] = static_cast<uint8_t>(quantize8(img.at(0, 1, y, x)));
                px[0] = static_cast<uint8_t>(quantize8(img.at(0, 2, y, x)));
                m.at<cv::Vec3b>(y, x) = px;
            }
        }
    }
    return m;
}

void save_image(const Tensor& img, const std::string& path) {
    if (img.n() != 1)
        throw ValidationError("save_image: expected batch of 1, got " +
                              std::to_string(img.n()));
    check_image_batch(img, "save_image");
    if (!cv::imwrite(path, to_mat8(img)))
        throw IoError("save_image: cannot write '" + path + "'");
}

Tensor to_grayscale(const Tensor& img) {
    if (img.c() != 3)
        throw ValidationError("to_grayscale: expected 3 channels, got " +
                              std::to_string(img.c()));
    Tensor out(img.n(), 1, img.h(), img.w());
    size_t plane = static_cast<size_t>(img.h()) * img.w();
    for (int n = 0; n < img.n(); ++n) {
        const double* r = img.data() + img.offset(n, 0, 0, 0);
        const double* g = img.data() + img.offset(n, 1, 0, 0);
        const double* b = img.data() + img.offset(n, 2, 0, 0);
        double* o = out.data() + out.offset(n, 0, 0, 0);
        for (size_t i = 0; i < plane; ++i)
            o[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    }
    return out;
}

Tensor to_grayscale_backward(const Tensor& grad_gray) {
    Tensor out(grad_gray.n(), 3, grad_gray.h(), grad_gray.w());
    size_t plane = static_cast<size_t>(grad_gray.h()) * grad_gray.w();
    for (int n = 0; n < grad_gray.n(); ++n) {
        const double* g = grad_gray.data() + grad_gray.offset(n, 0, 0, 0);
        double* r = out.data() + out.offset(n, 0, 0, 0);
        double* gg = out.data() + out.offset(n, 1, 0, 0);
        double* b = out.data() + out.offset(n, 2, 0, 0);
        for (size_t i = 0; i < plane; ++i) {
            r[i] = 0.299 * g[i];
            gg[i] = 0.587 * g[i];
            b[i] = 0.114 * g[i];
        }
    }
    return out;
}

std::vector<unsigned char> encode_png(const Tensor& img) {
    if (img.n() != 1)
        throw ValidationError("encode_png: expected batch of 1");
    std::vector<unsigned char> buf;
    std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imencode(".png", to_mat8(img), buf, params))
        throw IoError("encode_png: encoder failure");
    return buf;
}

}  // namespace wespe
