// SPDX-License-Identifier: Apache-2.0
#include "wespe/losses.hpp"

#include <cmath>
#include <sstream>

#include "wespe/errors.hpp"
#include "wespe/image.hpp"

namespace wespe {

std::string LossBreakdown::log_line(long step) const {
    std::ostringstream os;
    os.precision(17);
    os << "step=" << step << " content=" << content << " color=" << color
       << " texture=" << texture << " tv=" << tv << " total=" << total
       << " d_color=" << d_color << " d_texture=" << d_texture;
    return os.str();
}

LossBreakdown LossBreakdown::parse_log_line(const std::string& line,
                                            long* step) {
    LossBreakdown b;
    std::istringstream is(line);
    std::string tok;
    bool seen_step = false;
    while (is >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ValidationError("loss log: bad token '" + tok + "'");
        std::string key = tok.substr(0, eq);
        std::string val = tok.substr(eq + 1);
        if (key == "step") {
            if (step) *step = std::stol(val);
            seen_step = true;
        } else if (key == "content") b.content = std::stod(val);
        else if (key == "color") b.color = std::stod(val);
        else if (key == "texture") b.texture = std::stod(val);
        else if (key == "tv") b.tv = std::stod(val);
        else if (key == "total") b.total = std::stod(val);
        else if (key == "d_color") b.d_color = std::stod(val);
        else if (key == "d_texture") b.d_texture = std::stod(val);
        else throw ValidationError("loss log: unknown field '" + key + "'");
    }
    if (!seen_step) throw ValidationError("loss log: missing step field");
    return b;
}

static void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* who) {
    if (!a.same_shape(b))
        throw ValidationError(std::string(who) + ": shape mismatch " +
                              a.shape_str() + " vs " + b.shape_str());
}

static double feature_mse(const Tensor& fa, const Tensor& fb, Tensor* grad_fb) {
    size_t per_image = fa.size() / fa.n();
    double norm = 1.0 / static_cast<double>(per_image);
    double loss = 0.0;
    if (grad_fb) *grad_fb = Tensor(fb.n(), fb.c(), fb.h(), fb.w());
    for (size_t i = 0; i < fa.size(); ++i) {
        double d = fb[i] - fa[i];
        loss += norm * d * d;
        if (grad_fb) (*grad_fb)[i] = 2.0 * norm * d;
    }
    return loss;
}

double content_loss(const Tensor& x, const Tensor& x_rec, FeatureExtractor& f,
                    const std::string& layer) {
    require_same_shape(x, x_rec, "content_loss");
    Tensor fa = f.forward(x, layer);
    Tensor fb = f.forward(x_rec, layer);
    return feature_mse(fa, fb, nullptr);
}

double content_loss_grad(const Tensor& x, const Tensor& x_rec,
                         FeatureExtractor& f, const std::string& layer,
                         Tensor& grad_x_rec) {
    require_same_shape(x, x_rec, "content_loss");
    Tensor fa = f.forward(x, layer);
    // x_rec must be the extractor's last forward so backward routes to it.
    Tensor fb = f.forward(x_rec, layer);
    Tensor gfb;
    double loss = feature_mse(fa, fb, &gfb);
    grad_x_rec = f.backward(gfb);
    return loss;
}

static double neg_log_sum(const Tensor& probs, Tensor* grad) {
    double loss = 0.0;
    if (grad) *grad = Tensor(probs.n(), 1, 1, 1);
    for (int i = 0; i < probs.n(); ++i) {
        double p = probs[i];
        bool clamped = p < kProbEps || p > 1.0 - kProbEps;
        double pc = std::min(std::max(p, kProbEps), 1.0 - kProbEps);
        loss += -std::log(pc);
        if (grad) (*grad)[i] = clamped ? 0.0 : -1.0 / pc;
    }
    return loss;
}

double color_loss(const Tensor& enhanced, Discriminator& dc,
                  const BlurKernel& kernel) {
    Tensor probs = dc.forward(blur(enhanced, kernel));
    return neg_log_sum(probs, nullptr);
}

double color_loss_grad(const Tensor& enhanced, Discriminator& dc,
                       const BlurKernel& kernel, Tensor& grad_enhanced) {
    Tensor probs = dc.forward(blur(enhanced, kernel));
    Tensor gp;
    double loss = neg_log_sum(probs, &gp);
    Tensor gb = dc.backward(gp, /*accumulate=*/false);
    grad_enhanced = blur_backward(gb, kernel);
    return loss;
}

double texture_loss(const Tensor& enhanced, Discriminator& dt) {
    Tensor probs = dt.forward(to_grayscale(enhanced));
    return neg_log_sum(probs, nullptr);
}

double texture_loss_grad(const Tensor& enhanced, Discriminator& dt,
                         Tensor& grad_enhanced) {
    Tensor probs = dt.forward(to_grayscale(enhanced));
    Tensor gp;
    double loss = neg_log_sum(probs, &gp);
    Tensor gg = dt.backward(gp, /*accumulate=*/false);
    grad_enhanced = to_grayscale_backward(gg);
    return loss;
}

double tv_loss(const Tensor& img, bool isotropic) {
    Tensor unused;
    return tv_loss_grad(img, unused, isotropic);
}

double tv_loss_grad(const Tensor& img, Tensor& grad, bool isotropic) {
    int H = img.h(), W = img.w(), C = img.c();
    if (H < 2 && W < 2)
        throw ValidationError("tv_loss: needs at least 2 pixels along one axis");
    grad = Tensor(img.n(), C, H, W);
    double norm = 1.0 / (static_cast<double>(C) * H * W);
    double loss = 0.0;
    for (int n = 0; n < img.n(); ++n) {
        if (isotropic) {
            // sum over positions of sqrt(dh^2 + dv^2); differences past the
            // border are zero
            double s = 0.0;
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x) {
                        double dh = x + 1 < W
                                        ? img.at(n, c, y, x + 1) - img.at(n, c, y, x)
                                        : 0.0;
                        double dv = y + 1 < H
                                        ? img.at(n, c, y + 1, x) - img.at(n, c, y, x)
                                        : 0.0;
                        double m = std::sqrt(dh * dh + dv * dv);
                        s += m;
                        if (m > 0.0) {
                            grad.at(n, c, y, x) -= norm * (dh + dv) / m;
                            if (x + 1 < W) grad.at(n, c, y, x + 1) += norm * dh / m;
                            if (y + 1 < H) grad.at(n, c, y + 1, x) += norm * dv / m;
                        }
                    }
            loss += norm * s;
            continue;
        }
        double nh2 = 0.0, nv2 = 0.0;
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    if (x + 1 < W) {
                        double d = img.at(n, c, y, x + 1) - img.at(n, c, y, x);
                        nh2 += d * d;
                    }
                    if (y + 1 < H) {
                        double d = img.at(n, c, y + 1, x) - img.at(n, c, y, x);
                        nv2 += d * d;
                    }
                }
        double nh = std::sqrt(nh2), nv = std::sqrt(nv2);
        loss += norm * (nh + nv);
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    if (x + 1 < W && nh > 0.0) {
                        double d = img.at(n, c, y, x + 1) - img.at(n, c, y, x);
                        grad.at(n, c, y, x + 1) += norm * d / nh;
                        grad.at(n, c, y, x) -= norm * d / nh;
                    }
                    if (y + 1 < H && nv > 0.0) {
                        double d = img.at(n, c, y + 1, x) - img.at(n, c, y, x);
                        grad.at(n, c, y + 1, x) += norm * d / nv;
                        grad.at(n, c, y, x) -= norm * d / nv;
                    }
                }
    }
    return loss;
}

double total_loss(double content, double color, double texture, double tv) {
    auto check = [](double v, const char* name) {
        if (!std::isfinite(v))
            throw NumericError(std::string("total_loss: non-finite ") + name +
                               " term: " + std::to_string(v));
    };
    check(content, "content");
    check(color, "color");
    check(texture, "texture");
    check(tv, "tv");
    return content + kAdversarialWeight * (color + texture) + kTvWeight * tv;
}

double discriminator_loss(const Tensor& real_probs, const Tensor& fake_probs) {
    Tensor gr, gf;
    return discriminator_loss_grad(real_probs, fake_probs, gr, gf);
}

double discriminator_loss_grad(const Tensor& real_probs,
                               const Tensor& fake_probs, Tensor& grad_real,
                               Tensor& grad_fake) {
    double loss = neg_log_sum(real_probs, &grad_real);
    grad_fake = Tensor(fake_probs.n(), 1, 1, 1);
    for (int i = 0; i < fake_probs.n(); ++i) {
        double q = 1.0 - fake_probs[i];
        bool clamped = q < kProbEps || q > 1.0 - kProbEps;
        double qc = std::min(std::max(q, kProbEps), 1.0 - kProbEps);
        loss += -std::log(qc);
        grad_fake[i] = clamped ? 0.0 : 1.0 / qc;
    }
    return loss;
}

}  // namespace wespe
