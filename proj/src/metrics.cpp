// SPDX-License-Identifier: Apache-2.0
#include "wespe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "wespe/checkpoint.hpp"
#include "wespe/dataset.hpp"
#include "wespe/errors.hpp"
#include "wespe/image.hpp"
#include "wespe/rng.hpp"

namespace fs = std::filesystem;

namespace wespe {

double psnr(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ValidationError("psnr: shape mismatch " + a.shape_str() + " vs " +
                              b.shape_str());
    double se = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = quantize8(a[i]) - quantize8(b[i]);
        se += d * d;
    }
    double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace {

constexpr int kSsimWindow = 11;

std::vector<double> ssim_window() {
    std::vector<double> w(kSsimWindow * kSsimWindow);
    double sigma = 1.5, sum = 0.0;
    for (int y = 0; y < kSsimWindow; ++y)
        for (int x = 0; x < kSsimWindow; ++x) {
            double dy = y - 5, dx = x - 5;
            double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            w[y * kSsimWindow + x] = v;
            sum += v;
        }
    for (double& v : w) v /= sum;
    return w;
}

double ssim_plane(const double* a, const double* b, int H, int W) {
    static const std::vector<double> win = ssim_window();
    const double C1 = (0.01 * 255) * (0.01 * 255);
    const double C2 = (0.03 * 255) * (0.03 * 255);
    double acc = 0.0;
    long count = 0;
    for (int y = 0; y + kSsimWindow <= H; ++y) {
        for (int x = 0; x + kSsimWindow <= W; ++x) {
            double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
            for (int wy = 0; wy < kSsimWindow; ++wy)
                for (int wx = 0; wx < kSsimWindow; ++wx) {
                    double wv = win[wy * kSsimWindow + wx];
                    double va = a[(y + wy) * W + (x + wx)] * 255.0;
                    double vb = b[(y + wy) * W + (x + wx)] * 255.0;
                    mu_a += wv * va;
                    mu_b += wv * vb;
                    aa += wv * va * va;
                    bb += wv * vb * vb;
                    ab += wv * va * vb;
                }
            double var_a = aa - mu_a * mu_a;
            double var_b = bb - mu_b * mu_b;
            double cov = ab - mu_a * mu_b;
            acc += ((2 * mu_a * mu_b + C1) * (2 * cov + C2)) /
                   ((mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2));
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ValidationError("ssim: shape mismatch " + a.shape_str() + " vs " +
                              b.shape_str());
    if (a.h() < kSsimWindow || a.w() < kSsimWindow)
        throw ValidationError("ssim: image smaller than the 11x11 window");
    Tensor ga = a.c() == 3 ? to_grayscale(a) : a;
    Tensor gb = b.c() == 3 ? to_grayscale(b) : b;
    double acc = 0.0;
    for (int n = 0; n < ga.n(); ++n)
        acc += ssim_plane(ga.data() + ga.offset(n, 0, 0, 0),
                          gb.data() + gb.offset(n, 0, 0, 0), ga.h(), ga.w());
    return acc / ga.n();
}

double entropy(const Tensor& img) {
    double hist[256] = {0};
    for (size_t i = 0; i < img.size(); ++i) hist[quantize8(img[i])] += 1.0;
    double total = static_cast<double>(img.size());
    double h = 0.0;
    for (double c : hist) {
        if (c == 0.0) continue;
        double p = c / total;
        h -= p * std::log2(p);
    }
    return h;
}

double bpp(const Tensor& img) {
    auto bytes = encode_png(img);
    return static_cast<double>(bytes.size()) * 8.0 /
           (static_cast<double>(img.h()) * img.w());
}

std::vector<FaveRecord> read_fave_records(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("fave records: cannot open " + path);
    std::vector<FaveRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, '\t')) f.push_back(tok);
        FaveRecord r;
        try {
            if (f.size() == 3) {
                r.path = f[0];
                r.views = std::stol(f[1]);
                r.faves = std::stol(f[2]);
            } else if (f.size() == 2) {
                r.path = f[0];
                r.label = std::stoi(f[1]);
                if (r.label != 0 && r.label != 1)
                    throw ValidationError("fave records: label must be 0 or 1");
            } else {
                throw ValidationError("fave records: expected 2 or 3 fields");
            }
        } catch (const std::invalid_argument&) {
            throw ValidationError("fave records: bad number on line " +
                                  std::to_string(lineno));
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<std::pair<std::string, int>> label_faves(
    const std::vector<FaveRecord>& records) {
    if (records.empty()) throw ValidationError("label_faves: no records");
    std::vector<double> scores(records.size());
    std::vector<bool> direct(records.size(), false);
    std::vector<double> median_pool;
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.label >= 0) {
            direct[i] = true;
            continue;
        }
        if (r.views <= 0)
            throw ValidationError("label_faves: record without views: " + r.path);
        if (r.faves < 0)
            throw ValidationError("label_faves: negative faves: " + r.path);
        scores[i] = static_cast<double>(r.faves) / static_cast<double>(r.views);
        median_pool.push_back(scores[i]);
    }
    double median = 0.0;
    if (!median_pool.empty()) {
        std::sort(median_pool.begin(), median_pool.end());
        size_t n = median_pool.size();
        median = n % 2 ? median_pool[n / 2]
                       : 0.5 * (median_pool[n / 2 - 1] + median_pool[n / 2]);
    }
    std::vector<std::pair<std::string, int>> out;
    out.reserve(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        int label = direct[i] ? records[i].label
                              : (scores[i] > median ? 1 : 0);  // ties go low
        out.emplace_back(records[i].path, label);
    }
    return out;
}

FfsScorer::FfsScorer(const std::string& features_path, int patch,
                     uint64_t seed)
    : patch_(patch) {
    FeatureExtractor fe(features_path);
    layers_ = fe.layers();
    auto frozen = fe.weights();
    int in_c = 3;
    int hw = patch;
    for (size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.pool_before) hw /= 2;
        nn::Conv2d conv("ffs." + l.name, in_c, l.out_c, 3, 1);
        conv.w.value = *frozen[2 * i];
        conv.b.value = *frozen[2 * i + 1];
        convs_.push_back(std::move(conv));
        relus_.emplace_back();
        pools_.emplace_back();
        in_c = l.out_c;
    }
    if (hw < 1)
        throw ValidationError("ffs: patch too small for the feature stack");
    head_ = nn::Dense("ffs.head", in_c, 2);
    Rng rng(seed, 0xff5);
    head_.init(rng);
}

Tensor FfsScorer::forward(const Tensor& patches) {
    if (patches.c() != 3)
        throw ValidationError("ffs: expected 3-channel patches");
    if (patches.h() != patch_ || patches.w() != patch_)
        throw ValidationError("ffs: expected " + std::to_string(patch_) + "x" +
                              std::to_string(patch_) + " patches, got " +
                              std::to_string(patches.h()) + "x" +
                              std::to_string(patches.w()));
    Tensor h = patches;
    for (size_t i = 0; i < convs_.size(); ++i) {
        if (layers_[i].pool_before) h = pools_[i].forward(h);
        h = relus_[i].forward(convs_[i].forward(h));
    }
    pre_gap_shape_ = h.shape();
    // Global average pool, then 2-way softmax; return the positive class.
    Tensor pooled(h.n(), h.c(), 1, 1);
    double inv = 1.0 / (static_cast<double>(h.h()) * h.w());
    for (int n = 0; n < h.n(); ++n)
        for (int c = 0; c < h.c(); ++c) {
            double s = 0.0;
            const double* p = h.data() + h.offset(n, c, 0, 0);
            for (int i = 0; i < h.h() * h.w(); ++i) s += p[i];
            pooled.at(n, c, 0, 0) = s * inv;
        }
    Tensor logits = head_.forward(pooled);
    softmax_ = Tensor(logits.n(), 2, 1, 1);
    Tensor out(logits.n(), 1, 1, 1);
    for (int n = 0; n < logits.n(); ++n) {
        double a = logits.at(n, 0, 0, 0), b = logits.at(n, 1, 0, 0);
        double m = std::max(a, b);
        double ea = std::exp(a - m), eb = std::exp(b - m);
        softmax_.at(n, 0, 0, 0) = ea / (ea + eb);
        softmax_.at(n, 1, 0, 0) = eb / (ea + eb);
        out[n] = softmax_.at(n, 1, 0, 0);
    }
    return out;
}

void FfsScorer::backward(const Tensor& grad_prob) {
    // d p1 / d logits = p1 p0 * (-1, +1)
    Tensor glogits(grad_prob.n(), 2, 1, 1);
    for (int n = 0; n < grad_prob.n(); ++n) {
        double p0 = softmax_.at(n, 0, 0, 0), p1 = softmax_.at(n, 1, 0, 0);
        glogits.at(n, 0, 0, 0) = -grad_prob[n] * p1 * p0;
        glogits.at(n, 1, 0, 0) = grad_prob[n] * p1 * p0;
    }
    Tensor gpooled = head_.backward(glogits, /*accumulate=*/true);
    auto& s = pre_gap_shape_;
    Tensor g(s[0], s[1], s[2], s[3]);
    double inv = 1.0 / (static_cast<double>(s[2]) * s[3]);
    for (int n = 0; n < s[0]; ++n)
        for (int c = 0; c < s[1]; ++c) {
            double v = gpooled.at(n, c, 0, 0) * inv;
            double* p = g.data() + g.offset(n, c, 0, 0);
            for (int i = 0; i < s[2] * s[3]; ++i) p[i] = v;
        }
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
        g = convs_[i].backward(relus_[i].backward(g), /*accumulate=*/true);
        if (layers_[i].pool_before) g = pools_[i].backward(g);
    }
}

std::vector<nn::Param*> FfsScorer::params() {
    std::vector<nn::Param*> ps;
    for (auto& c : convs_) {
        ps.push_back(&c.w);
        ps.push_back(&c.b);
    }
    ps.push_back(&head_.w);
    ps.push_back(&head_.b);
    return ps;
}

std::vector<std::pair<int, int>> FfsScorer::crop_origins(int h, int w) const {
    if (h < patch_ || w < patch_)
        throw ValidationError("ffs: image " + std::to_string(h) + "x" +
                              std::to_string(w) + " smaller than the " +
                              std::to_string(patch_) + " patch");
    int bottom = h - patch_, right = w - patch_;
    return {{0, 0}, {0, right}, {bottom, 0}, {bottom, right},
            {bottom / 2, right / 2}};
}

double FfsScorer::score(const Tensor& img) {
    if (img.n() != 1)
        throw ValidationError("ffs score: expected a batch of 1");
    if (img.c() != 3)
        throw ValidationError("ffs score: expected 3 channels");
    auto origins = crop_origins(img.h(), img.w());
    Tensor crops(static_cast<int>(origins.size()), 3, patch_, patch_);
    for (size_t k = 0; k < origins.size(); ++k) {
        auto [top, left] = origins[k];
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < patch_; ++y)
                for (int x = 0; x < patch_; ++x)
                    crops.at(static_cast<int>(k), c, y, x) =
                        img.at(0, c, top + y, left + x);
    }
    Tensor probs = forward(crops);
    double s = 0.0;
    for (int i = 0; i < probs.n(); ++i) s += probs[i];
    return s / probs.n();
}

void FfsScorer::save(const std::string& path) const {
    nlohmann::json manifest;
    manifest["kind"] = "wespe-ffs";
    manifest["patch"] = patch_;
    nlohmann::json jl = nlohmann::json::array();
    for (const auto& l : layers_)
        jl.push_back({{"name", l.name},
                      {"out_c", l.out_c},
                      {"pool_before", l.pool_before}});
    manifest["layers"] = jl;
    std::vector<std::pair<std::string, const Tensor*>> entries;
    auto& self = const_cast<FfsScorer&>(*this);
    for (auto* p : self.params()) entries.emplace_back(p->name, &p->value);
    save_archive(path, manifest, entries);
}

FfsScorer FfsScorer::load(const std::string& path) {
    Archive a = load_archive(path);
    if (a.manifest.value("kind", "") != "wespe-ffs")
        throw IoError("ffs: wrong archive kind in " + path);
    FfsScorer s;
    s.patch_ = a.manifest.at("patch");
    int in_c = 3;
    for (const auto& jl : a.manifest.at("layers")) {
        FeatureLayerSpec l;
        l.name = jl.at("name");
        l.out_c = jl.at("out_c");
        l.pool_before = jl.at("pool_before");
        nn::Conv2d conv("ffs." + l.name, in_c, l.out_c, 3, 1);
        conv.w.value = a.require("ffs." + l.name + ".w", {l.out_c, in_c, 3, 3});
        conv.b.value = a.require("ffs." + l.name + ".b", {l.out_c, 1, 1, 1});
        s.layers_.push_back(l);
        s.convs_.push_back(std::move(conv));
        s.relus_.emplace_back();
        s.pools_.emplace_back();
        in_c = l.out_c;
    }
    s.head_ = nn::Dense("ffs.head", in_c, 2);
    s.head_.w.value = a.require("ffs.head.w", {2, in_c, 1, 1});
    s.head_.b.value = a.require("ffs.head.b", {2, 1, 1, 1});
    return s;
}

namespace {

struct CachedImage {
    cv::Mat rgb8;  // CV_8UC3
};

CachedImage load_u8(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);  // BGR, 8-bit
    if (m.empty()) throw IoError("ffs: cannot decode " + path);
    CachedImage ci;
    cv::cvtColor(m, ci.rgb8, cv::COLOR_BGR2RGB);
    return ci;
}

Tensor crop_to_tensor(const CachedImage& ci, int top, int left, int side) {
    Tensor t(1, 3, side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            auto px = ci.rgb8.at<cv::Vec3b>(top + y, left + x);
            t.at(0, 0, y, x) = px[0] / 255.0;
            t.at(0, 1, y, x) = px[1] / 255.0;
            t.at(0, 2, y, x) = px[2] / 255.0;
        }
    return t;
}

}  // namespace

FfsScorer train_ffs(const std::vector<std::pair<std::string, int>>& labeled,
                    const FfsConfig& cfg, double* best_val_accuracy) {
    if (labeled.empty()) throw ValidationError("train_ffs: empty dataset");
    if (cfg.features_path.empty())
        throw ValidationError("train_ffs: features_path is required");

    std::vector<CachedImage> images;
    images.reserve(labeled.size());
    for (const auto& [path, label] : labeled) {
        if (label != 0 && label != 1)
            throw ValidationError("train_ffs: label must be 0 or 1: " + path);
        CachedImage ci = load_u8(path);
        if (ci.rgb8.rows < cfg.patch || ci.rgb8.cols < cfg.patch)
            throw ValidationError("train_ffs: image smaller than " +
                                  std::to_string(cfg.patch) + "px patch: " +
                                  path);
        images.push_back(std::move(ci));
    }

    Rng rng(cfg.seed, 0x44f5);
    std::vector<size_t> order(labeled.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(i)]);
    size_t n_val = std::max<size_t>(1, static_cast<size_t>(
                                           order.size() * cfg.val_fraction));
    if (n_val >= order.size())
        throw ValidationError("train_ffs: dataset too small for a validation split");
    std::vector<size_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<size_t> train_idx(order.begin() + n_val, order.end());

    FfsScorer scorer(cfg.features_path, cfg.patch, cfg.seed);
    nn::Adam opt(cfg.learning_rate);

    auto val_accuracy = [&]() {
        int correct = 0;
        for (size_t i : val_idx) {
            const auto& ci = images[i];
            int top = (ci.rgb8.rows - cfg.patch) / 2;
            int left = (ci.rgb8.cols - cfg.patch) / 2;
            Tensor p = scorer.forward(crop_to_tensor(ci, top, left, cfg.patch));
            int pred = p[0] > 0.5 ? 1 : 0;
            if (pred == labeled[i].second) ++correct;
        }
        return static_cast<double>(correct) / val_idx.size();
    };

    double best_acc = -1.0;
    int since_best = 0;
    std::vector<Tensor> best_params;
    auto snapshot = [&]() {
        best_params.clear();
        for (auto* p : scorer.params()) best_params.push_back(p->value);
    };

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        for (size_t i = train_idx.size(); i > 1; --i)
            std::swap(train_idx[i - 1], train_idx[rng.uniform_int(i)]);
        for (size_t start = 0; start < train_idx.size();
             start += cfg.batch_size) {
            size_t end = std::min(train_idx.size(),
                                  start + static_cast<size_t>(cfg.batch_size));
            int bs = static_cast<int>(end - start);
            Tensor batch(bs, 3, cfg.patch, cfg.patch);
            std::vector<int> labels(bs);
            for (int k = 0; k < bs; ++k) {
                size_t i = train_idx[start + k];
                const auto& ci = images[i];
                int top = static_cast<int>(
                    rng.uniform_int(ci.rgb8.rows - cfg.patch + 1));
                int left = static_cast<int>(
                    rng.uniform_int(ci.rgb8.cols - cfg.patch + 1));
                Tensor patch = crop_to_tensor(ci, top, left, cfg.patch);
                size_t per = patch.size();
                std::copy(patch.data(), patch.data() + per,
                          batch.data() + static_cast<size_t>(k) * per);
                labels[k] = labeled[i].second;
            }
            Tensor probs = scorer.forward(batch);
            Tensor gp(bs, 1, 1, 1);
            for (int k = 0; k < bs; ++k) {
                double p1 = std::min(std::max(probs[k], 1e-12), 1.0 - 1e-12);
                // cross-entropy: -log p_y, averaged over the batch
                gp[k] = (labels[k] == 1 ? -1.0 / p1 : 1.0 / (1.0 - p1)) / bs;
            }
            scorer.backward(gp);
            opt.step(scorer.params());
        }
        double acc = val_accuracy();
        if (acc > best_acc) {
            best_acc = acc;
            since_best = 0;
            snapshot();
        } else if (++since_best >= cfg.patience) {
            break;
        }
        if (best_acc == 1.0) break;
    }

    // Restore the best validation epoch.
    if (!best_params.empty()) {
        auto ps = scorer.params();
        for (size_t i = 0; i < ps.size(); ++i) ps[i]->value = best_params[i];
    }
    if (best_val_accuracy) *best_val_accuracy = best_acc;
    return scorer;
}

static double mean_of(const std::vector<QualityRow>& rows,
                      const std::function<std::optional<double>(const QualityRow&)>& get) {
    double s = 0.0;
    long n = 0;
    for (const auto& r : rows) {
        auto v = get(r);
        if (v) {
            s += *v;
            ++n;
        }
    }
    return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

double QualityReport::mean_psnr() const {
    return mean_of(rows, [](const QualityRow& r) { return r.psnr; });
}
double QualityReport::mean_ssim() const {
    return mean_of(rows, [](const QualityRow& r) { return r.ssim; });
}
double QualityReport::mean_entropy() const {
    return mean_of(rows, [](const QualityRow& r) {
        return std::optional<double>(r.entropy);
    });
}
double QualityReport::mean_bpp() const {
    return mean_of(rows, [](const QualityRow& r) {
        return std::optional<double>(r.bpp);
    });
}
double QualityReport::mean_ffs() const {
    return mean_of(rows, [](const QualityRow& r) { return r.ffs; });
}
double QualityReport::mean_external() const {
    return mean_of(rows, [](const QualityRow& r) { return r.external; });
}

static std::string num(double v, int prec = 4) {
    std::ostringstream os;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

std::string QualityReport::to_table() const {
    std::ostringstream os;
    os << "dataset: " << dataset << "  checkpoint: " << checkpoint_id
       << "  config: " << config_hash << "\n";
    os << std::left << std::setw(32) << "image";
    if (has_reference) os << std::right << std::setw(10) << "psnr"
                          << std::setw(10) << "ssim";
    os << std::right << std::setw(10) << "entropy" << std::setw(10) << "bpp";
    if (has_ffs) os << std::setw(10) << "ffs";
    if (has_external) os << std::setw(12) << "external";
    os << "\n";
    auto row_line = [&](const std::string& id, const QualityRow* r,
                        bool aggregate) {
        os << std::left << std::setw(32) << id << std::right;
        auto cell = [&](std::optional<double> v, int w) {
            os << std::setw(w) << (v ? num(*v) : std::string("-"));
        };
        if (has_reference) {
            cell(aggregate ? mean_psnr() : r->psnr, 10);
            cell(aggregate ? mean_ssim() : r->ssim, 10);
        }
        cell(aggregate ? mean_entropy() : r->entropy, 10);
        cell(aggregate ? mean_bpp() : r->bpp, 10);
        if (has_ffs) cell(aggregate ? mean_ffs() : r->ffs, 10);
        if (has_external) cell(aggregate ? mean_external() : r->external, 12);
        os << "\n";
    };
    for (const auto& r : rows) row_line(r.id, &r, false);
    row_line("MEAN", nullptr, true);
    return os.str();
}

std::string QualityReport::to_csv() const {
    std::ostringstream os;
    os << "image";
    if (has_reference) os << ",psnr,ssim";
    os << ",entropy,bpp";
    if (has_ffs) os << ",ffs";
    if (has_external) os << ",external";
    os << "\n";
    os.precision(12);
    auto cell = [&](std::optional<double> v) {
        os << ",";
        if (v) os << *v;
    };
    for (const auto& r : rows) {
        os << r.id;
        if (has_reference) {
            cell(r.psnr);
            cell(r.ssim);
        }
        cell(r.entropy);
        cell(r.bpp);
        if (has_ffs) cell(r.ffs);
        if (has_external) cell(r.external);
        os << "\n";
    }
    os << "MEAN";
    if (has_reference) {
        cell(mean_psnr());
        cell(mean_ssim());
    }
    cell(mean_entropy());
    cell(mean_bpp());
    if (has_ffs) cell(mean_ffs());
    if (has_external) cell(mean_external());
    os << "\n";
    return os.str();
}

static double run_external_scorer(const std::string& cmd,
                                  const std::string& path) {
    std::string full = cmd + " '" + path + "'";
    FILE* p = popen(full.c_str(), "r");
    if (!p) throw IoError("external scorer: cannot run: " + full);
    char buf[256];
    std::string out;
    while (fgets(buf, sizeof buf, p)) out += buf;
    int rc = pclose(p);
    if (rc != 0)
        throw IoError("external scorer: exit " + std::to_string(rc) + ": " + full);
    try {
        return std::stod(out);
    } catch (const std::exception&) {
        throw IoError("external scorer: non-numeric output: " + out);
    }
}

QualityReport evaluate(const std::string& enhanced_dir,
                       const EvaluateOptions& opts) {
    auto files = list_images(enhanced_dir, opts.recursive);
    if (files.empty())
        throw ValidationError("evaluate: no images in " + enhanced_dir);

    QualityReport rep;
    rep.dataset = opts.dataset_name.empty() ? enhanced_dir : opts.dataset_name;
    rep.checkpoint_id = opts.checkpoint_id;
    rep.config_hash = opts.config_hash;
    rep.has_reference = opts.reference_dir.has_value();
    rep.has_ffs = opts.scorer != nullptr;
    rep.has_external = opts.external_scorer_cmd.has_value();

    if (opts.reference_dir) {
        // filenames must pair 1:1
        auto refs = list_images(*opts.reference_dir, opts.recursive);
        std::vector<std::string> missing;
        for (const auto& f : files) {
            fs::path want =
                fs::path(*opts.reference_dir) / fs::path(f).filename();
            if (!fs::exists(want)) missing.push_back(fs::path(f).filename());
        }
        for (const auto& f : refs) {
            fs::path want = fs::path(enhanced_dir) / fs::path(f).filename();
            if (!fs::exists(want)) missing.push_back(fs::path(f).filename());
        }
        if (!missing.empty()) {
            std::string list;
            for (const auto& m : missing) list += " " + m;
            throw ValidationError("evaluate: unpaired reference filenames:" + list);
        }
    }

    for (const auto& f : files) {
        QualityRow row;
        row.id = fs::path(f).filename();
        Tensor img = load_image(f);
        row.entropy = entropy(img);
        row.bpp = bpp(img);
        if (opts.reference_dir) {
            Tensor ref = load_image(
                (fs::path(*opts.reference_dir) / fs::path(f).filename())
                    .string());
            row.psnr = psnr(img, ref);
            row.ssim = ssim(img, ref);
        }
        if (opts.scorer) {
            Tensor rgb = img.c() == 3 ? img : Tensor();
            if (img.c() == 1) {
                rgb = Tensor(1, 3, img.h(), img.w());
                for (int c = 0; c < 3; ++c)
                    for (int y = 0; y < img.h(); ++y)
                        for (int x = 0; x < img.w(); ++x)
                            rgb.at(0, c, y, x) = img.at(0, 0, y, x);
            }
            row.ffs = opts.scorer->score(rgb);
        }
        if (opts.external_scorer_cmd)
            row.external = run_external_scorer(*opts.external_scorer_cmd, f);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

}  // namespace wespe
