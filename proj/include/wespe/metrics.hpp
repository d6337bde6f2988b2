// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wespe/models.hpp"
#include "wespe/tensor.hpp"

namespace wespe {

/// 10 log10(255^2 / MSE) on 8-bit-quantized values; +infinity when MSE = 0.
double psnr(const Tensor& a, const Tensor& b);

/// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), stabilizers
/// K1 = 0.01, K2 = 0.03 on the 255 dynamic range. 3-channel inputs are
/// converted to grayscale first. Batch inputs average per-image scores.
double ssim(const Tensor& a, const Tensor& b);

/// Shannon entropy in bits of the pooled 256-bin histogram of 8-bit codes,
/// all channels in one histogram. Always in [0, 8].
double entropy(const Tensor& img);

/// Compressed bits per pixel under lossless PNG at the harness's fixed
/// encoder settings (zlib level 6).
double bpp(const Tensor& img);

/// One user-supplied rating record: either view/fave counts or a direct
/// binary label.
struct FaveRecord {
    std::string path;
    long views = -1;
    long faves = -1;
    int label = -1;  // -1 means "derive from counts"
};

/// `path<TAB>views<TAB>faves` or `path<TAB>label`, one record per line.
std::vector<FaveRecord> read_fave_records(const std::string& path);

/// Median split on faves/views: strictly above the median is high quality
/// (1), everything else including ties is low quality (0). Even-sized sets
/// use the midpoint of the middle pair as the median.
std::vector<std::pair<std::string, int>> label_faves(
    const std::vector<FaveRecord>& records);

struct FfsConfig {
    std::string features_path;  // arrangement + initial conv weights
    double learning_rate = 5e-5;
    int batch_size = 25;
    int max_epochs = 30;
    int patience = 5;  // epochs without validation improvement
    double val_fraction = 0.2;
    int patch = 224;
    uint64_t seed = 0;
};

/// Binary patch classifier: the feature-archive convolution stack (trainable,
/// initialized from the archive), global average pooling, and a 2-way
/// softmax head. An image's score is the mean positive-class probability
/// over five deterministic crops (four corners + center), so paired
/// original/enhanced images of equal size reuse identical crop rectangles.
class FfsScorer {
public:
    FfsScorer() = default;
    /// Fresh scorer with convolutions initialized from a feature archive.
    FfsScorer(const std::string& features_path, int patch, uint64_t seed);

    /// Positive-class probabilities, (n, 1, 1, 1), for patch-sized input.
    Tensor forward(const Tensor& patches);
    /// Gradient step bookkeeping lives in train_ffs; backward accumulates
    /// into all trainable parameters given d(loss)/d(probability).
    void backward(const Tensor& grad_prob);
    std::vector<nn::Param*> params();

    /// Five-crop mean score in [0, 1]; image must be >= patch in both dims.
    double score(const Tensor& img);
    /// The five crop rectangles (top, left) for an HxW image.
    std::vector<std::pair<int, int>> crop_origins(int h, int w) const;

    int patch() const { return patch_; }
    void save(const std::string& path) const;
    static FfsScorer load(const std::string& path);

private:
    int patch_ = 224;
    std::vector<FeatureLayerSpec> layers_;
    std::vector<nn::Conv2d> convs_;
    std::vector<nn::ReLU> relus_;
    std::vector<nn::MaxPool2> pools_;
    nn::Dense head_;
    Tensor softmax_;  // (n, 2) cache from the last forward
    std::array<int, 4> pre_gap_shape_{0, 0, 0, 0};
};

/// Trains the patch classifier on (image path, label) records with one
/// random patch per image per epoch, early-stopping on validation accuracy.
/// Returns the scorer at its best validation epoch.
FfsScorer train_ffs(const std::vector<std::pair<std::string, int>>& labeled,
                    const FfsConfig& cfg,
                    double* best_val_accuracy = nullptr);

struct QualityRow {
    std::string id;
    std::optional<double> psnr, ssim, ffs, external;
    double entropy = 0.0, bpp = 0.0;
};

struct QualityReport {
    std::string dataset, checkpoint_id, config_hash;
    std::vector<QualityRow> rows;
    bool has_reference = false, has_ffs = false, has_external = false;

    double mean_psnr() const;
    double mean_ssim() const;
    double mean_entropy() const;
    double mean_bpp() const;
    double mean_ffs() const;
    double mean_external() const;

    std::string to_table() const;
    std::string to_csv() const;
};

struct EvaluateOptions {
    std::optional<std::string> reference_dir;
    FfsScorer* scorer = nullptr;
    std::optional<std::string> external_scorer_cmd;
    std::string dataset_name, checkpoint_id, config_hash;
    bool recursive = false;
};

/// Per-image metrics plus dataset means for every image in enhanced_dir.
/// With a reference directory, filenames must pair 1:1.
QualityReport evaluate(const std::string& enhanced_dir,
                       const EvaluateOptions& opts = {});

}  // namespace wespe
