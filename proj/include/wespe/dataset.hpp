// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wespe/rng.hpp"
#include "wespe/tensor.hpp"

namespace wespe {

/// Two unpaired image collections plus a patch sampler. Source and target
/// draws come from independent RNG streams, so the source patch sequence for
/// a given seed never depends on the target collection (and vice versa) --
/// no pairing is assumed or constructed anywhere.
class UnpairedDataset {
public:
    UnpairedDataset(const std::string& source_dir, const std::string& target_dir,
                    int patch_size = 100, uint64_t seed = 0,
                    bool recursive = false);

    /// n independent patch crops from each domain, each (n, 3, ps, ps).
    /// Grayscale files are replicated to 3 channels. Deterministic for a
    /// fixed seed.
    std::pair<Tensor, Tensor> sample_patch_batch(int n);

    int patch_size() const { return patch_size_; }
    size_t source_count() const { return source_files_.size(); }
    size_t target_count() const { return target_files_.size(); }

    // RNG state round-trip for resumable training.
    Rng& source_rng() { return src_rng_; }
    Rng& target_rng() { return tgt_rng_; }

private:
    struct Side {
        std::vector<std::string>* files;
        std::unordered_map<size_t, Tensor>* cache;
        Rng* rng;
    };
    Tensor sample_one(Side& side);
    static std::vector<std::string> scan(const std::string& dir, bool recursive,
                                         int patch_size);

    std::vector<std::string> source_files_, target_files_;
    std::unordered_map<size_t, Tensor> src_cache_, tgt_cache_;
    int patch_size_;
    Rng src_rng_, tgt_rng_;
};

/// Lists every regular file in dir that decodes as an image, sorted by path.
std::vector<std::string> list_images(const std::string& dir,
                                     bool recursive = false);

}  // namespace wespe
