// SPDX-License-Identifier: Apache-2.0
#include "wespe/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include <opencv2/imgcodecs.hpp>

#include "wespe/errors.hpp"
#include "wespe/image.hpp"

namespace fs = std::filesystem;

namespace wespe {

std::vector<std::string> list_images(const std::string& dir, bool recursive) {
    if (!fs::is_directory(dir))
        throw ValidationError("dataset: not a directory: " + dir);
    std::vector<std::string> out;
    auto consider = [&](const fs::directory_entry& e) {
        if (!e.is_regular_file()) return;
        // Cheap reject by decodability; non-image files are skipped.
        if (cv::haveImageReader(e.path().string()))
            out.push_back(e.path().string());
    };
    if (recursive) {
        for (const auto& e : fs::recursive_directory_iterator(dir)) consider(e);
    } else {
        for (const auto& e : fs::directory_iterator(dir)) consider(e);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> UnpairedDataset::scan(const std::string& dir,
                                               bool recursive, int patch_size) {
    auto files = list_images(dir, recursive);
    if (files.empty())
        throw ValidationError("dataset: no decodable images in " + dir);
    for (const auto& f : files) {
        cv::Mat m = cv::imread(f, cv::IMREAD_UNCHANGED);
        if (m.empty())
            throw IoError("dataset: cannot decode " + f);
        if (m.rows < patch_size || m.cols < patch_size)
            throw ValidationError("dataset: image smaller than patch size " +
                                  std::to_string(patch_size) + ": " + f);
    }
    return files;
}

UnpairedDataset::UnpairedDataset(const std::string& source_dir,
                                 const std::string& target_dir, int patch_size,
                                 uint64_t seed, bool recursive)
    : patch_size_(patch_size),
      src_rng_(seed, 0x5eed5 /*source stream*/),
      tgt_rng_(seed, 0x7a67e7 /*target stream*/) {
    if (patch_size < 1)
        throw ValidationError("dataset: patch_size must be >= 1");
    source_files_ = scan(source_dir, recursive, patch_size);
    target_files_ = scan(target_dir, recursive, patch_size);
}

Tensor UnpairedDataset::sample_one(Side& side) {
    size_t idx = side.rng->uniform_int(side.files->size());
    auto it = side.cache->find(idx);
    if (it == side.cache->end()) {
        if (side.cache->size() > 512) side.cache->clear();  // crude memory cap
        Tensor img = load_image((*side.files)[idx]);
        it = side.cache->emplace(idx, std::move(img)).first;
    }
    const Tensor& img = it->second;
    int ps = patch_size_;
    int top = static_cast<int>(side.rng->uniform_int(img.h() - ps + 1));
    int left = static_cast<int>(side.rng->uniform_int(img.w() - ps + 1));
    Tensor patch(1, 3, ps, ps);
    for (int c = 0; c < 3; ++c) {
        int src_c = img.c() == 3 ? c : 0;
        for (int y = 0; y < ps; ++y)
            for (int x = 0; x < ps; ++x)
                patch.at(0, c, y, x) = img.at(0, src_c, top + y, left + x);
    }
    return patch;
}

std::pair<Tensor, Tensor> UnpairedDataset::sample_patch_batch(int n) {
    if (n < 1) throw ValidationError("sample_patch_batch: n must be >= 1");
    Tensor xs(n, 3, patch_size_, patch_size_);
    Tensor ys(n, 3, patch_size_, patch_size_);
    Side src{&source_files_, &src_cache_, &src_rng_};
    Side tgt{&target_files_, &tgt_cache_, &tgt_rng_};
    size_t per = static_cast<size_t>(3) * patch_size_ * patch_size_;
    for (int i = 0; i < n; ++i) {
        Tensor sp = sample_one(src);
        Tensor tp = sample_one(tgt);
        std::copy(sp.data(), sp.data() + per, xs.data() + i * per);
        std::copy(tp.data(), tp.data() + per, ys.data() + i * per);
    }
    return {std::move(xs), std::move(ys)};
}

}  // namespace wespe
