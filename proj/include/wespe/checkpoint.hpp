// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wespe/tensor.hpp"

namespace wespe {

/// Single-file tensor archive: a JSON manifest followed by named raw little-
/// endian f64 tensor entries with explicit shapes. Used for model
/// checkpoints, optimizer state, and pretrained feature weights.
struct Archive {
    nlohmann::json manifest;
    std::vector<std::pair<std::string, Tensor>> entries;

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : entries)
            if (n == name) return &t;
        return nullptr;
    }
    /// Like find, but a missing or shape-mismatched entry is an error.
    const Tensor& require(const std::string& name,
                          const std::array<int, 4>& shape) const;
};

/// Writes atomically (temp file + rename): a failed save never clobbers an
/// existing archive.
void save_archive(const std::string& path, const nlohmann::json& manifest,
                  const std::vector<std::pair<std::string, const Tensor*>>& entries);

Archive load_archive(const std::string& path);

}  // namespace wespe
