// SPDX-License-Identifier: Apache-2.0
#include "wespe/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "wespe/errors.hpp"

namespace wespe {

static const char kMagic[8] = {'W', 'S', 'P', 'E', 'A', 'R', 'C', '1'};

const Tensor& Archive::require(const std::string& name,
                               const std::array<int, 4>& shape) const {
    const Tensor* t = find(name);
    if (!t) throw IoError("archive: missing entry '" + name + "'");
    if (t->shape() != shape)
        throw IoError("archive: entry '" + name + "' has shape " +
                      t->shape_str() + ", expected (" +
                      std::to_string(shape[0]) + ", " + std::to_string(shape[1]) +
                      ", " + std::to_string(shape[2]) + ", " +
                      std::to_string(shape[3]) + ")");
    return *t;
}

template <class T>
static void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
static void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void save_archive(
    const std::string& path, const nlohmann::json& manifest,
    const std::vector<std::pair<std::string, const Tensor*>>& entries) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("archive: cannot open for write: " + tmp);
        os.write(kMagic, sizeof(kMagic));
        std::string m = manifest.dump();
        write_pod(os, static_cast<uint64_t>(m.size()));
        os.write(m.data(), static_cast<std::streamsize>(m.size()));
        write_pod(os, static_cast<uint32_t>(entries.size()));
        for (const auto& [name, t] : entries) {
            write_pod(os, static_cast<uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            for (int d : t->shape()) write_pod(os, static_cast<int32_t>(d));
            os.write(reinterpret_cast<const char*>(t->data()),
                     static_cast<std::streamsize>(t->size() * sizeof(double)));
        }
        if (!os) throw IoError("archive: write failure on " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("archive: cannot rename " + tmp + " -> " + path + ": " +
                      ec.message());
    }
}

Archive load_archive(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("archive: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("archive: bad magic in " + path);
    uint64_t mlen = 0;
    read_pod(is, mlen);
    std::string m(mlen, '\0');
    is.read(m.data(), static_cast<std::streamsize>(mlen));
    Archive a;
    try {
        a.manifest = nlohmann::json::parse(m);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("archive: corrupt manifest in " + path + ": " + e.what());
    }
    uint32_t n = 0;
    read_pod(is, n);
    for (uint32_t i = 0; i < n; ++i) {
        uint32_t nlen = 0;
        read_pod(is, nlen);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        int32_t s[4];
        for (auto& d : s) read_pod(is, d);
        if (!is || s[0] < 0 || s[1] < 0 || s[2] < 0 || s[3] < 0)
            throw IoError("archive: corrupt entry header in " + path);
        Tensor t(s[0], s[1], s[2], s[3]);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!is) throw IoError("archive: truncated entry '" + name + "' in " + path);
        a.entries.emplace_back(std::move(name), std::move(t));
    }
    return a;
}

}  // namespace wespe
