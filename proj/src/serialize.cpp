#include "polypconnect/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace polyp {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'B', 'L', 'O', 'B', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs assume a little-endian host");

} // namespace

std::vector<float> pack_params(const std::vector<nn::Param*>& params) {
    std::vector<float> out;
    size_t total = 0;
    for (const nn::Param* p : params) total += p->w.numel();
    out.reserve(total);
    for (const nn::Param* p : params)
        out.insert(out.end(), p->w.data.begin(), p->w.data.end());
    return out;
}

void unpack_params(const std::vector<nn::Param*>& params, const std::vector<float>& buffer) {
    size_t total = 0;
    for (const nn::Param* p : params) total += p->w.numel();
    if (total != buffer.size())
        fail(ErrorCategory::io,
             "checkpoint parameter count mismatch: expected " + std::to_string(total) +
                 ", blob holds " + std::to_string(buffer.size()));
    size_t offset = 0;
    for (nn::Param* p : params) {
        std::copy(buffer.begin() + static_cast<std::ptrdiff_t>(offset),
                  buffer.begin() + static_cast<std::ptrdiff_t>(offset + p->w.numel()),
                  p->w.data.begin());
        offset += p->w.numel();
    }
}

void write_blob(const std::filesystem::path& path, const std::vector<float>& buffer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write checkpoint blob: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t count = buffer.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    if (!out) fail(ErrorCategory::io, "failed writing checkpoint blob: " + path.string());
}

std::vector<float> read_blob(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::io, "cannot read checkpoint blob: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        fail(ErrorCategory::io, "not a checkpoint blob: " + path.string());
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    std::vector<float> buffer(count);
    in.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) fail(ErrorCategory::io, "truncated checkpoint blob: " + path.string());
    return buffer;
}

void write_metadata(const std::filesystem::path& path, const Metadata& meta) {
    std::ofstream out(path);
    if (!out) fail(ErrorCategory::io, "cannot write checkpoint metadata: " + path.string());
    for (const auto& [key, value] : meta) out << key << '\t' << value << '\n';
    if (!out) fail(ErrorCategory::io, "failed writing checkpoint metadata: " + path.string());
}

Metadata read_metadata(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot read checkpoint metadata: " + path.string());
    Metadata meta;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos)
            fail(ErrorCategory::io, "malformed metadata line in " + path.string() + ": " + line);
        meta[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return meta;
}

const std::string& meta_get(const Metadata& meta, const std::string& key,
                            const std::filesystem::path& origin) {
    auto it = meta.find(key);
    if (it == meta.end())
        fail(ErrorCategory::io, "metadata key '" + key + "' missing from " + origin.string());
    return it->second;
}

} // namespace polyp
