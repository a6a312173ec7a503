#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "polypconnect/nn/layers.hpp"

namespace polyp {

// Flattens every parameter tensor, in declaration order, into one buffer.
std::vector<float> pack_params(const std::vector<nn::Param*>& params);

// Writes the buffer back into the parameters. Element count must match.
void unpack_params(const std::vector<nn::Param*>& params, const std::vector<float>& buffer);

// Checkpoint blob on disk: 8-byte magic, u64 little-endian count, raw floats.
void write_blob(const std::filesystem::path& path, const std::vector<float>& buffer);
std::vector<float> read_blob(const std::filesystem::path& path);

// Plain-text sidecar of tab-separated key/value lines.
using Metadata = std::map<std::string, std::string>;
void write_metadata(const std::filesystem::path& path, const Metadata& meta);
Metadata read_metadata(const std::filesystem::path& path);

// Fetch a required key, failing with a clear message when absent.
const std::string& meta_get(const Metadata& meta, const std::string& key,
                            const std::filesystem::path& origin);

} // namespace polyp
