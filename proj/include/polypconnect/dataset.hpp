#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polypconnect/image.hpp"

namespace polyp {

enum class Origin { real, synthetic };
enum class Split { none, train, val };

struct DatasetRecord {
    std::string image_path;
    std::string mask_path; // empty = unlabeled
    Origin origin = Origin::real;
    Split split = Split::none;

    bool has_mask() const { return !mask_path.empty(); }
};

// Ordered list of records binding image, optional mask, origin and split.
// Immutable after creation in pipeline use; safe to share across threads.
struct DatasetManifest {
    std::vector<DatasetRecord> records;
    std::uint64_t seed = 0; // seed used to create the split, 0 if unsplit

    size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }

    size_t count_split(Split s) const;
    DatasetManifest subset(Split s) const;
};

enum class DatasetLayout { labeled, unlabeled };

// Scans root/images + root/masks (labeled) or root itself (unlabeled) for
// *.png / *.jpg / *.jpeg. Records are sorted lexicographically by image
// path; every image is verified to load and labeled masks must match the
// image dimensions.
DatasetManifest load_dataset(const std::filesystem::path& root, DatasetLayout layout);

// Tags exactly val_count records as val and the remainder as train, as a
// deterministic function of seed. Record order is preserved.
DatasetManifest split_dataset(const DatasetManifest& manifest, int val_count,
                              std::uint64_t seed);

// One record per line, tab-separated: image_path, mask_path or "-",
// origin, split. '#'-prefixed header lines carry the split seed.
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

// Convenience loaders at a fixed working resolution.
std::vector<BinaryMask> load_all_masks(const DatasetManifest& manifest, int resolution);

} // namespace polyp
