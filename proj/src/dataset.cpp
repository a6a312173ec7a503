#include "polypconnect/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "polypconnect/image_io.hpp"
#include "polypconnect/rng.hpp"

namespace polyp {

namespace fs = std::filesystem;

namespace {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> list_images(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && has_image_extension(entry.path()))
            out.push_back(entry.path());
    std::sort(out.begin(), out.end(),
              [](const fs::path& a, const fs::path& b) { return a.string() < b.string(); });
    return out;
}

const char* origin_name(Origin o) { return o == Origin::real ? "real" : "synthetic"; }

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "-";
    }
}

Origin parse_origin(const std::string& s, const fs::path& file) {
    if (s == "real") return Origin::real;
    if (s == "synthetic") return Origin::synthetic;
    fail(ErrorCategory::io, "bad origin '" + s + "' in manifest " + file.string());
}

Split parse_split(const std::string& s, const fs::path& file) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "-") return Split::none;
    fail(ErrorCategory::io, "bad split '" + s + "' in manifest " + file.string());
}

} // namespace

size_t DatasetManifest::count_split(Split s) const {
    size_t n = 0;
    for (const auto& r : records)
        if (r.split == s) ++n;
    return n;
}

DatasetManifest DatasetManifest::subset(Split s) const {
    DatasetManifest out;
    out.seed = seed;
    for (const auto& r : records)
        if (r.split == s) out.records.push_back(r);
    return out;
}

DatasetManifest load_dataset(const fs::path& root, DatasetLayout layout) {
    if (!fs::is_directory(root))
        fail(ErrorCategory::ingestion, "dataset root does not exist: " + root.string());

    DatasetManifest manifest;
    if (layout == DatasetLayout::unlabeled) {
        for (const auto& p : list_images(root))
            manifest.records.push_back({p.string(), "", Origin::real, Split::none});
    } else {
        fs::path images_dir = root / "images";
        fs::path masks_dir = root / "masks";
        if (!fs::is_directory(images_dir) || !fs::is_directory(masks_dir))
            fail(ErrorCategory::ingestion,
                 "labeled layout requires images/ and masks/ under " + root.string());

        std::map<std::string, fs::path> masks_by_stem;
        for (const auto& p : list_images(masks_dir))
            masks_by_stem[p.stem().string()] = p;

        for (const auto& p : list_images(images_dir)) {
            auto it = masks_by_stem.find(p.stem().string());
            if (it == masks_by_stem.end())
                fail(ErrorCategory::missing_annotation,
                     "no mask for image stem '" + p.stem().string() + "'");
            manifest.records.push_back({p.string(), it->second.string(), Origin::real, Split::none});
        }
    }

    // every image must load; annotated masks must match dimensions
    for (const auto& rec : manifest.records) {
        auto [iw, ih] = image_dimensions(rec.image_path);
        if (rec.has_mask()) {
            auto [mw, mh] = image_dimensions(rec.mask_path);
            if (mw != iw || mh != ih)
                fail(ErrorCategory::shape,
                     "mask dimensions do not match image for " + rec.image_path);
        }
    }
    return manifest;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, int val_count,
                              std::uint64_t seed) {
    if (val_count < 0 || static_cast<size_t>(val_count) >= manifest.size())
        fail(ErrorCategory::invalid_split,
             "val_count must be in [0, record count); got " + std::to_string(val_count) +
                 " of " + std::to_string(manifest.size()));
    for (const auto& r : manifest.records)
        if (r.split != Split::none)
            fail(ErrorCategory::invalid_split, "manifest already carries split tags");

    std::vector<size_t> idx(manifest.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(idx);

    DatasetManifest out = manifest;
    out.seed = seed;
    for (auto& r : out.records) r.split = Split::train;
    for (int i = 0; i < val_count; ++i) out.records[idx[static_cast<size_t>(i)]].split = Split::val;
    return out;
}

namespace {

// Paths under the manifest's own directory are stored relative so a run
// directory can be moved (or compared byte-for-byte against another run)
// without invalidating its manifests.
std::string portable_path(const std::string& p, const fs::path& base) {
    if (p.empty()) return p;
    const fs::path rel = fs::path(p).lexically_normal().lexically_relative(base);
    if (rel.empty() || rel.native().starts_with("..")) return p;
    return rel.generic_string();
}

} // namespace

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
    std::ofstream out(path);
    if (!out) fail(ErrorCategory::io, "cannot write manifest: " + path.string());
    const fs::path base = fs::absolute(path).parent_path().lexically_normal();
    out << "# polypconnect manifest\n";
    out << "# seed " << manifest.seed << "\n";
    for (const auto& r : manifest.records) {
        out << portable_path(r.image_path, base) << '\t'
            << (r.has_mask() ? portable_path(r.mask_path, base) : "-") << '\t'
            << origin_name(r.origin) << '\t' << split_name(r.split) << '\n';
    }
    if (!out) fail(ErrorCategory::io, "failed writing manifest: " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot read manifest: " + path.string());
    DatasetManifest manifest;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string key;
            hs >> key;
            if (key == "seed") hs >> manifest.seed;
            continue;
        }
        std::istringstream ls(line);
        std::string image, mask, origin, split;
        if (!std::getline(ls, image, '\t') || !std::getline(ls, mask, '\t') ||
            !std::getline(ls, origin, '\t') || !std::getline(ls, split, '\t'))
            fail(ErrorCategory::io, "malformed manifest line in " + path.string() + ": " + line);
        const fs::path base = fs::absolute(path).parent_path().lexically_normal();
        auto resolve = [&](const std::string& p) -> std::string {
            if (p.empty() || fs::path(p).is_absolute()) return p;
            return (base / p).lexically_normal().string();
        };
        DatasetRecord rec;
        rec.image_path = resolve(image);
        rec.mask_path = mask == "-" ? "" : resolve(mask);
        rec.origin = parse_origin(origin, path);
        rec.split = parse_split(split, path);
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

std::vector<BinaryMask> load_all_masks(const DatasetManifest& manifest, int resolution) {
    std::vector<BinaryMask> out;
    out.reserve(manifest.size());
    for (const auto& r : manifest.records) {
        if (!r.has_mask())
            fail(ErrorCategory::missing_annotation, "record lacks a mask: " + r.image_path);
        out.push_back(load_mask(r.mask_path, resolution));
    }
    return out;
}

} // namespace polyp
