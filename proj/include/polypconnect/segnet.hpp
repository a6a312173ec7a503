#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polypconnect/dataset.hpp"
#include "polypconnect/errors.hpp"
#include "polypconnect/image.hpp"
#include "polypconnect/metrics.hpp"

namespace polyp {

struct SegConfig {
    int resolution = 256;       // square working resolution, divisible by 4
    int epochs = 20;
    int batch_size = 4;
    double learning_rate = 1e-3;
    double threshold = 0.5;     // probability cut for binarizing predictions
    std::uint64_t seed = 0;
};

void validate(const SegConfig& config);
std::string config_hash(const SegConfig& config);

struct SegCheckpoint {
    SegConfig config;
    std::vector<float> weights;
    int epoch = 0;
    std::string hash;
};

// Fresh network with seed-determined weights and no training.
SegCheckpoint init_segmenter(const SegConfig& config);

// Supervised training on image/mask pairs; every record needs a mask.
// Loss is binary cross entropy plus soft Dice, equally weighted.
SegCheckpoint train_unet(const DatasetManifest& train, const SegConfig& config);

// Probability map thresholded into a mask. The image must already be at the
// checkpoint's working resolution.
BinaryMask predict_mask(const SegCheckpoint& ckpt, const RasterImage& image,
                        double threshold);
BinaryMask predict_mask(const SegCheckpoint& ckpt, const RasterImage& image);

// Predict every val record and compare against its ground-truth mask.
SegMetrics evaluate_seg(const SegCheckpoint& ckpt, const DatasetManifest& val,
                        double threshold);
SegMetrics evaluate_seg(const SegCheckpoint& ckpt, const DatasetManifest& val);

// Real training records plus the first n_synth records of a seed-shuffled
// synthetic pool, everything tagged as training data.
DatasetManifest build_mixed_dataset(const DatasetManifest& real_train,
                                    const DatasetManifest& synth_pool, int n_synth,
                                    std::uint64_t seed);

void save_seg_checkpoint(const std::filesystem::path& path, const SegCheckpoint& ckpt);
SegCheckpoint load_seg_checkpoint(const std::filesystem::path& path);

} // namespace polyp
