#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polypconnect/image.hpp"

namespace polyp {

struct MaskGanConfig {
    int start_resolution = 8;       // power of 2
    int target_resolution = 32;     // power of 2, >= start
    int iterations_per_stage = 200;
    int batch_size = 4;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

void validate(const MaskGanConfig& config);
std::string config_hash(const MaskGanConfig& config);

struct MaskGanCheckpoint {
    MaskGanConfig config;
    std::vector<float> generator_weights;
    std::vector<float> discriminator_weights;
    int stage = 0;            // current resolution
    long long iteration = 0;  // total training iterations across stages
    std::string hash;         // config digest
};

// Freshly initialized (untrained) model at the target resolution.
MaskGanCheckpoint init_mask_generator(const MaskGanConfig& config);

// Progressive training: stages double the working resolution from start to
// target; each growth stage spends its first half fading the new layers in.
MaskGanCheckpoint train_mask_generator(const std::vector<BinaryMask>& masks,
                                       const MaskGanConfig& config);

// n masks at the checkpoint's stage resolution, binarized at 0.5.
// Pure function of (checkpoint, seed).
std::vector<BinaryMask> sample_masks(const MaskGanCheckpoint& ckpt, int n,
                                     std::uint64_t seed);

// Keeps exactly the masks with min_fill <= fill_ratio <= max_fill, in order.
std::vector<BinaryMask> filter_masks(const std::vector<BinaryMask>& masks,
                                     double min_fill = 0.05, double max_fill = 0.70);

// Binary blob plus a text metadata sidecar at path + ".meta".
void save_mask_checkpoint(const std::filesystem::path& path, const MaskGanCheckpoint& ckpt);
MaskGanCheckpoint load_mask_checkpoint(const std::filesystem::path& path);

} // namespace polyp
