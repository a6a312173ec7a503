#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polypconnect/dataset.hpp"
#include "polypconnect/edge.hpp"
#include "polypconnect/image.hpp"

namespace polyp {

struct LossWeights {
    double l1 = 1.0;
    double adversarial = 0.1;
    double perceptual = 0.1;
    double style = 250.0;
    double feature_matching = 10.0;
};

struct InpaintConfig {
    int resolution = 256;
    int iterations = 1000;
    int batch_size = 2;
    double learning_rate = 1e-4;
    LossWeights loss_weights;
    int eval_every = 0;  // used by the pipeline's fine-tune evaluation loop
    std::uint64_t seed = 0;
    double edge_sigma = 2.0;  // smoothing scale for training-time edge maps
};

void validate(const InpaintConfig& config);
std::string config_hash(const InpaintConfig& config);

enum class InpaintPhase { pretrain, finetune };

struct InpaintCheckpoint {
    InpaintConfig config;
    std::vector<float> edge_stage_weights;     // edge generator + its critic
    std::vector<float> inpaint_stage_weights;  // RGB generator + its critic
    long long iteration = 0;
    InpaintPhase phase = InpaintPhase::pretrain;
    std::string hash;
};

struct InpaintEvalRow {
    long long iteration = 0;
    double ssim = 0.0;
    double psnr = 0.0;
    double fid = 0.0;
};

struct InpaintEvalReport {
    std::vector<InpaintEvalRow> rows;

    // Rows must arrive with strictly increasing iteration numbers.
    void append(const InpaintEvalRow& row);
};

// Freshly initialized model (iteration 0, phase pretrain).
InpaintCheckpoint init_inpaint_checkpoint(const InpaintConfig& config);

// Step 1: train on unlabeled images holed by random pool masks. Each step
// draws images, pairs each with a pooled mask, computes the full edge map,
// and trains the edge stage then the RGB stage.
InpaintCheckpoint pretrain(const DatasetManifest& unlabeled,
                           const std::vector<BinaryMask>& mask_pool,
                           const InpaintConfig& config);

// Step 2: same procedure, but the hole is always the record's own polyp
// mask. Iteration numbering continues from the incoming checkpoint.
InpaintCheckpoint finetune(const InpaintCheckpoint& ckpt, const DatasetManifest& polyp_data,
                           const InpaintConfig& config);

// Step 4: RGB-stage generation conditioned on (holed clean image, merged
// edges, mask); the edge-completion stage is bypassed because the merged
// edge map already carries the polyp contour. The result is quantized to
// 8 bits inside the mask and is a bit-exact copy of the input outside it.
RasterImage inpaint_polyp(const InpaintCheckpoint& ckpt, const RasterImage& clean_image,
                          const EdgeMap& merged_edges, const BinaryMask& mask);

// Full two-stage inference on a labeled image: complete the edges inside
// the hole, then fill RGB. Used by checkpoint evaluation.
RasterImage inpaint_two_stage(const InpaintCheckpoint& ckpt, const RasterImage& image,
                              const BinaryMask& mask);

// Mean SSIM / mean PSNR / FID of a generated set against its reference set.
InpaintEvalRow compare_image_sets(const std::vector<RasterImage>& generated,
                                  const std::vector<RasterImage>& reference,
                                  long long iteration);

// Inpaints every val record's masked region and compares against the
// originals. Needs at least two records (FID fits a Gaussian per set).
InpaintEvalRow evaluate_checkpoint(const InpaintCheckpoint& ckpt, const DatasetManifest& val);

void save_inpaint_checkpoint(const std::filesystem::path& path, const InpaintCheckpoint& ckpt);
InpaintCheckpoint load_inpaint_checkpoint(const std::filesystem::path& path);

// Report rows as JSON: [{"iteration":..,"ssim":..,"psnr":..,"fid":..}, ...]
void save_eval_report(const std::filesystem::path& path, const InpaintEvalReport& report);
InpaintEvalReport load_eval_report(const std::filesystem::path& path);

} // namespace polyp
