#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polypconnect/dataset.hpp"
#include "polypconnect/errors.hpp"
#include "polypconnect/inpaint.hpp"
#include "polypconnect/maskgan.hpp"
#include "polypconnect/segnet.hpp"

namespace polyp {

// Everything one end-to-end run needs, parsed from a single JSON file with
// fail-closed key checking. Phase toggles default to off; a run executes
// only what is enabled and errors out if an enabled phase lacks its inputs.
struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string out = "runs";
    int resolution = 256;

    std::string labeled_root;    // images/ + masks/ polyp data
    std::string unlabeled_root;  // flat directory of clean-colon images
    int val_count = 0;

    bool phase_gen_masks = false;
    bool phase_pretrain = false;
    bool phase_finetune = false;
    bool phase_generate = false;
    bool phase_eval_inpaint = false;
    bool phase_train_seg = false;
    bool phase_eval_seg = false;

    double edge_sigma = 2.0;

    MaskGanConfig mask_gan;      // seed is assigned per run
    int mask_sample_count = 64;
    double mask_min_fill = 0.05;
    double mask_max_fill = 0.70;

    InpaintConfig inpaint;       // iterations = pretrain iteration count
    int finetune_iterations = 500;

    int generate_count = 16;

    SegConfig seg;
    std::vector<int> synthetic_counts = {0};
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Digest of every semantic field (the output root is excluded, so the same
// experiment under a different root keeps the same identity).
std::string pipeline_config_hash(const PipelineConfig& config);

// Checks phase/input consistency without touching the filesystem outputs:
// enabled phases must have their dataset roots and upstream phases.
void validate_pipeline(const PipelineConfig& config);

// Executes the enabled phases in order under <out>/run_<seed>_<hash8> and
// returns that run directory. Reruns with the same config and seed rewrite
// the same artifacts byte for byte.
std::filesystem::path run_pipeline(const PipelineConfig& config);

// Samples (clean image, polyp/mask source) pairs with replacement, splices
// the polyp's edges into the clean image's edge map, inpaints, and writes
// image plus ground-truth mask under out_dir. Returned records are tagged
// origin=synthetic.
DatasetManifest generate_batch(const InpaintCheckpoint& ckpt, const DatasetManifest& clean,
                               const DatasetManifest& polyp_source, int n, std::uint64_t seed,
                               const std::filesystem::path& out_dir, double edge_sigma = 2.0);

} // namespace polyp
