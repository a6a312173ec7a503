#include "polypconnect/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "polypconnect/edge.hpp"
#include "polypconnect/image_io.hpp"
#include "polypconnect/metrics.hpp"
#include "polypconnect/rng.hpp"

namespace polyp {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const json& obj, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed)
            if (it.key() == key) {
                known = true;
                break;
            }
        if (!known)
            fail(ErrorCategory::config, "unknown config key '" + prefix + it.key() + "'");
    }
}

const json* find(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

json section(const json& obj, const std::string& prefix, const char* key) {
    const json* v = find(obj, key);
    if (!v) return json::object();
    if (!v->is_object())
        fail(ErrorCategory::config, "config key '" + prefix + key + "' must be an object");
    return *v;
}

int get_int(const json& obj, const std::string& prefix, const char* key, int fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number_integer())
        fail(ErrorCategory::config, "config key '" + prefix + key + "' must be an integer");
    return v->get<int>();
}

std::uint64_t get_u64(const json& obj, const std::string& prefix, const char* key,
                      std::uint64_t fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                    v->get<long long>() < 0))
        fail(ErrorCategory::config,
             "config key '" + prefix + key + "' must be a non-negative integer");
    return v->get<std::uint64_t>();
}

double get_double(const json& obj, const std::string& prefix, const char* key,
                  double fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number())
        fail(ErrorCategory::config, "config key '" + prefix + key + "' must be a number");
    return v->get<double>();
}

bool get_bool(const json& obj, const std::string& prefix, const char* key, bool fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_boolean())
        fail(ErrorCategory::config, "config key '" + prefix + key + "' must be a boolean");
    return v->get<bool>();
}

std::string get_string(const json& obj, const std::string& prefix, const char* key,
                       const std::string& fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_string())
        fail(ErrorCategory::config, "config key '" + prefix + key + "' must be a string");
    return v->get<std::string>();
}

std::string zero_pad(long long value, int width) {
    std::ostringstream ss;
    ss << std::setw(width) << std::setfill('0') << value;
    return ss.str();
}

// Semantic fields only: the output root is intentionally left out.
json canonical_config(const PipelineConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["resolution"] = c.resolution;
    j["data"] = {{"labeled_root", c.labeled_root},
                 {"unlabeled_root", c.unlabeled_root},
                 {"val_count", c.val_count}};
    j["phases"] = {{"gen_masks", c.phase_gen_masks},   {"pretrain", c.phase_pretrain},
                   {"finetune", c.phase_finetune},     {"generate", c.phase_generate},
                   {"eval_inpaint", c.phase_eval_inpaint}, {"train_seg", c.phase_train_seg},
                   {"eval_seg", c.phase_eval_seg}};
    j["edges"] = {{"sigma", c.edge_sigma}};
    j["mask_gan"] = {{"start_resolution", c.mask_gan.start_resolution},
                     {"target_resolution", c.mask_gan.target_resolution},
                     {"iterations_per_stage", c.mask_gan.iterations_per_stage},
                     {"batch_size", c.mask_gan.batch_size},
                     {"learning_rate", c.mask_gan.learning_rate},
                     {"sample_count", c.mask_sample_count},
                     {"min_fill", c.mask_min_fill},
                     {"max_fill", c.mask_max_fill}};
    j["inpaint"] = {{"pretrain_iterations", c.inpaint.iterations},
                    {"finetune_iterations", c.finetune_iterations},
                    {"batch_size", c.inpaint.batch_size},
                    {"learning_rate", c.inpaint.learning_rate},
                    {"eval_every", c.inpaint.eval_every},
                    {"weights",
                     {{"l1", c.inpaint.loss_weights.l1},
                      {"adversarial", c.inpaint.loss_weights.adversarial},
                      {"perceptual", c.inpaint.loss_weights.perceptual},
                      {"style", c.inpaint.loss_weights.style},
                      {"feature_matching", c.inpaint.loss_weights.feature_matching}}}};
    j["generate"] = {{"count", c.generate_count}};
    j["seg"] = {{"epochs", c.seg.epochs},
                {"batch_size", c.seg.batch_size},
                {"learning_rate", c.seg.learning_rate},
                {"threshold", c.seg.threshold},
                {"synthetic_counts", c.synthetic_counts}};
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorCategory::io, "failed writing " + path.string());
}

void require_root(const std::string& root, const char* key, const char* phase) {
    if (root.empty())
        fail(ErrorCategory::config,
             std::string("config key 'data.") + key + "' is required by phase '" + phase + "'");
    if (!fs::is_directory(root))
        fail(ErrorCategory::config,
             std::string("config key 'data.") + key + "' names a nonexistent dataset root: " + root);
}

} // namespace

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot read config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCategory::config,
             "malformed config " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorCategory::config, "config root must be a JSON object");

    PipelineConfig c;
    check_keys(j, "",
               {"seed", "out", "resolution", "data", "phases", "edges", "mask_gan", "inpaint",
                "generate", "seg"});
    c.seed = get_u64(j, "", "seed", c.seed);
    c.out = get_string(j, "", "out", c.out);
    c.resolution = get_int(j, "", "resolution", c.resolution);

    const json data = section(j, "", "data");
    check_keys(data, "data.", {"labeled_root", "unlabeled_root", "val_count"});
    c.labeled_root = get_string(data, "data.", "labeled_root", "");
    c.unlabeled_root = get_string(data, "data.", "unlabeled_root", "");
    c.val_count = get_int(data, "data.", "val_count", c.val_count);

    const json phases = section(j, "", "phases");
    check_keys(phases, "phases.",
               {"gen_masks", "pretrain", "finetune", "generate", "eval_inpaint", "train_seg",
                "eval_seg"});
    c.phase_gen_masks = get_bool(phases, "phases.", "gen_masks", false);
    c.phase_pretrain = get_bool(phases, "phases.", "pretrain", false);
    c.phase_finetune = get_bool(phases, "phases.", "finetune", false);
    c.phase_generate = get_bool(phases, "phases.", "generate", false);
    c.phase_eval_inpaint = get_bool(phases, "phases.", "eval_inpaint", false);
    c.phase_train_seg = get_bool(phases, "phases.", "train_seg", false);
    c.phase_eval_seg = get_bool(phases, "phases.", "eval_seg", false);

    const json edges = section(j, "", "edges");
    check_keys(edges, "edges.", {"sigma"});
    c.edge_sigma = get_double(edges, "edges.", "sigma", c.edge_sigma);

    const json mg = section(j, "", "mask_gan");
    check_keys(mg, "mask_gan.",
               {"start_resolution", "target_resolution", "iterations_per_stage", "batch_size",
                "learning_rate", "sample_count", "min_fill", "max_fill"});
    c.mask_gan.start_resolution = get_int(mg, "mask_gan.", "start_resolution", c.mask_gan.start_resolution);
    c.mask_gan.target_resolution =
        get_int(mg, "mask_gan.", "target_resolution", c.mask_gan.target_resolution);
    c.mask_gan.iterations_per_stage =
        get_int(mg, "mask_gan.", "iterations_per_stage", c.mask_gan.iterations_per_stage);
    c.mask_gan.batch_size = get_int(mg, "mask_gan.", "batch_size", c.mask_gan.batch_size);
    c.mask_gan.learning_rate = get_double(mg, "mask_gan.", "learning_rate", c.mask_gan.learning_rate);
    c.mask_sample_count = get_int(mg, "mask_gan.", "sample_count", c.mask_sample_count);
    c.mask_min_fill = get_double(mg, "mask_gan.", "min_fill", c.mask_min_fill);
    c.mask_max_fill = get_double(mg, "mask_gan.", "max_fill", c.mask_max_fill);

    const json ip = section(j, "", "inpaint");
    check_keys(ip, "inpaint.",
               {"pretrain_iterations", "finetune_iterations", "batch_size", "learning_rate",
                "eval_every", "weights"});
    c.inpaint.iterations = get_int(ip, "inpaint.", "pretrain_iterations", 1000);
    c.finetune_iterations = get_int(ip, "inpaint.", "finetune_iterations", c.finetune_iterations);
    c.inpaint.batch_size = get_int(ip, "inpaint.", "batch_size", c.inpaint.batch_size);
    c.inpaint.learning_rate = get_double(ip, "inpaint.", "learning_rate", c.inpaint.learning_rate);
    c.inpaint.eval_every = get_int(ip, "inpaint.", "eval_every", c.inpaint.eval_every);
    const json weights = section(ip, "inpaint.", "weights");
    check_keys(weights, "inpaint.weights.",
               {"l1", "adversarial", "perceptual", "style", "feature_matching"});
    LossWeights& w = c.inpaint.loss_weights;
    w.l1 = get_double(weights, "inpaint.weights.", "l1", w.l1);
    w.adversarial = get_double(weights, "inpaint.weights.", "adversarial", w.adversarial);
    w.perceptual = get_double(weights, "inpaint.weights.", "perceptual", w.perceptual);
    w.style = get_double(weights, "inpaint.weights.", "style", w.style);
    w.feature_matching =
        get_double(weights, "inpaint.weights.", "feature_matching", w.feature_matching);

    const json gen = section(j, "", "generate");
    check_keys(gen, "generate.", {"count"});
    c.generate_count = get_int(gen, "generate.", "count", c.generate_count);

    const json seg = section(j, "", "seg");
    check_keys(seg, "seg.",
               {"epochs", "batch_size", "learning_rate", "threshold", "synthetic_counts"});
    c.seg.epochs = get_int(seg, "seg.", "epochs", c.seg.epochs);
    c.seg.batch_size = get_int(seg, "seg.", "batch_size", c.seg.batch_size);
    c.seg.learning_rate = get_double(seg, "seg.", "learning_rate", c.seg.learning_rate);
    c.seg.threshold = get_double(seg, "seg.", "threshold", c.seg.threshold);
    if (const json* counts = find(seg, "synthetic_counts")) {
        if (!counts->is_array())
            fail(ErrorCategory::config,
                 "config key 'seg.synthetic_counts' must be an array of integers");
        c.synthetic_counts.clear();
        for (const auto& v : *counts) {
            if (!v.is_number_integer())
                fail(ErrorCategory::config,
                     "config key 'seg.synthetic_counts' must be an array of integers");
            c.synthetic_counts.push_back(v.get<int>());
        }
        if (c.synthetic_counts.empty())
            fail(ErrorCategory::config, "config key 'seg.synthetic_counts' must be non-empty");
    }
    return c;
}

std::string pipeline_config_hash(const PipelineConfig& config) {
    return hex64(fnv1a64(canonical_config(config).dump()));
}

void validate_pipeline(const PipelineConfig& c) {
    if (c.out.empty()) fail(ErrorCategory::config, "config key 'out' must be non-empty");
    if (c.val_count < 0) fail(ErrorCategory::config, "config key 'data.val_count' must be >= 0");

    // per-module config invariants, checked up front for enabled phases
    if (c.phase_gen_masks) {
        MaskGanConfig mg = c.mask_gan;
        mg.seed = c.seed;
        validate(mg);
        if (c.mask_sample_count <= 0)
            fail(ErrorCategory::config, "config key 'mask_gan.sample_count' must be positive");
        if (!(c.mask_min_fill >= 0.0 && c.mask_min_fill < c.mask_max_fill && c.mask_max_fill <= 1.0))
            fail(ErrorCategory::config,
                 "config keys 'mask_gan.min_fill'/'mask_gan.max_fill' must satisfy 0 <= min < max <= 1");
    }
    if (c.phase_pretrain || c.phase_finetune || c.phase_generate || c.phase_eval_inpaint) {
        InpaintConfig ic = c.inpaint;
        ic.resolution = c.resolution;
        ic.edge_sigma = c.edge_sigma;
        ic.seed = c.seed;
        validate(ic);
        if (c.finetune_iterations < 0)
            fail(ErrorCategory::config,
                 "config key 'inpaint.finetune_iterations' must be >= 0");
    }
    if (c.phase_train_seg || c.phase_eval_seg) {
        SegConfig sc = c.seg;
        sc.resolution = c.resolution;
        sc.seed = c.seed;
        validate(sc);
        for (int n : c.synthetic_counts)
            if (n < 0)
                fail(ErrorCategory::config,
                     "config key 'seg.synthetic_counts' entries must be >= 0");
    }
    if (c.phase_generate && c.generate_count <= 0)
        fail(ErrorCategory::config, "config key 'generate.count' must be positive");

    // dataset roots required by the enabled phases
    const bool needs_labeled = c.phase_gen_masks || c.phase_finetune || c.phase_eval_inpaint ||
                               c.phase_generate || c.phase_train_seg || c.phase_eval_seg ||
                               (c.phase_pretrain && !c.phase_gen_masks);
    if (needs_labeled) {
        const char* phase = c.phase_gen_masks ? "gen_masks"
                            : c.phase_finetune ? "finetune"
                            : c.phase_pretrain ? "pretrain (mask pool)"
                            : c.phase_generate ? "generate"
                            : c.phase_eval_inpaint ? "eval_inpaint"
                            : c.phase_train_seg ? "train_seg"
                                                : "eval_seg";
        require_root(c.labeled_root, "labeled_root", phase);
    }
    if (c.phase_pretrain || c.phase_generate)
        require_root(c.unlabeled_root, "unlabeled_root",
                     c.phase_pretrain ? "pretrain" : "generate");

    if (c.phase_eval_inpaint && c.val_count < 2)
        fail(ErrorCategory::config,
             "phase 'eval_inpaint' needs 'data.val_count' >= 2 (FID fits a Gaussian per set)");
    if (c.phase_eval_seg && c.val_count < 1)
        fail(ErrorCategory::config, "phase 'eval_seg' needs 'data.val_count' >= 1");

    // upstream phases
    if (c.phase_finetune && !c.phase_pretrain)
        fail(ErrorCategory::dependency, "phase 'finetune' needs phase 'pretrain' enabled");
    if (c.phase_generate && !c.phase_finetune)
        fail(ErrorCategory::dependency, "phase 'generate' needs phase 'finetune' enabled");
    if (c.phase_eval_inpaint && !c.phase_finetune)
        fail(ErrorCategory::dependency, "phase 'eval_inpaint' needs phase 'finetune' enabled");
    if (c.phase_train_seg &&
        std::any_of(c.synthetic_counts.begin(), c.synthetic_counts.end(),
                    [](int n) { return n > 0; }) &&
        !c.phase_generate)
        fail(ErrorCategory::dependency,
             "phase 'train_seg' with synthetic records needs phase 'generate' enabled");
    if (c.phase_eval_seg && !c.phase_train_seg)
        fail(ErrorCategory::dependency, "phase 'eval_seg' needs phase 'train_seg' enabled");
}

DatasetManifest generate_batch(const InpaintCheckpoint& ckpt, const DatasetManifest& clean,
                               const DatasetManifest& polyp_source, int n, std::uint64_t seed,
                               const fs::path& out_dir, double edge_sigma) {
    if (n < 0) fail(ErrorCategory::invalid_argument, "generation count must be >= 0");
    if (clean.empty())
        fail(ErrorCategory::insufficient_data, "generation needs a non-empty clean-image set");
    if (polyp_source.empty())
        fail(ErrorCategory::insufficient_data, "generation needs a non-empty polyp source set");
    for (const auto& rec : polyp_source.records)
        if (!rec.has_mask())
            fail(ErrorCategory::missing_annotation,
                 "polyp source records need masks; missing for " + rec.image_path);

    fs::create_directories(out_dir);
    const int res = ckpt.config.resolution;
    const CannyParams canny{edge_sigma, 0.2, 0.5};

    DatasetManifest out;
    out.seed = seed;
    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, "gen-" + std::to_string(i)));
        const auto& clean_rec =
            clean.records[static_cast<size_t>(rng.uniform_int(static_cast<int>(clean.size())))];
        const auto& polyp_rec = polyp_source.records[static_cast<size_t>(
            rng.uniform_int(static_cast<int>(polyp_source.size())))];

        const RasterImage clean_img = load_image(clean_rec.image_path, res);
        const RasterImage polyp_img = load_image(polyp_rec.image_path, res);
        const BinaryMask mask = load_mask(polyp_rec.mask_path, res);

        const EdgeMap clean_edges = extract_edges(clean_img, canny);
        const EdgeMap polyp_edges = extract_polyp_edges(polyp_img, mask, canny);
        const EdgeMap merged = merge_edges(clean_edges, polyp_edges, mask);
        const RasterImage result = inpaint_polyp(ckpt, clean_img, merged, mask);

        // file names record which clean/polyp pair produced each sample
        const std::string stem = "gen_" + zero_pad(i, 5) + "_c" +
                                 fs::path(clean_rec.image_path).stem().string() + "_p" +
                                 fs::path(polyp_rec.image_path).stem().string();
        const fs::path image_path = out_dir / (stem + ".png");
        const fs::path mask_path = out_dir / (stem + "_mask.png");
        save_image(image_path, result);
        save_mask(mask_path, mask);

        DatasetRecord rec;
        rec.image_path = image_path.string();
        rec.mask_path = mask_path.string();
        rec.origin = Origin::synthetic;
        rec.split = Split::none;
        out.records.push_back(std::move(rec));
    }
    return out;
}

std::filesystem::path run_pipeline(const PipelineConfig& c) {
    validate_pipeline(c);

    const std::string hash = pipeline_config_hash(c);
    const fs::path run_dir =
        fs::path(c.out) / ("run_" + std::to_string(c.seed) + "_" + hash.substr(0, 8));
    fs::create_directories(run_dir);
    fs::create_directories(run_dir / "checkpoints");
    fs::create_directories(run_dir / "reports");
    write_text(run_dir / "config.json", canonical_config(c).dump(2) + "\n");

    // shared data loading
    const bool needs_labeled = c.phase_gen_masks || c.phase_finetune || c.phase_eval_inpaint ||
                               c.phase_generate || c.phase_train_seg || c.phase_eval_seg ||
                               (c.phase_pretrain && !c.phase_gen_masks);
    DatasetManifest real_train, real_val;
    if (needs_labeled) {
        const DatasetManifest all = load_dataset(c.labeled_root, DatasetLayout::labeled);
        const DatasetManifest split = split_dataset(all, c.val_count, c.seed);
        save_manifest(run_dir / "real.tsv", split);
        real_train = split.subset(Split::train);
        real_val = split.subset(Split::val);
    }
    DatasetManifest unlabeled;
    if (c.phase_pretrain || c.phase_generate) {
        unlabeled = load_dataset(c.unlabeled_root, DatasetLayout::unlabeled);
        save_manifest(run_dir / "clean.tsv", unlabeled);
    }

    // gen_masks: train the mask generator, then sample a filtered pool
    std::vector<BinaryMask> mask_pool;
    if (c.phase_gen_masks) {
        MaskGanConfig mg = c.mask_gan;
        mg.seed = derive_seed(c.seed, "gen-masks");
        const std::vector<BinaryMask> real_masks =
            load_all_masks(real_train, mg.target_resolution);
        const MaskGanCheckpoint ckpt = train_mask_generator(real_masks, mg);
        save_mask_checkpoint(run_dir / "checkpoints" / "maskgan.bin", ckpt);

        const fs::path mask_dir = run_dir / "masks";
        fs::create_directories(mask_dir);
        int round = 0;
        while (static_cast<int>(mask_pool.size()) < c.mask_sample_count) {
            if (round >= 50)
                fail(ErrorCategory::insufficient_data,
                     "mask generator produced too few masks passing the fill filter");
            const std::vector<BinaryMask> batch =
                sample_masks(ckpt, std::max(16, c.mask_sample_count),
                             derive_seed(c.seed, "gen-masks-sample-" + std::to_string(round)));
            const std::vector<BinaryMask> kept =
                filter_masks(batch, c.mask_min_fill, c.mask_max_fill);
            for (const auto& m : kept) {
                if (static_cast<int>(mask_pool.size()) >= c.mask_sample_count) break;
                mask_pool.push_back(m);
            }
            ++round;
        }
        for (size_t i = 0; i < mask_pool.size(); ++i)
            save_mask(mask_dir / ("mask_" + zero_pad(static_cast<long long>(i), 5) + ".png"),
                      mask_pool[i]);
    } else if (c.phase_pretrain) {
        mask_pool = load_all_masks(real_train, c.resolution);
    }

    // inpainting: pretrain, then fine-tune (optionally in evaluated chunks)
    InpaintConfig base = c.inpaint;
    base.resolution = c.resolution;
    base.edge_sigma = c.edge_sigma;

    InpaintCheckpoint inpaint_ckpt;
    if (c.phase_pretrain) {
        InpaintConfig pc = base;
        pc.seed = derive_seed(c.seed, "pretrain");
        inpaint_ckpt = pretrain(unlabeled, mask_pool, pc);
        save_inpaint_checkpoint(run_dir / "checkpoints" / "pretrain.bin", inpaint_ckpt);
    }
    InpaintEvalReport eval_report;
    if (c.phase_finetune) {
        const bool chunked = c.phase_eval_inpaint && base.eval_every > 0;
        int remaining = c.finetune_iterations;
        int chunk_index = 0;
        while (true) {
            const int step = chunked ? std::min(base.eval_every, remaining) : remaining;
            InpaintConfig fc = base;
            fc.iterations = step;
            fc.seed = derive_seed(c.seed, "finetune-" + std::to_string(chunk_index));
            inpaint_ckpt = finetune(inpaint_ckpt, real_train, fc);
            remaining -= step;
            if (chunked) eval_report.append(evaluate_checkpoint(inpaint_ckpt, real_val));
            ++chunk_index;
            if (remaining <= 0) break;
        }
        save_inpaint_checkpoint(run_dir / "checkpoints" / "finetune.bin", inpaint_ckpt);
    }
    if (c.phase_eval_inpaint) {
        if (eval_report.rows.empty())
            eval_report.append(evaluate_checkpoint(inpaint_ckpt, real_val));
        save_eval_report(run_dir / "reports" / "inpaint_eval.json", eval_report);
    }

    // synthetic polyp generation
    DatasetManifest synthetic;
    if (c.phase_generate) {
        synthetic = generate_batch(inpaint_ckpt, unlabeled, real_train, c.generate_count,
                                   derive_seed(c.seed, "generate"), run_dir / "generated",
                                   c.edge_sigma);
        save_manifest(run_dir / "synthetic.tsv", synthetic);
    }

    // segmentation on real/synthetic mixtures
    std::vector<SegCheckpoint> seg_ckpts;
    if (c.phase_train_seg) {
        for (int n_synth : c.synthetic_counts) {
            const DatasetManifest mixed = build_mixed_dataset(
                real_train, synthetic, n_synth, derive_seed(c.seed, "mix-" + std::to_string(n_synth)));
            save_manifest(run_dir / ("mixed_" + std::to_string(n_synth) + ".tsv"), mixed);

            SegConfig sc = c.seg;
            sc.resolution = c.resolution;
            sc.seed = derive_seed(c.seed, "train-seg-" + std::to_string(n_synth));
            SegCheckpoint ckpt = train_unet(mixed, sc);
            save_seg_checkpoint(
                run_dir / "checkpoints" / ("seg_" + std::to_string(n_synth) + ".bin"), ckpt);
            seg_ckpts.push_back(std::move(ckpt));
        }
    }
    if (c.phase_eval_seg) {
        json rows = json::array();
        for (size_t i = 0; i < seg_ckpts.size(); ++i) {
            const SegMetrics m = evaluate_seg(seg_ckpts[i], real_val, c.seg.threshold);
            rows.push_back({{"n_synth", c.synthetic_counts[i]},
                            {"train_records",
                             real_train.size() + static_cast<size_t>(c.synthetic_counts[i])},
                            {"val_records", real_val.size()},
                            {"image_iou", m.image_iou},
                            {"dataset_iou", m.dataset_iou},
                            {"dice", m.dice},
                            {"precision", m.precision},
                            {"recall", m.recall}});
        }
        write_text(run_dir / "reports" / "seg_metrics.json", rows.dump(2) + "\n");
    }
    return run_dir;
}

} // namespace polyp
