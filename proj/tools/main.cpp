#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "polypconnect/dataset.hpp"
#include "polypconnect/edge.hpp"
#include "polypconnect/errors.hpp"
#include "polypconnect/image_io.hpp"
#include "polypconnect/inpaint.hpp"
#include "polypconnect/maskgan.hpp"
#include "polypconnect/metrics.hpp"
#include "polypconnect/pipeline.hpp"
#include "polypconnect/rng.hpp"
#include "polypconnect/segnet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polyp;

namespace {

int exit_code(ErrorCategory cat) {
    switch (cat) {
        case ErrorCategory::config: return 2;
        case ErrorCategory::ingestion: return 3;
        case ErrorCategory::missing_annotation: return 4;
        case ErrorCategory::invalid_split: return 5;
        case ErrorCategory::invalid_argument: return 6;
        case ErrorCategory::shape: return 7;
        case ErrorCategory::insufficient_data: return 8;
        case ErrorCategory::training_diverged: return 9;
        case ErrorCategory::dependency: return 10;
        case ErrorCategory::io: return 11;
        case ErrorCategory::numeric: return 12;
    }
    return 1;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot read config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCategory::config, "malformed config " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorCategory::config, "config root must be a JSON object");
    return j;
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed)
            if (it.key() == key) {
                known = true;
                break;
            }
        if (!known) fail(ErrorCategory::config, "unknown config key '" + it.key() + "'");
    }
}

template <typename T>
void read_key(const json& obj, const char* key, T& target) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        target = it->get<T>();
    } catch (const json::exception&) {
        fail(ErrorCategory::config, std::string("config key '") + key + "' has the wrong type");
    }
}

// {resolution, iterations, batch_size, learning_rate, eval_every, edge_sigma,
//  seed, weights{...}} with every key optional
InpaintConfig read_inpaint_config(const fs::path& path) {
    InpaintConfig cfg;
    if (path.empty()) return cfg;
    const json j = read_json_file(path);
    check_keys(j, {"resolution", "iterations", "batch_size", "learning_rate", "eval_every",
                   "edge_sigma", "seed", "weights"});
    read_key(j, "resolution", cfg.resolution);
    read_key(j, "iterations", cfg.iterations);
    read_key(j, "batch_size", cfg.batch_size);
    read_key(j, "learning_rate", cfg.learning_rate);
    read_key(j, "eval_every", cfg.eval_every);
    read_key(j, "edge_sigma", cfg.edge_sigma);
    read_key(j, "seed", cfg.seed);
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        if (!w.is_object()) fail(ErrorCategory::config, "config key 'weights' must be an object");
        check_keys(w, {"l1", "adversarial", "perceptual", "style", "feature_matching"});
        read_key(w, "l1", cfg.loss_weights.l1);
        read_key(w, "adversarial", cfg.loss_weights.adversarial);
        read_key(w, "perceptual", cfg.loss_weights.perceptual);
        read_key(w, "style", cfg.loss_weights.style);
        read_key(w, "feature_matching", cfg.loss_weights.feature_matching);
    }
    return cfg;
}

SegConfig read_seg_config(const fs::path& path) {
    SegConfig cfg;
    if (path.empty()) return cfg;
    const json j = read_json_file(path);
    check_keys(j, {"resolution", "epochs", "batch_size", "learning_rate", "threshold", "seed"});
    read_key(j, "resolution", cfg.resolution);
    read_key(j, "epochs", cfg.epochs);
    read_key(j, "batch_size", cfg.batch_size);
    read_key(j, "learning_rate", cfg.learning_rate);
    read_key(j, "threshold", cfg.threshold);
    read_key(j, "seed", cfg.seed);
    return cfg;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) fail(ErrorCategory::io, "failed writing " + path.string());
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

// CSV with a header row: image_id, confidence, truth (real|generated)
std::vector<ReaderResponse> read_responses(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot read responses file: " + path.string());
    std::string line;
    if (!std::getline(in, line))
        fail(ErrorCategory::invalid_argument, "responses file is empty: " + path.string());

    auto split = [](const std::string& text) {
        std::vector<std::string> cells;
        std::stringstream ss(text);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
        return cells;
    };
    const std::vector<std::string> header = split(line);
    if (header.size() != 3 || header[0] != "image_id" || header[1] != "confidence" ||
        header[2] != "truth")
        fail(ErrorCategory::invalid_argument,
             "responses file must start with the header 'image_id,confidence,truth'");

    std::vector<ReaderResponse> responses;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != 3)
            fail(ErrorCategory::invalid_argument,
                 "responses line " + std::to_string(line_no) + " needs 3 columns");
        ReaderResponse r;
        r.image_id = cells[0];
        try {
            r.confidence = std::stoi(cells[1]);
        } catch (const std::exception&) {
            fail(ErrorCategory::invalid_argument,
                 "responses line " + std::to_string(line_no) + ": bad confidence '" + cells[1] +
                     "'");
        }
        if (cells[2] == "generated")
            r.generated = true;
        else if (cells[2] == "real")
            r.generated = false;
        else
            fail(ErrorCategory::invalid_argument,
                 "responses line " + std::to_string(line_no) + ": truth must be 'real' or " +
                     "'generated', got '" + cells[2] + "'");
        responses.push_back(std::move(r));
    }
    return responses;
}

struct Args {
    std::string config, out, ckpt, images, masks, data, val, clean, polyps, in_path, image,
        edges, mask, responses, manifest;
    std::uint64_t seed = 0;
    int count = 0;
    int threshold = 6;
    double seg_threshold = -1.0;
    double sigma = 2.0;
    double min_fill = 0.05, max_fill = 0.70;
    bool seed_given = false, out_given = false;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic polyp generation and segmentation pipeline"};
    app.require_subcommand(1);
    Args a;

    auto* gen_masks = app.add_subcommand("gen-masks", "Sample filtered masks from a checkpoint");
    gen_masks->add_option("--ckpt", a.ckpt, "mask generator checkpoint")->required();
    gen_masks->add_option("--count", a.count, "number of masks to write")->required();
    gen_masks->add_option("--seed", a.seed, "sampling seed");
    gen_masks->add_option("--out", a.out, "output directory")->required();
    gen_masks->add_option("--min-fill", a.min_fill, "minimum fill ratio kept");
    gen_masks->add_option("--max-fill", a.max_fill, "maximum fill ratio kept");

    auto* pretrain_cmd = app.add_subcommand("pretrain", "Pretrain inpainting on clean images");
    pretrain_cmd->add_option("--images", a.images, "directory of clean images")->required();
    pretrain_cmd->add_option("--masks", a.masks, "directory of mask PNGs")->required();
    pretrain_cmd->add_option("--config", a.config, "inpainting config JSON");
    pretrain_cmd->add_option("--out", a.out, "checkpoint path")->required();
    auto* pre_seed = pretrain_cmd->add_option("--seed", a.seed, "training seed");

    auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune inpainting on polyp data");
    finetune_cmd->add_option("--ckpt", a.ckpt, "pretrained checkpoint")->required();
    finetune_cmd->add_option("--data", a.data, "labeled manifest (TSV)")->required();
    finetune_cmd->add_option("--config", a.config, "inpainting config JSON");
    finetune_cmd->add_option("--out", a.out, "checkpoint path")->required();
    auto* fin_seed = finetune_cmd->add_option("--seed", a.seed, "training seed");

    auto* extract_cmd = app.add_subcommand("extract-edges", "Canny edge map of an image");
    extract_cmd->add_option("--in", a.in_path, "input image")->required();
    extract_cmd->add_option("--out", a.out, "output edge PNG")->required();
    extract_cmd->add_option("--sigma", a.sigma, "Gaussian pre-smoothing sigma");

    auto* inpaint_cmd = app.add_subcommand("inpaint", "Inpaint one masked region");
    inpaint_cmd->add_option("--ckpt", a.ckpt, "inpainting checkpoint")->required();
    inpaint_cmd->add_option("--image", a.image, "clean input image")->required();
    inpaint_cmd->add_option("--edges", a.edges, "merged edge map PNG")->required();
    inpaint_cmd->add_option("--mask", a.mask, "region mask PNG")->required();
    inpaint_cmd->add_option("--out", a.out, "output image path")->required();

    auto* batch_cmd = app.add_subcommand("generate-batch", "Generate synthetic polyp images");
    batch_cmd->add_option("--ckpt", a.ckpt, "inpainting checkpoint")->required();
    batch_cmd->add_option("--clean", a.clean, "clean-image manifest (TSV)")->required();
    batch_cmd->add_option("--polyps", a.polyps, "labeled polyp manifest (TSV)")->required();
    batch_cmd->add_option("--count", a.count, "number of images to generate")->required();
    batch_cmd->add_option("--seed", a.seed, "pairing seed");
    batch_cmd->add_option("--out", a.out, "output directory")->required();
    batch_cmd->add_option("--manifest", a.manifest, "manifest path (default OUT/synthetic.tsv)");
    batch_cmd->add_option("--sigma", a.sigma, "edge extraction sigma");

    auto* train_seg_cmd = app.add_subcommand("train-seg", "Train the segmentation model");
    train_seg_cmd->add_option("--data", a.data, "labeled manifest (TSV)")->required();
    train_seg_cmd->add_option("--config", a.config, "segmentation config JSON");
    train_seg_cmd->add_option("--out", a.out, "checkpoint path")->required();
    auto* seg_seed = train_seg_cmd->add_option("--seed", a.seed, "training seed");

    auto* eval_seg_cmd = app.add_subcommand("eval-seg", "Evaluate segmentation on a val set");
    eval_seg_cmd->add_option("--ckpt", a.ckpt, "segmentation checkpoint")->required();
    eval_seg_cmd->add_option("--val", a.val, "labeled manifest (TSV)")->required();
    eval_seg_cmd->add_option("--out", a.out, "metrics JSON path")->required();
    eval_seg_cmd->add_option("--threshold", a.seg_threshold,
                             "binarization threshold (default: checkpoint's)");

    auto* eval_inp_cmd = app.add_subcommand("eval-inpaint", "Evaluate inpainting on a val set");
    eval_inp_cmd->add_option("--ckpt", a.ckpt, "inpainting checkpoint")->required();
    eval_inp_cmd->add_option("--val", a.val, "labeled manifest (TSV)")->required();
    eval_inp_cmd->add_option("--out", a.out, "report JSON path")->required();

    auto* survey_cmd = app.add_subcommand("score-survey", "Score one reader's survey responses");
    survey_cmd->add_option("--responses", a.responses, "responses CSV")->required();
    survey_cmd->add_option("--out", a.out, "score JSON path")->required();
    survey_cmd->add_option("--threshold", a.threshold, "confidence threshold for 'generated'");

    auto* run_cmd = app.add_subcommand("run", "Run the end-to-end pipeline from a config file");
    run_cmd->add_option("--config", a.config, "pipeline config JSON")->required();
    auto* run_seed = run_cmd->add_option("--seed", a.seed, "override the config seed");
    auto* run_out = run_cmd->add_option("--out", a.out, "override the output root");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_masks->parsed()) {
            const MaskGanCheckpoint ckpt = load_mask_checkpoint(a.ckpt);
            if (a.count <= 0)
                fail(ErrorCategory::invalid_argument, "--count must be positive");
            fs::create_directories(a.out);
            std::vector<BinaryMask> kept;
            int round = 0;
            while (static_cast<int>(kept.size()) < a.count) {
                if (round >= 50)
                    fail(ErrorCategory::insufficient_data,
                         "mask generator produced too few masks passing the fill filter");
                const auto batch = sample_masks(ckpt, std::max(16, a.count),
                                                derive_seed(a.seed, "cli-sample-" + std::to_string(round)));
                for (const auto& m : filter_masks(batch, a.min_fill, a.max_fill)) {
                    if (static_cast<int>(kept.size()) >= a.count) break;
                    kept.push_back(m);
                }
                ++round;
            }
            for (size_t i = 0; i < kept.size(); ++i) {
                std::ostringstream name;
                name << "mask_" << std::setw(5) << std::setfill('0') << i << ".png";
                save_mask(fs::path(a.out) / name.str(), kept[i]);
            }
            std::cout << "wrote " << kept.size() << " masks to " << a.out << "\n";
        } else if (pretrain_cmd->parsed()) {
            InpaintConfig cfg = read_inpaint_config(a.config);
            if (!pre_seed->empty()) cfg.seed = a.seed;
            const DatasetManifest images = load_dataset(a.images, DatasetLayout::unlabeled);
            std::vector<BinaryMask> pool;
            const DatasetManifest mask_files = load_dataset(a.masks, DatasetLayout::unlabeled);
            for (const auto& rec : mask_files.records)
                pool.push_back(load_mask(rec.image_path, cfg.resolution));
            const InpaintCheckpoint ckpt = pretrain(images, pool, cfg);
            save_inpaint_checkpoint(a.out, ckpt);
            std::cout << "pretrained " << ckpt.iteration << " iterations -> " << a.out << "\n";
        } else if (finetune_cmd->parsed()) {
            InpaintConfig cfg = read_inpaint_config(a.config);
            if (!fin_seed->empty()) cfg.seed = a.seed;
            const InpaintCheckpoint base = load_inpaint_checkpoint(a.ckpt);
            cfg.resolution = base.config.resolution;
            const InpaintCheckpoint ckpt = finetune(base, load_manifest(a.data), cfg);
            save_inpaint_checkpoint(a.out, ckpt);
            std::cout << "fine-tuned to iteration " << ckpt.iteration << " -> " << a.out << "\n";
        } else if (extract_cmd->parsed()) {
            const RasterImage image = load_image(a.in_path);
            save_edges(a.out, extract_edges(image, CannyParams{a.sigma, 0.2, 0.5}));
            std::cout << "wrote edges to " << a.out << "\n";
        } else if (inpaint_cmd->parsed()) {
            const InpaintCheckpoint ckpt = load_inpaint_checkpoint(a.ckpt);
            const int r = ckpt.config.resolution;
            const RasterImage result = inpaint_polyp(ckpt, load_image(a.image, r),
                                                     load_edges(a.edges, r), load_mask(a.mask, r));
            save_image(a.out, result);
            std::cout << "wrote " << a.out << "\n";
        } else if (batch_cmd->parsed()) {
            const InpaintCheckpoint ckpt = load_inpaint_checkpoint(a.ckpt);
            const DatasetManifest result =
                generate_batch(ckpt, load_manifest(a.clean), load_manifest(a.polyps), a.count,
                               a.seed, a.out, a.sigma);
            const fs::path manifest =
                a.manifest.empty() ? fs::path(a.out) / "synthetic.tsv" : fs::path(a.manifest);
            save_manifest(manifest, result);
            std::cout << "generated " << result.size() << " images; manifest " << manifest
                      << "\n";
        } else if (train_seg_cmd->parsed()) {
            SegConfig cfg = read_seg_config(a.config);
            if (!seg_seed->empty()) cfg.seed = a.seed;
            const SegCheckpoint ckpt = train_unet(load_manifest(a.data), cfg);
            save_seg_checkpoint(a.out, ckpt);
            std::cout << "trained " << ckpt.epoch << " epochs -> " << a.out << "\n";
        } else if (eval_seg_cmd->parsed()) {
            const SegCheckpoint ckpt = load_seg_checkpoint(a.ckpt);
            const DatasetManifest val = load_manifest(a.val);
            const double threshold =
                a.seg_threshold > 0.0 ? a.seg_threshold : ckpt.config.threshold;
            const SegMetrics m = evaluate_seg(ckpt, val, threshold);
            write_json_file(a.out, json{{"records", val.size()},
                                        {"image_iou", m.image_iou},
                                        {"dataset_iou", m.dataset_iou},
                                        {"dice", m.dice},
                                        {"precision", m.precision},
                                        {"recall", m.recall}});
            std::cout << "image_iou " << m.image_iou << ", dataset_iou " << m.dataset_iou
                      << " -> " << a.out << "\n";
        } else if (eval_inp_cmd->parsed()) {
            const InpaintCheckpoint ckpt = load_inpaint_checkpoint(a.ckpt);
            InpaintEvalReport report;
            report.append(evaluate_checkpoint(ckpt, load_manifest(a.val)));
            save_eval_report(a.out, report);
            const InpaintEvalRow& row = report.rows.front();
            std::cout << "ssim " << row.ssim << ", psnr " << row.psnr << ", fid " << row.fid
                      << " -> " << a.out << "\n";
        } else if (survey_cmd->parsed()) {
            const std::vector<ReaderResponse> responses = read_responses(a.responses);
            const ReaderScore s = score_survey(responses, a.threshold);
            write_json_file(a.out, json{{"responses", responses.size()},
                                        {"threshold", a.threshold},
                                        {"tp", s.tp},
                                        {"fn", s.fn},
                                        {"fp", s.fp},
                                        {"tn", s.tn},
                                        {"accuracy", s.accuracy},
                                        {"recall", s.recall},
                                        {"precision", s.precision}});
            std::cout << "accuracy " << s.accuracy << ", recall " << s.recall << ", precision "
                      << s.precision << " -> " << a.out << "\n";
        } else if (run_cmd->parsed()) {
            PipelineConfig cfg = load_pipeline_config(a.config);
            if (!run_seed->empty()) cfg.seed = a.seed;
            if (!run_out->empty()) cfg.out = a.out;
            const fs::path run_dir = run_pipeline(cfg);
            std::cout << "run complete: " << run_dir.string() << "\n";
        }
    } catch (const PipelineError& e) {
        std::cerr << "error[" << to_string(e.category()) << "]: " << e.what() << "\n";
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
