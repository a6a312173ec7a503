#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "polypconnect/dataset.hpp"
#include "polypconnect/errors.hpp"
#include "polypconnect/image_io.hpp"
#include "polypconnect/pipeline.hpp"

using namespace polyp;
using testutil::throws_category;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

// Minimal full-phase config at toy scale. Roots must exist already.
nlohmann::json tiny_run_config(const fs::path& labeled, const fs::path& unlabeled,
                               const fs::path& out) {
    nlohmann::json j;
    j["seed"] = 77;
    j["out"] = out.generic_string();
    j["resolution"] = 16;
    j["data"] = {{"labeled_root", labeled.generic_string()},
                 {"unlabeled_root", unlabeled.generic_string()},
                 {"val_count", 2}};
    j["phases"] = {{"gen_masks", true},   {"pretrain", true},  {"finetune", true},
                   {"generate", true},    {"eval_inpaint", true}, {"train_seg", true},
                   {"eval_seg", true}};
    j["edges"] = {{"sigma", 1.0}};
    j["mask_gan"] = {{"start_resolution", 8}, {"target_resolution", 16},
                     {"iterations_per_stage", 4}, {"batch_size", 2},
                     {"learning_rate", 1e-3}, {"sample_count", 6},
                     {"min_fill", 0.001}, {"max_fill", 1.0}};
    j["inpaint"] = {{"pretrain_iterations", 2},
                    {"finetune_iterations", 2},
                    {"batch_size", 1},
                    {"learning_rate", 1e-3},
                    {"eval_every", 0},
                    {"weights", {{"l1", 1.0}, {"adversarial", 0.05}, {"perceptual", 0.05},
                                 {"style", 1.0}, {"feature_matching", 0.5}}}};
    j["generate"] = {{"count", 3}};
    j["seg"] = {{"epochs", 1}, {"batch_size", 2}, {"learning_rate", 1e-3},
                {"threshold", 0.5}, {"synthetic_counts", {0, 2}}};
    return j;
}

} // namespace

TEST_CASE("pipeline config loads and hashes") {
    testutil::TempDir tmp;
    testutil::write_labeled_dataset(tmp / "labeled", 4, 16, 50);
    testutil::write_unlabeled_dataset(tmp / "clean", 3, 16, 51);
    nlohmann::json j = tiny_run_config(tmp / "labeled", tmp / "clean", tmp / "out");
    write_text(tmp / "config.json", j.dump(2));

    PipelineConfig c = load_pipeline_config(tmp / "config.json");
    CHECK(c.seed == 77);
    CHECK(c.resolution == 16);
    CHECK(c.val_count == 2);
    CHECK(c.phase_gen_masks);
    CHECK(c.phase_eval_seg);
    CHECK(c.mask_gan.target_resolution == 16);
    CHECK(c.mask_sample_count == 6);
    CHECK(c.inpaint.iterations == 2);
    CHECK(c.finetune_iterations == 2);
    CHECK(c.generate_count == 3);
    CHECK(c.seg.epochs == 1);
    CHECK(c.synthetic_counts == std::vector<int>{0, 2});
    CHECK(c.edge_sigma == 1.0);
    validate_pipeline(c);

    // the output root is not part of the identity
    PipelineConfig moved = c;
    moved.out = (tmp / "other").generic_string();
    CHECK(pipeline_config_hash(moved) == pipeline_config_hash(c));
    PipelineConfig reseeded = c;
    reseeded.seed = 78;
    CHECK(pipeline_config_hash(reseeded) != pipeline_config_hash(c));
}

TEST_CASE("pipeline config rejects unknown keys and bad types") {
    testutil::TempDir tmp;
    nlohmann::json j = tiny_run_config(tmp / "l", tmp / "u", tmp / "o");

    nlohmann::json bad = j;
    bad["speed"] = 3;
    write_text(tmp / "a.json", bad.dump());
    CHECK(throws_category(ErrorCategory::config,
                          [&] { load_pipeline_config(tmp / "a.json"); }));
    try {
        load_pipeline_config(tmp / "a.json");
    } catch (const PipelineError& e) {
        CHECK(std::string(e.what()).find("speed") != std::string::npos);
    }

    bad = j;
    bad["mask_gan"]["momentum"] = 0.9;
    write_text(tmp / "b.json", bad.dump());
    CHECK(throws_category(ErrorCategory::config,
                          [&] { load_pipeline_config(tmp / "b.json"); }));
    try {
        load_pipeline_config(tmp / "b.json");
    } catch (const PipelineError& e) {
        CHECK(std::string(e.what()).find("mask_gan.momentum") != std::string::npos);
    }

    bad = j;
    bad["seed"] = "abc";
    write_text(tmp / "c.json", bad.dump());
    CHECK(throws_category(ErrorCategory::config,
                          [&] { load_pipeline_config(tmp / "c.json"); }));

    bad = j;
    bad["seg"]["synthetic_counts"] = nlohmann::json::array();
    write_text(tmp / "d.json", bad.dump());
    CHECK(throws_category(ErrorCategory::config,
                          [&] { load_pipeline_config(tmp / "d.json"); }));

    write_text(tmp / "e.json", "{broken");
    CHECK(throws_category(ErrorCategory::config,
                          [&] { load_pipeline_config(tmp / "e.json"); }));
    CHECK(throws_category(ErrorCategory::io,
                          [&] { load_pipeline_config(tmp / "absent.json"); }));
}

TEST_CASE("pipeline validation enforces roots and phase dependencies") {
    testutil::TempDir tmp;
    testutil::write_labeled_dataset(tmp / "labeled", 4, 16, 52);
    testutil::write_unlabeled_dataset(tmp / "clean", 3, 16, 53);

    nlohmann::json j = tiny_run_config(tmp / "labeled", tmp / "clean", tmp / "out");
    write_text(tmp / "config.json", j.dump());
    PipelineConfig base = load_pipeline_config(tmp / "config.json");
    validate_pipeline(base);

    PipelineConfig c = base;
    c.labeled_root = (tmp / "nope").generic_string();
    CHECK(throws_category(ErrorCategory::config, [&] { validate_pipeline(c); }));

    c = base;
    c.labeled_root.clear();
    CHECK(throws_category(ErrorCategory::config, [&] { validate_pipeline(c); }));

    c = base;
    c.phase_pretrain = false;
    CHECK(throws_category(ErrorCategory::dependency, [&] { validate_pipeline(c); }));

    c = base;
    c.phase_finetune = false;
    CHECK(throws_category(ErrorCategory::dependency, [&] { validate_pipeline(c); }));

    c = base;
    c.phase_generate = false;
    CHECK(throws_category(ErrorCategory::dependency, [&] { validate_pipeline(c); }));

    c = base;
    c.phase_train_seg = false;
    CHECK(throws_category(ErrorCategory::dependency, [&] { validate_pipeline(c); }));

    c = base;
    c.phase_eval_inpaint = false;  // removes the val>=2 need but keeps the rest valid
    c.val_count = 1;
    validate_pipeline(c);
    c.phase_eval_inpaint = true;
    CHECK(throws_category(ErrorCategory::config, [&] { validate_pipeline(c); }));

    c = base;
    c.synthetic_counts = {0, -1};
    CHECK(throws_category(ErrorCategory::config, [&] { validate_pipeline(c); }));

    c = base;
    c.out.clear();
    CHECK(throws_category(ErrorCategory::config, [&] { validate_pipeline(c); }));
}

TEST_CASE("generate batch writes paired synthetic records") {
    testutil::TempDir tmp;
    testutil::write_labeled_dataset(tmp / "polyp", 3, 16, 54);
    testutil::write_unlabeled_dataset(tmp / "clean", 2, 16, 55);
    DatasetManifest polyp = load_dataset(tmp / "polyp", DatasetLayout::labeled);
    DatasetManifest clean = load_dataset(tmp / "clean", DatasetLayout::unlabeled);

    InpaintConfig icfg;
    icfg.resolution = 16;
    icfg.iterations = 0;
    icfg.batch_size = 1;
    icfg.seed = 1;
    InpaintCheckpoint ckpt = init_inpaint_checkpoint(icfg);

    DatasetManifest synth = generate_batch(ckpt, clean, polyp, 5, 42, tmp / "gen", 1.0);
    REQUIRE(synth.size() == 5);
    for (const auto& r : synth.records) {
        CHECK(r.origin == Origin::synthetic);
        CHECK(r.has_mask());
        CHECK(fs::exists(r.image_path));
        CHECK(fs::exists(r.mask_path));
        RasterImage img = load_image(r.image_path);
        CHECK(img.width == 16);
        CHECK(img.height == 16);
        BinaryMask m = load_mask(r.mask_path);
        CHECK(m.width == 16);
        bool any = false;
        for (auto v : m.data) any = any || v == 1;
        CHECK(any);
    }

    // The stored mask is the polyp-source mask at working resolution. The
    // source is recoverable from the generated file name (…_p<stem>…).
    for (const auto& r : synth.records) {
        std::string name = fs::path(r.image_path).stem().string();
        auto pos = name.rfind("_p");
        REQUIRE(pos != std::string::npos);
        std::string stem = name.substr(pos + 2);
        bool matched = false;
        for (const auto& src : polyp.records) {
            if (fs::path(src.image_path).stem().string() != stem) continue;
            matched = true;
            BinaryMask want = load_mask(src.mask_path, 16);
            BinaryMask got = load_mask(r.mask_path);
            CHECK(testutil::same_mask(want, got));
        }
        CHECK(matched);
    }

    // determinism: same seed, fresh directory -> identical outputs
    DatasetManifest again = generate_batch(ckpt, clean, polyp, 5, 42, tmp / "gen2", 1.0);
    REQUIRE(again.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(fs::path(synth.records[i].image_path).filename() ==
              fs::path(again.records[i].image_path).filename());
        CHECK(testutil::same_pixels(load_image(synth.records[i].image_path),
                                    load_image(again.records[i].image_path)));
    }

    CHECK(throws_category(ErrorCategory::invalid_argument, [&] {
        generate_batch(ckpt, clean, polyp, -1, 1, tmp / "g3", 1.0);
    }));
    CHECK(throws_category(ErrorCategory::insufficient_data, [&] {
        generate_batch(ckpt, DatasetManifest{}, polyp, 1, 1, tmp / "g4", 1.0);
    }));
    CHECK(throws_category(ErrorCategory::insufficient_data, [&] {
        generate_batch(ckpt, clean, DatasetManifest{}, 1, 1, tmp / "g5", 1.0);
    }));
    CHECK(throws_category(ErrorCategory::missing_annotation, [&] {
        generate_batch(ckpt, clean, clean, 1, 1, tmp / "g6", 1.0);
    }));
}

TEST_CASE("full pipeline run is reproducible across output roots") {
    testutil::TempDir tmp;
    testutil::write_labeled_dataset(tmp / "labeled", 5, 16, 56);
    testutil::write_unlabeled_dataset(tmp / "clean", 3, 16, 57);

    nlohmann::json j = tiny_run_config(tmp / "labeled", tmp / "clean", tmp / "out_a");
    write_text(tmp / "a.json", j.dump(2));
    j["out"] = (tmp / "out_b").generic_string();
    write_text(tmp / "b.json", j.dump(2));

    PipelineConfig ca = load_pipeline_config(tmp / "a.json");
    PipelineConfig cb = load_pipeline_config(tmp / "b.json");
    fs::path run_a = run_pipeline(ca);
    fs::path run_b = run_pipeline(cb);
    CHECK(run_a != run_b);
    CHECK(run_a.filename() == run_b.filename());

    // run layout
    CHECK(fs::exists(run_a / "config.json"));
    CHECK(fs::exists(run_a / "real.tsv"));
    CHECK(fs::exists(run_a / "clean.tsv"));
    CHECK(fs::exists(run_a / "synthetic.tsv"));
    CHECK(fs::exists(run_a / "mixed_0.tsv"));
    CHECK(fs::exists(run_a / "mixed_2.tsv"));
    CHECK(fs::exists(run_a / "checkpoints" / "maskgan.bin"));
    CHECK(fs::exists(run_a / "checkpoints" / "pretrain.bin"));
    CHECK(fs::exists(run_a / "checkpoints" / "finetune.bin"));
    CHECK(fs::exists(run_a / "checkpoints" / "seg_0.bin"));
    CHECK(fs::exists(run_a / "checkpoints" / "seg_2.bin"));
    CHECK(fs::exists(run_a / "reports" / "inpaint_eval.json"));
    CHECK(fs::exists(run_a / "reports" / "seg_metrics.json"));

    // every manifest and report must match byte for byte across roots
    for (const char* rel : {"config.json", "real.tsv", "clean.tsv", "synthetic.tsv",
                            "mixed_0.tsv", "mixed_2.tsv"}) {
        CAPTURE(rel);
        CHECK(testutil::read_file(run_a / rel) == testutil::read_file(run_b / rel));
    }
    for (const char* rel : {"reports/inpaint_eval.json", "reports/seg_metrics.json"}) {
        CAPTURE(rel);
        CHECK(testutil::read_file(run_a / rel) == testutil::read_file(run_b / rel));
    }

    // generated images themselves are identical too
    DatasetManifest synth_a = load_manifest(run_a / "synthetic.tsv");
    DatasetManifest synth_b = load_manifest(run_b / "synthetic.tsv");
    REQUIRE(synth_a.size() == synth_b.size());
    REQUIRE(synth_a.size() == 3);
    for (size_t i = 0; i < synth_a.size(); ++i)
        CHECK(testutil::same_pixels(load_image(synth_a.records[i].image_path),
                                    load_image(synth_b.records[i].image_path)));

    // masks directory carries the filtered sample count
    int mask_files = 0;
    for (const auto& e : fs::directory_iterator(run_a / "masks"))
        if (e.path().extension() == ".png") ++mask_files;
    CHECK(mask_files == 6);

    // rerunning in place rewrites the same bytes
    std::string before = testutil::read_file(run_a / "synthetic.tsv");
    fs::path run_a2 = run_pipeline(ca);
    CHECK(run_a2 == run_a);
    CHECK(testutil::read_file(run_a / "synthetic.tsv") == before);

    // seg metrics report carries one row per synthetic count
    nlohmann::json metrics =
        nlohmann::json::parse(testutil::read_file(run_a / "reports" / "seg_metrics.json"));
    REQUIRE(metrics.is_array());
    REQUIRE(metrics.size() == 2);
    CHECK(metrics[0]["n_synth"] == 0);
    CHECK(metrics[1]["n_synth"] == 2);
    for (const auto& row : metrics) {
        CHECK(row.contains("image_iou"));
        CHECK(row.contains("dataset_iou"));
        CHECK(row.contains("dice"));
        CHECK(row.contains("precision"));
        CHECK(row.contains("recall"));
    }
}

TEST_CASE("a gen-masks-only run writes just the filtered mask pool") {
    testutil::TempDir tmp;
    testutil::write_labeled_dataset(tmp / "labeled", 5, 16, 58);

    nlohmann::json j = tiny_run_config(tmp / "labeled", tmp / "clean", tmp / "out");
    j["phases"] = {{"gen_masks", true},  {"pretrain", false},  {"finetune", false},
                   {"generate", false},  {"eval_inpaint", false}, {"train_seg", false},
                   {"eval_seg", false}};
    write_text(tmp / "run.json", j.dump(2));

    fs::path run = run_pipeline(load_pipeline_config(tmp / "run.json"));

    CHECK(fs::exists(run / "checkpoints" / "maskgan.bin"));
    CHECK(!fs::exists(run / "synthetic.tsv"));
    CHECK(!fs::exists(run / "reports" / "seg_metrics.json"));

    int mask_files = 0;
    for (const auto& e : fs::directory_iterator(run / "masks"))
        if (e.path().extension() == ".png") {
            BinaryMask m = load_mask(e.path(), 16);
            const double fill = m.fill_ratio();
            CHECK(fill >= 0.001);
            CHECK(fill <= 1.0);
            ++mask_files;
        }
    CHECK(mask_files == 6);
}

TEST_CASE("command line interface round trip") {
    testutil::TempDir tmp;
    const std::string cli = CLI_PATH;

    // survey scoring: CSV in, JSON out
    write_text(tmp / "responses.csv",
               "image_id,confidence,truth\n"
               "a,8,generated\nb,3,generated\nc,9,real\nd,2,real\ne,7,generated\n");
    fs::path out = tmp / "survey.json";
    std::string cmd = cli + " score-survey --responses " +
                      (tmp / "responses.csv").string() + " --out " + out.string();
    CHECK(std::system(cmd.c_str()) == 0);
    nlohmann::json j = nlohmann::json::parse(testutil::read_file(out));
    CHECK(j["tp"] == 2);
    CHECK(j["fn"] == 1);
    CHECK(j["fp"] == 1);
    CHECK(j["tn"] == 1);
    CHECK(j["responses"] == 5);

    // malformed CSV -> invalid-argument exit code
    write_text(tmp / "bad.csv", "image_id,confidence,truth\na,99,generated\n");
    cmd = cli + " score-survey --responses " + (tmp / "bad.csv").string() + " --out " +
          (tmp / "bad.json").string() + " 2>/dev/null";
    int rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 6);

    // missing input file -> io exit code
    cmd = cli + " score-survey --responses " + (tmp / "absent.csv").string() + " --out " +
          (tmp / "x.json").string() + " 2>/dev/null";
    rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 11);

    // unknown config key through the run command -> config exit code
    write_text(tmp / "cfg.json", "{\"bogus\": 1}");
    cmd = cli + " run --config " + (tmp / "cfg.json").string() + " 2>" +
          (tmp / "err.txt").string();
    rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 2);
    std::string err = testutil::read_file(tmp / "err.txt");
    CHECK(err.find("error[config]") != std::string::npos);
    CHECK(err.find("bogus") != std::string::npos);

    // extract-edges on a real image
    testutil::write_unlabeled_dataset(tmp / "imgs", 1, 16, 58);
    fs::path img;
    for (const auto& e : fs::directory_iterator(tmp / "imgs")) img = e.path();
    cmd = cli + " extract-edges --in " + img.string() + " --out " +
          (tmp / "edges.png").string() + " --sigma 1.0";
    CHECK(std::system(cmd.c_str()) == 0);
    EdgeMap edges = load_edges(tmp / "edges.png");
    CHECK(edges.width == 16);
    CHECK(edges.height == 16);
}
