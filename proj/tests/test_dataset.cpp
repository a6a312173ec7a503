#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "polypconnect/dataset.hpp"

using namespace polyp;
using testutil::TempDir;
using testutil::throws_category;

TEST_CASE("labeled dataset loads sorted image/mask pairs") {
    TempDir dir;
    testutil::write_labeled_dataset(dir.path(), 5, 16, 11);
    const DatasetManifest m = load_dataset(dir.path(), DatasetLayout::labeled);
    CHECK(m.size() == 5);
    for (size_t i = 1; i < m.size(); ++i)
        CHECK(m.records[i - 1].image_path < m.records[i].image_path);
    for (const auto& rec : m.records) {
        CHECK(rec.has_mask());
        CHECK(rec.origin == Origin::real);
        CHECK(rec.split == Split::none);
    }
}

TEST_CASE("unlabeled dataset loads a flat directory") {
    TempDir dir;
    testutil::write_unlabeled_dataset(dir.path(), 4, 12, 3);
    const DatasetManifest m = load_dataset(dir.path(), DatasetLayout::unlabeled);
    CHECK(m.size() == 4);
    for (const auto& rec : m.records) CHECK_FALSE(rec.has_mask());
}

TEST_CASE("dataset loading errors") {
    TempDir dir;
    CHECK(throws_category(ErrorCategory::ingestion, [&] {
        load_dataset(dir / "nope", DatasetLayout::unlabeled);
    }));

    // image without a matching mask
    testutil::write_labeled_dataset(dir.path(), 2, 16, 1);
    std::filesystem::remove(dir / "masks" / "case_0001.png");
    CHECK(throws_category(ErrorCategory::missing_annotation, [&] {
        load_dataset(dir.path(), DatasetLayout::labeled);
    }));
}

TEST_CASE("mask dimension mismatch is a shape error") {
    TempDir dir;
    testutil::write_labeled_dataset(dir.path(), 1, 16, 2);
    save_mask(dir / "masks" / "case_0000.png", testutil::disk_mask(9, 0.5, 0.5, 0.3));
    CHECK(throws_category(ErrorCategory::shape, [&] {
        load_dataset(dir.path(), DatasetLayout::labeled);
    }));
}

TEST_CASE("split tags exactly val_count records and is deterministic") {
    DatasetManifest m;
    for (int i = 0; i < 10; ++i) {
        DatasetRecord r;
        r.image_path = "img_" + std::to_string(i) + ".png";
        m.records.push_back(r);
    }
    const DatasetManifest s1 = split_dataset(m, 3, 77);
    const DatasetManifest s2 = split_dataset(m, 3, 77);
    CHECK(s1.count_split(Split::val) == 3);
    CHECK(s1.count_split(Split::train) == 7);
    for (size_t i = 0; i < s1.size(); ++i) {
        CHECK(s1.records[i].image_path == m.records[i].image_path); // order preserved
        CHECK(s1.records[i].split == s2.records[i].split);
    }

    const DatasetManifest s3 = split_dataset(m, 3, 78);
    bool differs = false;
    for (size_t i = 0; i < s1.size(); ++i)
        if (s1.records[i].split != s3.records[i].split) differs = true;
    CHECK(differs);

    CHECK(throws_category(ErrorCategory::invalid_split, [&] { split_dataset(m, -1, 0); }));
    CHECK(throws_category(ErrorCategory::invalid_split, [&] { split_dataset(m, 10, 0); }));
    CHECK(throws_category(ErrorCategory::invalid_split, [&] { split_dataset(s1, 2, 0); }));
}

TEST_CASE("subset keeps only the requested split") {
    DatasetManifest m;
    for (int i = 0; i < 6; ++i) {
        DatasetRecord r;
        r.image_path = "img_" + std::to_string(i) + ".png";
        m.records.push_back(r);
    }
    const DatasetManifest split = split_dataset(m, 2, 5);
    const DatasetManifest val = split.subset(Split::val);
    const DatasetManifest train = split.subset(Split::train);
    CHECK(val.size() == 2);
    CHECK(train.size() == 4);
    for (const auto& r : val.records) CHECK(r.split == Split::val);
}

TEST_CASE("manifest save/load round-trips records and seed") {
    TempDir dir;
    DatasetManifest m;
    m.seed = 123456789;
    DatasetRecord a;
    a.image_path = (dir / "sub" / "img.png").string();
    a.mask_path = (dir / "sub" / "mask.png").string();
    a.origin = Origin::synthetic;
    a.split = Split::train;
    DatasetRecord b;
    b.image_path = "/elsewhere/other.png";
    b.origin = Origin::real;
    b.split = Split::val;
    m.records = {a, b};

    const auto path = dir / "manifest.tsv";
    save_manifest(path, m);
    const DatasetManifest back = load_manifest(path);
    CHECK(back.seed == m.seed);
    REQUIRE(back.size() == 2);
    CHECK(back.records[0].image_path == a.image_path); // resolved against manifest dir
    CHECK(back.records[0].mask_path == a.mask_path);
    CHECK(back.records[0].origin == Origin::synthetic);
    CHECK(back.records[0].split == Split::train);
    CHECK(back.records[1].image_path == b.image_path);
    CHECK_FALSE(back.records[1].has_mask());
    CHECK(back.records[1].split == Split::val);

    // paths under the manifest directory are stored relative
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("sub/img.png") != std::string::npos);
    CHECK(text.find((dir / "sub" / "img.png").string()) == std::string::npos);
}

TEST_CASE("malformed manifest lines are io errors") {
    TempDir dir;
    const auto path = dir / "bad.tsv";
    std::ofstream(path) << "only\ttwo\n";
    CHECK(throws_category(ErrorCategory::io, [&] { load_manifest(path); }));
    std::ofstream(path) << "a.png\t-\tbogus_origin\ttrain\n";
    CHECK(throws_category(ErrorCategory::io, [&] { load_manifest(path); }));
    CHECK(throws_category(ErrorCategory::io, [&] { load_manifest(dir / "absent.tsv"); }));
}

TEST_CASE("protocol split: 1000 records yield 800 train / 200 val") {
    DatasetManifest m;
    for (int i = 0; i < 1000; ++i) {
        DatasetRecord r;
        r.image_path = "img_" + std::to_string(i) + ".png";
        r.mask_path = "mask_" + std::to_string(i) + ".png";
        m.records.push_back(r);
    }
    const DatasetManifest split = split_dataset(m, 200, 2024);
    CHECK(split.count_split(Split::train) == 800);
    CHECK(split.count_split(Split::val) == 200);
    CHECK(split.size() == 1000);
}

TEST_CASE("load_all_masks resizes and requires annotations") {
    TempDir dir;
    testutil::write_labeled_dataset(dir.path(), 3, 20, 8);
    const DatasetManifest m = load_dataset(dir.path(), DatasetLayout::labeled);
    const std::vector<BinaryMask> masks = load_all_masks(m, 10);
    CHECK(masks.size() == 3);
    for (const auto& mask : masks) {
        CHECK(mask.width == 10);
        CHECK(mask.height == 10);
    }

    DatasetManifest unlabeled = m;
    unlabeled.records[1].mask_path.clear();
    CHECK(throws_category(ErrorCategory::missing_annotation,
                          [&] { load_all_masks(unlabeled, 10); }));
}
