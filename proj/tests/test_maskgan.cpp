#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "polypconnect/errors.hpp"
#include "polypconnect/maskgan.hpp"

using namespace polyp;
using testutil::throws_category;

namespace {

MaskGanConfig tiny_config() {
    MaskGanConfig c;
    c.start_resolution = 8;
    c.target_resolution = 16;
    c.iterations_per_stage = 6;
    c.batch_size = 2;
    c.learning_rate = 1e-3;
    c.seed = 11;
    return c;
}

BinaryMask square_mask(int size, double fill) {
    BinaryMask m(size, size);
    // centered square whose area is fill * size^2
    int side = static_cast<int>(std::lround(size * std::sqrt(fill)));
    side = std::max(1, std::min(size, side));
    int off = (size - side) / 2;
    for (int y = off; y < off + side; ++y)
        for (int x = off; x < off + side; ++x) m.at(y, x) = 1;
    return m;
}

BinaryMask mask_with_fill(int size, double fill) {
    BinaryMask m(size, size);
    int want = static_cast<int>(std::lround(fill * size * size));
    for (int i = 0; i < want; ++i) m.data[static_cast<size_t>(i)] = 1;
    return m;
}

} // namespace

TEST_CASE("mask gan config validation") {
    MaskGanConfig ok = tiny_config();
    validate(ok);
    CHECK(config_hash(ok).size() == 16);

    MaskGanConfig bad = ok;
    bad.start_resolution = 12;  // not a power of two
    CHECK(throws_category(ErrorCategory::config, [&] { validate(bad); }));
    bad = ok;
    bad.target_resolution = 4;  // below start
    CHECK(throws_category(ErrorCategory::config, [&] { validate(bad); }));
    bad = ok;
    bad.iterations_per_stage = 0;
    CHECK(throws_category(ErrorCategory::config, [&] { validate(bad); }));
    bad = ok;
    bad.batch_size = -1;
    CHECK(throws_category(ErrorCategory::config, [&] { validate(bad); }));
    bad = ok;
    bad.learning_rate = 0.0;
    CHECK(throws_category(ErrorCategory::config, [&] { validate(bad); }));

    MaskGanConfig other = ok;
    other.seed = 12;
    CHECK(config_hash(other) != config_hash(ok));
}

TEST_CASE("untrained generator samples valid masks") {
    MaskGanCheckpoint ckpt = init_mask_generator(tiny_config());
    CHECK(ckpt.stage == 16);
    CHECK(ckpt.iteration == 0);
    auto masks = sample_masks(ckpt, 4, 7);
    REQUIRE(masks.size() == 4);
    for (const auto& m : masks) {
        CHECK(m.width == 16);
        CHECK(m.height == 16);
        for (auto v : m.data) CHECK((v == 0 || v == 1));
    }
    CHECK(throws_category(ErrorCategory::invalid_argument,
                          [&] { sample_masks(ckpt, 0, 7); }));
}

TEST_CASE("sampling is a pure function of checkpoint and seed") {
    MaskGanCheckpoint ckpt = init_mask_generator(tiny_config());
    auto a = sample_masks(ckpt, 8, 99);
    auto b = sample_masks(ckpt, 8, 99);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(testutil::same_mask(a[i], b[i]));

    auto c = sample_masks(ckpt, 8, 100);
    bool any_diff = false;
    for (size_t i = 0; i < a.size() && !any_diff; ++i)
        any_diff = !testutil::same_mask(a[i], c[i]);
    CHECK(any_diff);
}

TEST_CASE("training is deterministic and stages end at the target") {
    std::vector<BinaryMask> pool;
    for (int i = 0; i < 4; ++i) pool.push_back(square_mask(32, 0.2 + 0.05 * i));

    MaskGanConfig cfg = tiny_config();
    MaskGanCheckpoint a = train_mask_generator(pool, cfg);
    MaskGanCheckpoint b = train_mask_generator(pool, cfg);
    CHECK(a.stage == cfg.target_resolution);
    CHECK(a.iteration == b.iteration);
    CHECK(a.generator_weights == b.generator_weights);
    CHECK(a.discriminator_weights == b.discriminator_weights);
    CHECK(a.hash == config_hash(cfg));

    auto sa = sample_masks(a, 3, 5);
    auto sb = sample_masks(b, 3, 5);
    for (size_t i = 0; i < sa.size(); ++i) CHECK(testutil::same_mask(sa[i], sb[i]));
}

TEST_CASE("degenerate schedule trains a single stage") {
    MaskGanConfig cfg = tiny_config();
    cfg.start_resolution = 8;
    cfg.target_resolution = 8;
    std::vector<BinaryMask> pool = {square_mask(8, 0.25), square_mask(8, 0.3)};
    MaskGanCheckpoint ckpt = train_mask_generator(pool, cfg);
    CHECK(ckpt.stage == 8);
    CHECK(ckpt.iteration == cfg.iterations_per_stage);
}

TEST_CASE("too few masks is an error") {
    MaskGanConfig cfg = tiny_config();
    CHECK(throws_category(ErrorCategory::insufficient_data,
                          [&] { train_mask_generator({}, cfg); }));
    CHECK(throws_category(ErrorCategory::insufficient_data,
                          [&] { train_mask_generator({square_mask(8, 0.25)}, cfg); }));
}

TEST_CASE("trained sampler tracks the pool fill ratio") {
    // Pool of identical squares, fill 0.25. After a short run the sample mean
    // fill should sit near the pool's.
    std::vector<BinaryMask> pool(8, square_mask(32, 0.25));
    const double pool_fill = pool[0].fill_ratio();
    CHECK(pool_fill == doctest::Approx(0.25).epsilon(0.02));

    MaskGanConfig cfg;
    cfg.start_resolution = 8;
    cfg.target_resolution = 32;
    cfg.iterations_per_stage = 60;
    cfg.batch_size = 4;
    cfg.learning_rate = 2e-3;
    cfg.seed = 3;
    MaskGanCheckpoint ckpt = train_mask_generator(pool, cfg);

    auto samples = sample_masks(ckpt, 100, 17);
    double mean_fill = 0.0;
    for (const auto& m : samples) mean_fill += m.fill_ratio();
    mean_fill /= static_cast<double>(samples.size());
    CHECK(std::abs(mean_fill - pool_fill) <= 0.10);
}

TEST_CASE("fill filter keeps the documented band") {
    std::vector<BinaryMask> masks;
    for (double f : {0.00, 0.03, 0.10, 0.50, 0.80, 1.00})
        masks.push_back(mask_with_fill(20, f));
    auto kept = filter_masks(masks);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].fill_ratio() == doctest::Approx(0.10).epsilon(1e-12));
    CHECK(kept[1].fill_ratio() == doctest::Approx(0.50).epsilon(1e-12));

    // all-zero mask is always rejected by the default band
    CHECK(filter_masks({BinaryMask(16, 16)}).empty());
    // identity on empty input
    CHECK(filter_masks({}).empty());
    CHECK(throws_category(ErrorCategory::invalid_argument,
                          [&] { filter_masks(masks, 0.5, 0.5); }));
    CHECK(throws_category(ErrorCategory::invalid_argument,
                          [&] { filter_masks(masks, -0.1, 0.5); }));
    CHECK(throws_category(ErrorCategory::invalid_argument,
                          [&] { filter_masks(masks, 0.1, 1.5); }));
}

TEST_CASE("fill filter is an order-preserving subsequence with exact bounds") {
    // 10x10 masks cover every fill 0.00..1.00 in 0.01 steps.
    std::vector<BinaryMask> masks;
    for (int k = 0; k <= 100; ++k) masks.push_back(mask_with_fill(10, k / 100.0));
    auto kept = filter_masks(masks);
    size_t expect = 0;
    for (int k = 0; k <= 100; ++k)
        if (k >= 5 && k <= 70) ++expect;
    CHECK(kept.size() == expect);
    double prev = -1.0;
    for (const auto& m : kept) {
        double f = m.fill_ratio();
        CHECK(f >= 0.05);
        CHECK(f <= 0.70);
        CHECK(f > prev);  // input was sorted, so order must be preserved
        prev = f;
    }
}

TEST_CASE("mask checkpoint round-trips through disk") {
    testutil::TempDir tmp;
    std::vector<BinaryMask> pool = {square_mask(16, 0.25), square_mask(16, 0.36)};
    MaskGanConfig cfg = tiny_config();
    MaskGanCheckpoint ckpt = train_mask_generator(pool, cfg);

    auto path = tmp / "mask.bin";
    save_mask_checkpoint(path, ckpt);
    MaskGanCheckpoint back = load_mask_checkpoint(path);
    CHECK(back.stage == ckpt.stage);
    CHECK(back.iteration == ckpt.iteration);
    CHECK(back.hash == ckpt.hash);
    CHECK(back.generator_weights == ckpt.generator_weights);
    CHECK(back.discriminator_weights == ckpt.discriminator_weights);
    CHECK(back.config.target_resolution == cfg.target_resolution);
    CHECK(back.config.seed == cfg.seed);

    auto sa = sample_masks(ckpt, 4, 21);
    auto sb = sample_masks(back, 4, 21);
    for (size_t i = 0; i < sa.size(); ++i) CHECK(testutil::same_mask(sa[i], sb[i]));

    CHECK(throws_category(ErrorCategory::io,
                          [&] { load_mask_checkpoint(tmp / "absent.bin"); }));
}
