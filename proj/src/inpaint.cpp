#include "polypconnect/inpaint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "polypconnect/image_io.hpp"
#include "polypconnect/metrics.hpp"
#include "polypconnect/nn/losses.hpp"
#include "polypconnect/nn/optim.hpp"
#include "polypconnect/rng.hpp"
#include "polypconnect/serialize.hpp"

namespace polyp {

namespace {

using nn::Stack;
using nn::Tap;
using nn::Tensor;

constexpr int kWidth = 16;  // base channel width of both generators

// All four networks plus the frozen feature net used for perceptual and
// style losses. Every call builds the full architecture so checkpoint blobs
// have a fixed layout determined by the config alone.
struct InpaintModel {
    Stack g_a;  // edge completion: (holed edges, holed gray, mask) -> edge field
    Stack d_a;  // edge critic: (edge field, gray) -> patch logits
    Stack g_b;  // RGB inpainting: (holed rgb, edges, mask) -> rgb
    Stack d_b;  // RGB critic: rgb -> patch logits
    Stack frozen;  // perceptual/style feature net, never trained

    explicit InpaintModel(const InpaintConfig& cfg) {
        Rng rng(derive_seed(cfg.seed, "inpaint-init"));
        build_generator(g_a, 3, 1, rng);
        build_critic(d_a, 2, rng);
        build_generator(g_b, 5, 3, rng);
        build_critic(d_b, 3, rng);

        Rng fixed(derive_seed(FeatureExtractor::kDefaultSeed, "perceptual-net"));
        frozen.emplace<nn::Conv2d>(3, 8, 3, 2, 1, fixed);
        frozen.emplace<nn::LeakyReLU>();
        frozen.emplace<nn::Conv2d>(8, 16, 3, 2, 1, fixed);
        frozen.emplace<nn::LeakyReLU>();
        frozen.emplace<nn::Conv2d>(16, 32, 3, 2, 1, fixed);
        frozen.emplace<nn::LeakyReLU>();
    }

    static void build_generator(Stack& s, int in_ch, int out_ch, Rng& rng) {
        s.emplace<nn::Conv2d>(in_ch, kWidth, 3, 1, 1, rng);
        s.emplace<nn::InstanceNorm>(kWidth);
        s.emplace<nn::LeakyReLU>();
        s.emplace<nn::Conv2d>(kWidth, 2 * kWidth, 3, 2, 1, rng);
        s.emplace<nn::InstanceNorm>(2 * kWidth);
        s.emplace<nn::LeakyReLU>();
        s.emplace<nn::Conv2d>(2 * kWidth, 2 * kWidth, 3, 1, 1, rng);
        s.emplace<nn::InstanceNorm>(2 * kWidth);
        s.emplace<nn::LeakyReLU>();
        s.emplace<nn::UpsampleNearest2>();
        s.emplace<nn::Conv2d>(2 * kWidth, kWidth, 3, 1, 1, rng);
        s.emplace<nn::InstanceNorm>(kWidth);
        s.emplace<nn::LeakyReLU>();
        s.emplace<nn::Conv2d>(kWidth, out_ch, 3, 1, 1, rng);
        s.emplace<nn::Sigmoid>();
    }

    static void build_critic(Stack& s, int in_ch, Rng& rng) {
        s.emplace<nn::Conv2d>(in_ch, kWidth, 3, 2, 1, rng);
        s.emplace<nn::LeakyReLU>();
        s.emplace<nn::Conv2d>(kWidth, 2 * kWidth, 3, 2, 1, rng);
        s.emplace<nn::LeakyReLU>();
        s.emplace<nn::Conv2d>(2 * kWidth, 2 * kWidth, 3, 2, 1, rng);
        s.emplace<nn::LeakyReLU>();
        s.emplace<nn::Conv2d>(2 * kWidth, 1, 3, 1, 1, rng);
    }

    std::vector<nn::Param*> edge_params() {
        std::vector<nn::Param*> out = g_a.params();
        for (auto* p : d_a.params()) out.push_back(p);
        return out;
    }
    std::vector<nn::Param*> rgb_params() {
        std::vector<nn::Param*> out = g_b.params();
        for (auto* p : d_b.params()) out.push_back(p);
        return out;
    }
};

// critic LeakyReLU activations used for feature matching
constexpr size_t kCriticTaps[3] = {1, 3, 5};
// frozen-net LeakyReLU activations used for perceptual and style terms
constexpr size_t kFrozenTaps[3] = {1, 3, 5};

InpaintModel build_model(const InpaintCheckpoint& ckpt) {
    InpaintModel model(ckpt.config);
    unpack_params(model.edge_params(), ckpt.edge_stage_weights);
    unpack_params(model.rgb_params(), ckpt.inpaint_stage_weights);
    return model;
}

InpaintCheckpoint snapshot(InpaintModel& model, const InpaintConfig& cfg, long long iteration,
                           InpaintPhase phase) {
    InpaintCheckpoint ckpt;
    ckpt.config = cfg;
    ckpt.edge_stage_weights = pack_params(model.edge_params());
    ckpt.inpaint_stage_weights = pack_params(model.rgb_params());
    ckpt.iteration = iteration;
    ckpt.phase = phase;
    ckpt.hash = config_hash(cfg);
    return ckpt;
}

struct TrainItem {
    RasterImage image;
    BinaryMask mask;
    EdgeMap edges;
};

Tensor rgb_tensor(const std::vector<TrainItem>& batch) {
    const int h = batch[0].image.height, w = batch[0].image.width;
    Tensor t(static_cast<int>(batch.size()), 3, h, w);
    for (size_t b = 0; b < batch.size(); ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    t.at(static_cast<int>(b), c, y, x) =
                        static_cast<float>(batch[b].image.at(y, x, c));
    return t;
}

Tensor gray_tensor(const std::vector<TrainItem>& batch) {
    const int h = batch[0].image.height, w = batch[0].image.width;
    Tensor t(static_cast<int>(batch.size()), 1, h, w);
    for (size_t b = 0; b < batch.size(); ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                t.at(static_cast<int>(b), 0, y, x) =
                    static_cast<float>(luminance_at(batch[b].image, y, x));
    return t;
}

Tensor mask_tensor(const std::vector<TrainItem>& batch) {
    const int h = batch[0].mask.height, w = batch[0].mask.width;
    Tensor t(static_cast<int>(batch.size()), 1, h, w);
    for (size_t b = 0; b < batch.size(); ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                t.at(static_cast<int>(b), 0, y, x) = static_cast<float>(batch[b].mask.at(y, x));
    return t;
}

Tensor edge_tensor(const std::vector<TrainItem>& batch) {
    const int h = batch[0].edges.height, w = batch[0].edges.width;
    Tensor t(static_cast<int>(batch.size()), 1, h, w);
    for (size_t b = 0; b < batch.size(); ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                t.at(static_cast<int>(b), 0, y, x) = static_cast<float>(batch[b].edges.at(y, x));
    return t;
}

// x * (1 - mask), mask broadcast across channels
Tensor hole(const Tensor& x, const Tensor& mask) {
    Tensor out = x;
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx)
                    if (mask.at(n, 0, y, xx) > 0.5f) out.at(n, c, y, xx) = 0.0f;
    return out;
}

// pred * mask + truth * (1 - mask)
Tensor composite(const Tensor& pred, const Tensor& truth, const Tensor& mask) {
    Tensor out = truth;
    for (int n = 0; n < pred.n; ++n)
        for (int c = 0; c < pred.c; ++c)
            for (int y = 0; y < pred.h; ++y)
                for (int xx = 0; xx < pred.w; ++xx)
                    if (mask.at(n, 0, y, xx) > 0.5f) out.at(n, c, y, xx) = pred.at(n, c, y, xx);
    return out;
}

Tensor mask_grad(const Tensor& g, const Tensor& mask) {
    Tensor out = g;
    for (int n = 0; n < g.n; ++n)
        for (int c = 0; c < g.c; ++c)
            for (int y = 0; y < g.h; ++y)
                for (int xx = 0; xx < g.w; ++xx)
                    if (mask.at(n, 0, y, xx) <= 0.5f) out.at(n, c, y, xx) = 0.0f;
    return out;
}

Tensor concat3(const Tensor& a, const Tensor& b, const Tensor& c) {
    return nn::concat_channels(nn::concat_channels(a, b), c);
}

void scale_tensor(Tensor& t, double s) {
    for (auto& v : t.data) v = static_cast<float>(v * s);
}

void add_tensor(Tensor& dst, const Tensor& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

struct StepLosses {
    double d_a = 0.0, g_a_adv = 0.0, g_a_fm = 0.0;
    double d_b = 0.0, g_b_l1 = 0.0, g_b_adv = 0.0, g_b_perc = 0.0, g_b_style = 0.0,
           g_b_fm = 0.0;

    bool finite() const {
        for (double v : {d_a, g_a_adv, g_a_fm, d_b, g_b_l1, g_b_adv, g_b_perc, g_b_style, g_b_fm})
            if (!std::isfinite(v)) return false;
        return true;
    }
};

StepLosses train_step(InpaintModel& m, const std::vector<TrainItem>& batch,
                      const LossWeights& w, nn::Adam& opt_ga, nn::Adam& opt_da,
                      nn::Adam& opt_gb, nn::Adam& opt_db) {
    StepLosses losses;

    const Tensor img = rgb_tensor(batch);
    const Tensor gray = gray_tensor(batch);
    const Tensor mask = mask_tensor(batch);
    const Tensor edges = edge_tensor(batch);
    const Tensor holed_img = hole(img, mask);
    const Tensor holed_gray = hole(gray, mask);
    const Tensor holed_edges = hole(edges, mask);

    // ---- edge stage ----
    const Tensor pred_e = m.g_a.forward(concat3(holed_edges, holed_gray, mask));
    const Tensor comp_e = composite(pred_e, edges, mask);
    const Tensor real_pair = nn::concat_channels(edges, gray);
    const Tensor fake_pair = nn::concat_channels(comp_e, gray);

    {  // critic update
        const Tensor y_real = m.d_a.forward(real_pair);
        losses.d_a += nn::adv_loss(y_real, true);
        m.d_a.backward(nn::adv_grad(y_real, true), true);
        const Tensor y_fake = m.d_a.forward(fake_pair);
        losses.d_a += nn::adv_loss(y_fake, false);
        m.d_a.backward(nn::adv_grad(y_fake, false), true);
        opt_da.step();
        opt_da.zero_grad();
    }

    {  // generator update: adversarial + feature matching
        m.d_a.forward(real_pair);
        Tensor real_acts[3];
        for (int i = 0; i < 3; ++i) real_acts[i] = m.d_a.act(kCriticTaps[i]);

        const Tensor y_fake = m.d_a.forward(fake_pair);
        losses.g_a_adv = nn::adv_loss(y_fake, true);
        Tensor g_out = nn::adv_grad(y_fake, true);
        scale_tensor(g_out, w.adversarial);

        std::vector<Tap> taps;
        for (int i = 0; i < 3; ++i) {
            Tensor g_fm;
            losses.g_a_fm += nn::l1_with_grad(m.d_a.act(kCriticTaps[i]), real_acts[i], g_fm);
            scale_tensor(g_fm, w.feature_matching);
            taps.push_back({static_cast<int>(kCriticTaps[i]), std::move(g_fm)});
        }

        const Tensor g_in = m.d_a.backward_with_taps(g_out, taps, false);
        Tensor g_comp, g_gray;
        nn::split_channels(g_in, 1, g_comp, g_gray);
        const Tensor g_pred = mask_grad(g_comp, mask);
        m.g_a.backward(g_pred, true);
        opt_ga.step();
        opt_ga.zero_grad();
    }

    // ---- RGB stage (edge condition enters as data, not as a gradient path) ----
    const Tensor pred_rgb = m.g_b.forward(concat3(holed_img, comp_e, mask));
    const Tensor comp_rgb = composite(pred_rgb, img, mask);

    {  // critic update
        const Tensor y_real = m.d_b.forward(img);
        losses.d_b += nn::adv_loss(y_real, true);
        m.d_b.backward(nn::adv_grad(y_real, true), true);
        const Tensor y_fake = m.d_b.forward(comp_rgb);
        losses.d_b += nn::adv_loss(y_fake, false);
        m.d_b.backward(nn::adv_grad(y_fake, false), true);
        opt_db.step();
        opt_db.zero_grad();
    }

    {  // generator update: l1 + adversarial + fm + perceptual + style
        Tensor g_l1;
        losses.g_b_l1 = nn::l1_with_grad(pred_rgb, img, g_l1);

        m.d_b.forward(img);
        Tensor real_acts[3];
        for (int i = 0; i < 3; ++i) real_acts[i] = m.d_b.act(kCriticTaps[i]);

        const Tensor y_fake = m.d_b.forward(comp_rgb);
        losses.g_b_adv = nn::adv_loss(y_fake, true);
        Tensor g_out = nn::adv_grad(y_fake, true);
        scale_tensor(g_out, w.adversarial);

        std::vector<Tap> taps;
        for (int i = 0; i < 3; ++i) {
            Tensor g_fm;
            losses.g_b_fm += nn::l1_with_grad(m.d_b.act(kCriticTaps[i]), real_acts[i], g_fm);
            scale_tensor(g_fm, w.feature_matching);
            taps.push_back({static_cast<int>(kCriticTaps[i]), std::move(g_fm)});
        }
        Tensor g_comp = m.d_b.backward_with_taps(g_out, taps, false);

        m.frozen.forward(img);
        Tensor ref_acts[3];
        for (int i = 0; i < 3; ++i) ref_acts[i] = m.frozen.act(kFrozenTaps[i]);

        const Tensor frozen_out = m.frozen.forward(comp_rgb);
        std::vector<Tap> frozen_taps;
        for (int i = 0; i < 3; ++i) {
            const Tensor& fake_act = m.frozen.act(kFrozenTaps[i]);
            Tensor g_perc, g_style;
            losses.g_b_perc += nn::l1_with_grad(fake_act, ref_acts[i], g_perc);
            losses.g_b_style += nn::gram_l1_with_grad(fake_act, ref_acts[i], g_style);
            scale_tensor(g_perc, w.perceptual);
            scale_tensor(g_style, w.style);
            add_tensor(g_perc, g_style);
            frozen_taps.push_back({static_cast<int>(kFrozenTaps[i]), std::move(g_perc)});
        }
        add_tensor(g_comp,
                   m.frozen.backward_with_taps(frozen_out.like_zeros(), frozen_taps, false));

        Tensor g_pred = mask_grad(g_comp, mask);
        scale_tensor(g_l1, w.l1);
        add_tensor(g_pred, g_l1);
        m.g_b.backward(g_pred, true);
        opt_gb.step();
        opt_gb.zero_grad();
    }

    return losses;
}

TrainItem make_item(RasterImage image, BinaryMask mask, double edge_sigma) {
    TrainItem item;
    item.edges = extract_edges(image, CannyParams{edge_sigma, 0.2, 0.5});
    item.image = std::move(image);
    item.mask = std::move(mask);
    return item;
}

InpaintCheckpoint train_loop(InpaintModel& model, const DatasetManifest& data,
                             const std::vector<BinaryMask>* mask_pool,
                             const InpaintConfig& cfg, InpaintPhase phase,
                             long long start_iteration) {
    nn::Adam opt_ga(model.g_a.params(), cfg.learning_rate, 0.5, 0.999);
    nn::Adam opt_da(model.d_a.params(), cfg.learning_rate, 0.5, 0.999);
    nn::Adam opt_gb(model.g_b.params(), cfg.learning_rate, 0.5, 0.999);
    nn::Adam opt_db(model.d_b.params(), cfg.learning_rate, 0.5, 0.999);

    const char* tag = phase == InpaintPhase::pretrain ? "pretrain" : "finetune";
    Rng data_rng(derive_seed(cfg.seed, std::string(tag) + "-data"));
    const std::uint64_t mask_base = derive_seed(cfg.seed, std::string(tag) + "-mask");

    for (int it = 0; it < cfg.iterations; ++it) {
        const long long iteration = start_iteration + it + 1;
        std::vector<TrainItem> batch;
        batch.reserve(static_cast<size_t>(cfg.batch_size));
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& rec =
                data.records[static_cast<size_t>(data_rng.uniform_int(static_cast<int>(data.size())))];
            RasterImage image = load_image(rec.image_path, cfg.resolution);
            BinaryMask mask;
            if (mask_pool) {
                const std::uint64_t s = derive_seed(
                    mask_base, static_cast<std::uint64_t>(iteration) * 64 + static_cast<std::uint64_t>(b));
                mask = pair_random_mask(image, *mask_pool, s).mask;
            } else {
                mask = load_mask(rec.mask_path, cfg.resolution);
            }
            batch.push_back(make_item(std::move(image), std::move(mask), cfg.edge_sigma));
        }

        const StepLosses losses =
            train_step(model, batch, cfg.loss_weights, opt_ga, opt_da, opt_gb, opt_db);
        if (!losses.finite())
            fail(ErrorCategory::training_diverged,
                 "inpainting loss non-finite at iteration " + std::to_string(iteration));
    }
    return snapshot(model, cfg, start_iteration + cfg.iterations, phase);
}

// Quantize the generated content to 8 bits inside the mask; copy the input
// verbatim outside it, which makes the compositing invariant bit-exact.
RasterImage composite_image(const RasterImage& clean, const Tensor& pred,
                            const BinaryMask& mask) {
    RasterImage out = clean;
    for (int y = 0; y < clean.height; ++y)
        for (int x = 0; x < clean.width; ++x) {
            if (!mask.at(y, x)) continue;
            for (int c = 0; c < 3; ++c) {
                const double v = pred.at(0, c, y, x);
                out.at(y, x, c) =
                    static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
            }
        }
    return out;
}

std::vector<TrainItem> single(const RasterImage& image, const BinaryMask& mask,
                              double edge_sigma) {
    std::vector<TrainItem> batch;
    batch.push_back(make_item(image, mask, edge_sigma));
    return batch;
}

} // namespace

void validate(const InpaintConfig& config) {
    if (config.resolution < 8 || config.resolution % 2 != 0)
        fail(ErrorCategory::config, "inpainting resolution must be even and at least 8");
    if (config.iterations < 0) fail(ErrorCategory::config, "inpainting iterations must be >= 0");
    if (config.batch_size <= 0) fail(ErrorCategory::config, "inpainting batch_size must be positive");
    if (config.learning_rate <= 0.0)
        fail(ErrorCategory::config, "inpainting learning_rate must be positive");
    if (config.eval_every < 0) fail(ErrorCategory::config, "inpainting eval_every must be >= 0");
    if (config.edge_sigma <= 0.0)
        fail(ErrorCategory::config, "inpainting edge_sigma must be positive");
    const LossWeights& w = config.loss_weights;
    for (double v : {w.l1, w.adversarial, w.perceptual, w.style, w.feature_matching})
        if (v < 0.0 || !std::isfinite(v))
            fail(ErrorCategory::config, "inpainting loss weights must be non-negative");
    if (w.l1 + w.adversarial + w.perceptual + w.style + w.feature_matching <= 0.0)
        fail(ErrorCategory::config, "at least one inpainting loss weight must be positive");
}

std::string config_hash(const InpaintConfig& config) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "inpaint|" << config.resolution << '|' << config.iterations << '|'
       << config.batch_size << '|' << config.learning_rate << '|' << config.eval_every << '|'
       << config.seed << '|' << config.edge_sigma << '|' << config.loss_weights.l1 << '|'
       << config.loss_weights.adversarial << '|' << config.loss_weights.perceptual << '|'
       << config.loss_weights.style << '|' << config.loss_weights.feature_matching;
    return hex64(fnv1a64(ss.str()));
}

void InpaintEvalReport::append(const InpaintEvalRow& row) {
    if (!rows.empty() && row.iteration <= rows.back().iteration)
        fail(ErrorCategory::invalid_argument,
             "evaluation rows must have strictly increasing iterations; got " +
                 std::to_string(row.iteration) + " after " + std::to_string(rows.back().iteration));
    rows.push_back(row);
}

InpaintCheckpoint init_inpaint_checkpoint(const InpaintConfig& config) {
    validate(config);
    InpaintModel model(config);
    return snapshot(model, config, 0, InpaintPhase::pretrain);
}

InpaintCheckpoint pretrain(const DatasetManifest& unlabeled,
                           const std::vector<BinaryMask>& mask_pool,
                           const InpaintConfig& config) {
    validate(config);
    if (unlabeled.empty())
        fail(ErrorCategory::insufficient_data, "pretraining needs a non-empty image manifest");
    if (mask_pool.empty())
        fail(ErrorCategory::insufficient_data, "pretraining needs a non-empty mask pool");
    InpaintModel model(config);
    return train_loop(model, unlabeled, &mask_pool, config, InpaintPhase::pretrain, 0);
}

InpaintCheckpoint finetune(const InpaintCheckpoint& ckpt, const DatasetManifest& polyp_data,
                           const InpaintConfig& config) {
    validate(config);
    if (config.resolution != ckpt.config.resolution)
        fail(ErrorCategory::config, "fine-tune resolution differs from the checkpoint's");
    if (polyp_data.empty())
        fail(ErrorCategory::insufficient_data, "fine-tuning needs a non-empty manifest");
    for (const auto& rec : polyp_data.records)
        if (!rec.has_mask())
            fail(ErrorCategory::missing_annotation,
                 "fine-tuning requires a polyp mask for every record; missing for " +
                     rec.image_path);
    InpaintModel model = build_model(ckpt);
    return train_loop(model, polyp_data, nullptr, config, InpaintPhase::finetune,
                      ckpt.iteration);
}

RasterImage inpaint_polyp(const InpaintCheckpoint& ckpt, const RasterImage& clean_image,
                          const EdgeMap& merged_edges, const BinaryMask& mask) {
    clean_image.validate();
    merged_edges.validate();
    mask.validate();
    const int r = ckpt.config.resolution;
    if (clean_image.width != r || clean_image.height != r || merged_edges.width != r ||
        merged_edges.height != r || mask.width != r || mask.height != r)
        fail(ErrorCategory::shape,
             "inpainting inputs must match the checkpoint resolution " + std::to_string(r));

    InpaintModel model = build_model(ckpt);
    std::vector<TrainItem> batch(1);
    batch[0].image = clean_image;
    batch[0].mask = mask;
    batch[0].edges = merged_edges;

    const Tensor img = rgb_tensor(batch);
    const Tensor mask_t = mask_tensor(batch);
    const Tensor edges_t = edge_tensor(batch);
    const Tensor pred = model.g_b.forward(concat3(hole(img, mask_t), edges_t, mask_t));
    return composite_image(clean_image, pred, mask);
}

RasterImage inpaint_two_stage(const InpaintCheckpoint& ckpt, const RasterImage& image,
                              const BinaryMask& mask) {
    image.validate();
    mask.validate();
    const int r = ckpt.config.resolution;
    if (image.width != r || image.height != r || mask.width != r || mask.height != r)
        fail(ErrorCategory::shape,
             "inpainting inputs must match the checkpoint resolution " + std::to_string(r));

    InpaintModel model = build_model(ckpt);
    const std::vector<TrainItem> batch = single(image, mask, ckpt.config.edge_sigma);
    const Tensor img = rgb_tensor(batch);
    const Tensor gray = gray_tensor(batch);
    const Tensor mask_t = mask_tensor(batch);
    const Tensor edges = edge_tensor(batch);

    const Tensor pred_e =
        model.g_a.forward(concat3(hole(edges, mask_t), hole(gray, mask_t), mask_t));
    const Tensor comp_e = composite(pred_e, edges, mask_t);
    const Tensor pred = model.g_b.forward(concat3(hole(img, mask_t), comp_e, mask_t));
    return composite_image(image, pred, mask);
}

InpaintEvalRow compare_image_sets(const std::vector<RasterImage>& generated,
                                  const std::vector<RasterImage>& reference,
                                  long long iteration) {
    if (generated.size() != reference.size())
        fail(ErrorCategory::shape, "generated and reference set sizes differ");
    if (generated.size() < 2)
        fail(ErrorCategory::invalid_argument,
             "image-set comparison needs at least 2 pairs (FID fits a Gaussian per set)");

    InpaintEvalRow row;
    row.iteration = iteration;
    for (size_t i = 0; i < generated.size(); ++i) {
        row.ssim += ssim(generated[i], reference[i]);
        row.psnr += psnr(generated[i], reference[i]);
    }
    row.ssim /= static_cast<double>(generated.size());
    row.psnr /= static_cast<double>(generated.size());

    const FeatureExtractor extractor;
    row.fid = fid(extract_features(generated, extractor), extract_features(reference, extractor));
    return row;
}

InpaintEvalRow evaluate_checkpoint(const InpaintCheckpoint& ckpt, const DatasetManifest& val) {
    if (val.empty())
        fail(ErrorCategory::invalid_argument, "checkpoint evaluation needs a non-empty val set");
    for (const auto& rec : val.records)
        if (!rec.has_mask())
            fail(ErrorCategory::missing_annotation,
                 "checkpoint evaluation requires masks; missing for " + rec.image_path);

    const int r = ckpt.config.resolution;
    std::vector<RasterImage> reference, generated;
    reference.reserve(val.size());
    generated.reserve(val.size());
    for (const auto& rec : val.records) {
        RasterImage image = load_image(rec.image_path, r);
        const BinaryMask mask = load_mask(rec.mask_path, r);
        generated.push_back(inpaint_two_stage(ckpt, image, mask));
        reference.push_back(std::move(image));
    }
    return compare_image_sets(generated, reference, ckpt.iteration);
}

void save_inpaint_checkpoint(const std::filesystem::path& path, const InpaintCheckpoint& ckpt) {
    std::vector<float> blob = ckpt.edge_stage_weights;
    blob.insert(blob.end(), ckpt.inpaint_stage_weights.begin(), ckpt.inpaint_stage_weights.end());
    write_blob(path, blob);

    Metadata meta;
    meta["kind"] = "inpaint";
    meta["iteration"] = std::to_string(ckpt.iteration);
    meta["phase"] = ckpt.phase == InpaintPhase::pretrain ? "pretrain" : "finetune";
    meta["config_hash"] = ckpt.hash;
    meta["edge_count"] = std::to_string(ckpt.edge_stage_weights.size());
    meta["resolution"] = std::to_string(ckpt.config.resolution);
    meta["iterations"] = std::to_string(ckpt.config.iterations);
    meta["batch_size"] = std::to_string(ckpt.config.batch_size);
    meta["eval_every"] = std::to_string(ckpt.config.eval_every);
    meta["seed"] = std::to_string(ckpt.config.seed);
    std::ostringstream nums;
    nums.precision(17);
    nums << ckpt.config.learning_rate;
    meta["learning_rate"] = nums.str();
    nums.str("");
    nums << ckpt.config.edge_sigma;
    meta["edge_sigma"] = nums.str();
    const LossWeights& w = ckpt.config.loss_weights;
    const std::pair<const char*, double> weights[] = {{"w_l1", w.l1},
                                                      {"w_adversarial", w.adversarial},
                                                      {"w_perceptual", w.perceptual},
                                                      {"w_style", w.style},
                                                      {"w_feature_matching", w.feature_matching}};
    for (const auto& [key, value] : weights) {
        nums.str("");
        nums << value;
        meta[key] = nums.str();
    }
    write_metadata(path.string() + ".meta", meta);
}

InpaintCheckpoint load_inpaint_checkpoint(const std::filesystem::path& path) {
    const std::filesystem::path meta_path = path.string() + ".meta";
    const Metadata meta = read_metadata(meta_path);
    if (meta_get(meta, "kind", meta_path) != "inpaint")
        fail(ErrorCategory::io, "not an inpainting checkpoint: " + path.string());

    InpaintCheckpoint ckpt;
    ckpt.config.resolution = std::stoi(meta_get(meta, "resolution", meta_path));
    ckpt.config.iterations = std::stoi(meta_get(meta, "iterations", meta_path));
    ckpt.config.batch_size = std::stoi(meta_get(meta, "batch_size", meta_path));
    ckpt.config.eval_every = std::stoi(meta_get(meta, "eval_every", meta_path));
    ckpt.config.seed = std::stoull(meta_get(meta, "seed", meta_path));
    ckpt.config.learning_rate = std::stod(meta_get(meta, "learning_rate", meta_path));
    ckpt.config.edge_sigma = std::stod(meta_get(meta, "edge_sigma", meta_path));
    ckpt.config.loss_weights.l1 = std::stod(meta_get(meta, "w_l1", meta_path));
    ckpt.config.loss_weights.adversarial = std::stod(meta_get(meta, "w_adversarial", meta_path));
    ckpt.config.loss_weights.perceptual = std::stod(meta_get(meta, "w_perceptual", meta_path));
    ckpt.config.loss_weights.style = std::stod(meta_get(meta, "w_style", meta_path));
    ckpt.config.loss_weights.feature_matching =
        std::stod(meta_get(meta, "w_feature_matching", meta_path));
    ckpt.iteration = std::stoll(meta_get(meta, "iteration", meta_path));
    const std::string phase = meta_get(meta, "phase", meta_path);
    if (phase == "pretrain")
        ckpt.phase = InpaintPhase::pretrain;
    else if (phase == "finetune")
        ckpt.phase = InpaintPhase::finetune;
    else
        fail(ErrorCategory::io, "bad phase '" + phase + "' in " + meta_path.string());
    ckpt.hash = meta_get(meta, "config_hash", meta_path);

    const std::vector<float> blob = read_blob(path);
    const size_t edge_count = std::stoull(meta_get(meta, "edge_count", meta_path));
    if (edge_count > blob.size())
        fail(ErrorCategory::io, "checkpoint blob shorter than edge-stage weights: " + path.string());
    ckpt.edge_stage_weights.assign(blob.begin(),
                                   blob.begin() + static_cast<std::ptrdiff_t>(edge_count));
    ckpt.inpaint_stage_weights.assign(blob.begin() + static_cast<std::ptrdiff_t>(edge_count),
                                      blob.end());
    return ckpt;
}

void save_eval_report(const std::filesystem::path& path, const InpaintEvalReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        rows.push_back({{"iteration", row.iteration},
                        {"ssim", row.ssim},
                        {"psnr", row.psnr},
                        {"fid", row.fid}});
    }
    std::ofstream out(path);
    if (!out) fail(ErrorCategory::io, "cannot write evaluation report: " + path.string());
    out << rows.dump(2) << '\n';
    if (!out) fail(ErrorCategory::io, "failed writing evaluation report: " + path.string());
}

InpaintEvalReport load_eval_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot read evaluation report: " + path.string());
    nlohmann::json rows;
    try {
        in >> rows;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCategory::io, "malformed evaluation report " + path.string() + ": " + e.what());
    }
    InpaintEvalReport report;
    for (const auto& row : rows) {
        report.append({row.at("iteration").get<long long>(), row.at("ssim").get<double>(),
                       row.at("psnr").get<double>(), row.at("fid").get<double>()});
    }
    return report;
}

} // namespace polyp
