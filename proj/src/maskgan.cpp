#include "polypconnect/maskgan.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "polypconnect/nn/losses.hpp"
#include "polypconnect/nn/optim.hpp"
#include "polypconnect/rng.hpp"
#include "polypconnect/serialize.hpp"

namespace polyp {

namespace {

using nn::Stack;
using nn::Tensor;

constexpr int kLatent = 64;
constexpr double kGpEps = 0.05;     // finite-difference step for the penalty
constexpr double kGpWeight = 1.0;

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int stage_channels(int resolution) {
    const int c = 256 / resolution;
    return std::max(8, std::min(32, c));
}

Tensor up2(const Tensor& x) {
    Tensor out(x.n, x.c, x.h * 2, x.w * 2);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx)
                    out.at(n, c, y, xx) = x.at(n, c, y / 2, xx / 2);
    return out;
}

Tensor up2_backward(const Tensor& g) {
    Tensor out(g.n, g.c, g.h / 2, g.w / 2);
    for (int n = 0; n < g.n; ++n)
        for (int c = 0; c < g.c; ++c)
            for (int y = 0; y < g.h; ++y)
                for (int xx = 0; xx < g.w; ++xx)
                    out.at(n, c, y / 2, xx / 2) += g.at(n, c, y, xx);
    return out;
}

Tensor down2(const Tensor& x) {
    Tensor out(x.n, x.c, x.h / 2, x.w / 2);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx)
                    out.at(n, c, y, xx) = 0.25f * (x.at(n, c, 2 * y, 2 * xx) +
                                                   x.at(n, c, 2 * y, 2 * xx + 1) +
                                                   x.at(n, c, 2 * y + 1, 2 * xx) +
                                                   x.at(n, c, 2 * y + 1, 2 * xx + 1));
    return out;
}

Tensor down2_backward(const Tensor& g) {
    Tensor out(g.n, g.c, g.h * 2, g.w * 2);
    for (int n = 0; n < g.n; ++n)
        for (int c = 0; c < g.c; ++c)
            for (int y = 0; y < g.h; ++y)
                for (int xx = 0; xx < g.w; ++xx) {
                    const float v = 0.25f * g.at(n, c, y, xx);
                    out.at(n, c, 2 * y, 2 * xx) = v;
                    out.at(n, c, 2 * y, 2 * xx + 1) = v;
                    out.at(n, c, 2 * y + 1, 2 * xx) = v;
                    out.at(n, c, 2 * y + 1, 2 * xx + 1) = v;
                }
    return out;
}

Tensor reshape(const Tensor& t, int n, int c, int h, int w) {
    if (static_cast<size_t>(n) * c * h * w != t.numel())
        fail(ErrorCategory::shape, "reshape element count mismatch");
    Tensor out(n, c, h, w);
    out.data = t.data;
    return out;
}

// Progressive generator/discriminator pair. Every stage's layers exist from
// construction so checkpoint blobs have one fixed layout per config.
class MaskGan {
public:
    explicit MaskGan(const MaskGanConfig& cfg)
        : cfg_(cfg), stages_(stage_count(cfg)) {
        Rng rng(derive_seed(cfg.seed, "maskgan-init"));
        const int s0 = cfg.start_resolution;
        const int c0 = stage_channels(s0);

        g_base_ = std::make_unique<Stack>();
        g_base_->emplace<nn::Linear>(kLatent, c0 * s0 * s0, rng);
        g_base_->emplace<nn::LeakyReLU>();

        for (int i = 0; i < stages_; ++i) {
            const int r = s0 << i;
            const int ch = stage_channels(r);
            auto block = std::make_unique<Stack>();
            if (i == 0) {
                block->emplace<nn::Conv2d>(c0, ch, 3, 1, 1, rng);
                block->emplace<nn::LeakyReLU>();
            } else {
                const int prev = stage_channels(r / 2);
                block->emplace<nn::UpsampleNearest2>();
                block->emplace<nn::Conv2d>(prev, ch, 3, 1, 1, rng);
                block->emplace<nn::LeakyReLU>();
                block->emplace<nn::Conv2d>(ch, ch, 3, 1, 1, rng);
                block->emplace<nn::LeakyReLU>();
            }
            g_blocks_.push_back(std::move(block));

            auto head = std::make_unique<Stack>();
            head->emplace<nn::Conv2d>(ch, 1, 1, 1, 0, rng);
            g_heads_.push_back(std::move(head));
        }

        for (int i = 0; i < stages_; ++i) {
            const int r = s0 << i;
            const int ch = stage_channels(r);
            auto from = std::make_unique<Stack>();
            from->emplace<nn::Conv2d>(1, ch, 1, 1, 0, rng);
            from->emplace<nn::LeakyReLU>();
            d_from_.push_back(std::move(from));

            auto block = std::make_unique<Stack>();
            if (i == 0) {
                block->emplace<nn::Conv2d>(ch, ch, 3, 1, 1, rng);
                block->emplace<nn::LeakyReLU>();
            } else {
                const int lower = stage_channels(r / 2);
                block->emplace<nn::Conv2d>(ch, ch, 3, 1, 1, rng);
                block->emplace<nn::LeakyReLU>();
                block->emplace<nn::Conv2d>(ch, lower, 3, 1, 1, rng);
                block->emplace<nn::LeakyReLU>();
                block->emplace<nn::AvgPool2>();
            }
            d_blocks_.push_back(std::move(block));
        }
        d_head_ = std::make_unique<Stack>();
        d_head_->emplace<nn::Linear>(c0 * s0 * s0, 1, rng);
    }

    static int stage_count(const MaskGanConfig& cfg) {
        int n = 1;
        for (int r = cfg.start_resolution; r < cfg.target_resolution; r *= 2) ++n;
        return n;
    }

    std::vector<nn::Param*> g_params() {
        std::vector<nn::Param*> out = g_base_->params();
        for (auto& b : g_blocks_)
            for (auto* p : b->params()) out.push_back(p);
        for (auto& h : g_heads_)
            for (auto* p : h->params()) out.push_back(p);
        return out;
    }

    std::vector<nn::Param*> d_params() {
        std::vector<nn::Param*> out;
        for (auto& f : d_from_)
            for (auto* p : f->params()) out.push_back(p);
        for (auto& b : d_blocks_)
            for (auto* p : b->params()) out.push_back(p);
        for (auto* p : d_head_->params()) out.push_back(p);
        return out;
    }

    // Generator forward to stage `s` (0-based). During fade-in the new
    // stage's pre-sigmoid output is blended with the upsampled previous head.
    Tensor g_forward(const Tensor& z, int s, double alpha) {
        g_stage_ = s;
        g_alpha_ = alpha;
        const int s0 = cfg_.start_resolution;
        const int c0 = stage_channels(s0);
        Tensor x = g_base_->forward(z);
        x = reshape(x, z.n, c0, s0, s0);
        for (int i = 0; i <= s; ++i) x = g_blocks_[static_cast<size_t>(i)]->forward(x);
        Tensor logits = g_heads_[static_cast<size_t>(s)]->forward(x);
        if (s > 0 && alpha < 1.0) {
            const Stack& prev = *g_blocks_[static_cast<size_t>(s - 1)];
            const Tensor low = g_heads_[static_cast<size_t>(s - 1)]->forward(prev.act(prev.size() - 1));
            const Tensor low_up = up2(low);
            for (size_t i = 0; i < logits.data.size(); ++i)
                logits.data[i] = static_cast<float>(alpha * logits.data[i] +
                                                    (1.0 - alpha) * low_up.data[i]);
        }
        g_out_ = logits;
        for (auto& v : g_out_.data) v = 1.0f / (1.0f + std::exp(-v));
        return g_out_;
    }

    void g_backward(const Tensor& dout) {
        Tensor dlogits = dout;
        for (size_t i = 0; i < dlogits.data.size(); ++i) {
            const float y = g_out_.data[i];
            dlogits.data[i] *= y * (1.0f - y);
        }
        const int s = g_stage_;
        Tensor g;
        if (s > 0 && g_alpha_ < 1.0) {
            Tensor d_hi = dlogits;
            for (auto& v : d_hi.data) v = static_cast<float>(v * g_alpha_);
            Tensor d_low = up2_backward(dlogits);
            for (auto& v : d_low.data) v = static_cast<float>(v * (1.0 - g_alpha_));
            g = g_heads_[static_cast<size_t>(s)]->backward(d_hi, true);
            g = g_blocks_[static_cast<size_t>(s)]->backward(g, true);
            const Tensor g_low = g_heads_[static_cast<size_t>(s - 1)]->backward(d_low, true);
            for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += g_low.data[i];
            for (int i = s - 1; i >= 0; --i)
                g = g_blocks_[static_cast<size_t>(i)]->backward(g, true);
        } else {
            g = g_heads_[static_cast<size_t>(s)]->backward(dlogits, true);
            for (int i = s; i >= 0; --i)
                g = g_blocks_[static_cast<size_t>(i)]->backward(g, true);
        }
        const int s0 = cfg_.start_resolution;
        g = reshape(g, g.n, stage_channels(s0) * s0 * s0, 1, 1);
        g_base_->backward(g, true);
    }

    // Discriminator forward at stage `s`. During fade-in the input is mixed
    // with its own low-pass so new high-resolution detail arrives gradually.
    Tensor d_forward(const Tensor& x, int s, double alpha) {
        d_stage_ = s;
        d_alpha_ = alpha;
        Tensor xin = x;
        if (s > 0 && alpha < 1.0) {
            const Tensor low = up2(down2(x));
            for (size_t i = 0; i < xin.data.size(); ++i)
                xin.data[i] = static_cast<float>(alpha * xin.data[i] +
                                                 (1.0 - alpha) * low.data[i]);
        }
        Tensor h = d_from_[static_cast<size_t>(s)]->forward(xin);
        for (int i = s; i >= 0; --i) h = d_blocks_[static_cast<size_t>(i)]->forward(h);
        const int s0 = cfg_.start_resolution;
        h = reshape(h, h.n, stage_channels(s0) * s0 * s0, 1, 1);
        return d_head_->forward(h);
    }

    Tensor d_backward(const Tensor& dout, bool accum) {
        Tensor g = d_head_->backward(dout, accum);
        const int s0 = cfg_.start_resolution;
        g = reshape(g, g.n, stage_channels(s0), s0, s0);
        for (int i = 0; i <= d_stage_; ++i) g = d_blocks_[static_cast<size_t>(i)]->backward(g, accum);
        g = d_from_[static_cast<size_t>(d_stage_)]->backward(g, accum);
        if (d_stage_ > 0 && d_alpha_ < 1.0) {
            Tensor g_hi = g;
            for (auto& v : g_hi.data) v = static_cast<float>(v * d_alpha_);
            Tensor g_low = g;
            for (auto& v : g_low.data) v = static_cast<float>(v * (1.0 - d_alpha_));
            const Tensor g_lp = down2_backward(up2_backward(g_low));
            for (size_t i = 0; i < g_hi.data.size(); ++i) g_hi.data[i] += g_lp.data[i];
            return g_hi;
        }
        return g;
    }

    const MaskGanConfig& config() const { return cfg_; }
    int stages() const { return stages_; }

private:
    MaskGanConfig cfg_;
    int stages_;
    std::unique_ptr<Stack> g_base_;
    std::vector<std::unique_ptr<Stack>> g_blocks_;
    std::vector<std::unique_ptr<Stack>> g_heads_;
    std::vector<std::unique_ptr<Stack>> d_from_;
    std::vector<std::unique_ptr<Stack>> d_blocks_;
    std::unique_ptr<Stack> d_head_;
    Tensor g_out_;
    int g_stage_ = 0, d_stage_ = 0;
    double g_alpha_ = 1.0, d_alpha_ = 1.0;
};

Tensor masks_to_tensor(const std::vector<BinaryMask>& masks, const std::vector<int>& picks,
                       int resolution) {
    Tensor out(static_cast<int>(picks.size()), 1, resolution, resolution);
    for (size_t i = 0; i < picks.size(); ++i) {
        const BinaryMask resized =
            resize_nearest(masks[static_cast<size_t>(picks[i])], resolution, resolution);
        for (int y = 0; y < resolution; ++y)
            for (int x = 0; x < resolution; ++x)
                out.at(static_cast<int>(i), 0, y, x) = static_cast<float>(resized.at(y, x));
    }
    return out;
}

Tensor latent_batch(int n, Rng& rng) {
    Tensor z(n, kLatent, 1, 1);
    for (auto& v : z.data) v = static_cast<float>(rng.normal());
    return z;
}

MaskGanCheckpoint snapshot(MaskGan& model, int stage, long long iteration) {
    MaskGanCheckpoint ckpt;
    ckpt.config = model.config();
    ckpt.generator_weights = pack_params(model.g_params());
    ckpt.discriminator_weights = pack_params(model.d_params());
    ckpt.stage = stage;
    ckpt.iteration = iteration;
    ckpt.hash = config_hash(model.config());
    return ckpt;
}

} // namespace

void validate(const MaskGanConfig& config) {
    if (!power_of_two(config.start_resolution) || !power_of_two(config.target_resolution))
        fail(ErrorCategory::config, "mask gan resolutions must be powers of 2");
    if (config.start_resolution < 4)
        fail(ErrorCategory::config, "mask gan start_resolution must be at least 4");
    if (config.start_resolution > config.target_resolution)
        fail(ErrorCategory::config, "mask gan start_resolution exceeds target_resolution");
    if (config.iterations_per_stage <= 0)
        fail(ErrorCategory::config, "mask gan iterations_per_stage must be positive");
    if (config.batch_size <= 0) fail(ErrorCategory::config, "mask gan batch_size must be positive");
    if (config.learning_rate <= 0.0)
        fail(ErrorCategory::config, "mask gan learning_rate must be positive");
}

std::string config_hash(const MaskGanConfig& config) {
    std::ostringstream ss;
    ss << "maskgan|" << config.start_resolution << '|' << config.target_resolution << '|'
       << config.iterations_per_stage << '|' << config.batch_size << '|'
       << config.learning_rate << '|' << config.seed;
    return hex64(fnv1a64(ss.str()));
}

MaskGanCheckpoint init_mask_generator(const MaskGanConfig& config) {
    validate(config);
    MaskGan model(config);
    return snapshot(model, config.target_resolution, 0);
}

MaskGanCheckpoint train_mask_generator(const std::vector<BinaryMask>& masks,
                                       const MaskGanConfig& config) {
    validate(config);
    if (masks.size() < 2)
        fail(ErrorCategory::insufficient_data,
             "mask gan training needs at least 2 masks, got " + std::to_string(masks.size()));
    for (const auto& m : masks) m.validate();

    MaskGan model(config);
    nn::Adam g_opt(model.g_params(), config.learning_rate, 0.5, 0.999);
    nn::Adam d_opt(model.d_params(), config.learning_rate, 0.5, 0.999);
    Rng data_rng(derive_seed(config.seed, "maskgan-data"));
    Rng z_rng(derive_seed(config.seed, "maskgan-latent"));
    Rng gp_rng(derive_seed(config.seed, "maskgan-gp"));

    long long iteration = 0;
    for (int s = 0; s < model.stages(); ++s) {
        const int resolution = config.start_resolution << s;
        const int fade = s == 0 ? 0 : config.iterations_per_stage / 2;
        for (int it = 0; it < config.iterations_per_stage; ++it, ++iteration) {
            const double alpha =
                fade > 0 ? std::min(1.0, static_cast<double>(it + 1) / fade) : 1.0;

            std::vector<int> picks(static_cast<size_t>(config.batch_size));
            for (auto& p : picks) p = data_rng.uniform_int(static_cast<int>(masks.size()));
            const Tensor real = masks_to_tensor(masks, picks, resolution);
            const Tensor z = latent_batch(config.batch_size, z_rng);

            // --- discriminator step ---
            const Tensor fake = model.g_forward(z, s, alpha);

            // finite-difference gradient-norm penalty on a perturbed real batch
            Tensor perturbed = real;
            const double inv_norm_dim = 1.0 / std::sqrt(static_cast<double>(
                                             perturbed.numel() / perturbed.n));
            for (auto& v : perturbed.data)
                v += static_cast<float>(kGpEps * gp_rng.normal() * inv_norm_dim);
            const Tensor y_pert = model.d_forward(perturbed, s, alpha);

            const Tensor y_real = model.d_forward(real, s, alpha);
            const double loss_real = nn::adv_loss(y_real, true);
            double gp = 0.0;
            Tensor g_real = nn::adv_grad(y_real, true);
            Tensor g_pert = y_pert.like_zeros();
            for (int b = 0; b < y_real.n; ++b) {
                const double delta = y_pert.data[static_cast<size_t>(b)] -
                                     y_real.data[static_cast<size_t>(b)];
                const double slope = delta / kGpEps;
                gp += slope * slope;
                const double coef = kGpWeight * 2.0 * slope / (kGpEps * y_real.n);
                g_pert.data[static_cast<size_t>(b)] = static_cast<float>(coef);
                g_real.data[static_cast<size_t>(b)] -= static_cast<float>(coef);
            }
            gp = kGpWeight * gp / y_real.n;
            model.d_backward(g_real, true);  // through the latest (real) forward

            model.d_forward(perturbed, s, alpha);
            model.d_backward(g_pert, true);

            const Tensor y_fake = model.d_forward(fake, s, alpha);
            const double loss_fake = nn::adv_loss(y_fake, false);
            model.d_backward(nn::adv_grad(y_fake, false), true);

            const double d_loss = loss_real + loss_fake + gp;
            d_opt.step();
            d_opt.zero_grad();

            // --- generator step ---
            const Tensor fake2 = model.g_forward(z, s, alpha);
            const Tensor y_g = model.d_forward(fake2, s, alpha);
            const double g_loss = nn::adv_loss(y_g, true);
            const Tensor dfake = model.d_backward(nn::adv_grad(y_g, true), false);
            model.g_backward(dfake);
            g_opt.step();
            g_opt.zero_grad();

            if (!std::isfinite(d_loss) || !std::isfinite(g_loss))
                fail(ErrorCategory::training_diverged,
                     "mask gan loss non-finite at stage " + std::to_string(resolution) +
                         ", iteration " + std::to_string(iteration));
        }
    }
    return snapshot(model, config.target_resolution, iteration);
}

std::vector<BinaryMask> sample_masks(const MaskGanCheckpoint& ckpt, int n, std::uint64_t seed) {
    if (n <= 0) fail(ErrorCategory::invalid_argument, "sample_masks needs n > 0");
    validate(ckpt.config);
    if (!power_of_two(ckpt.stage) || ckpt.stage < ckpt.config.start_resolution ||
        ckpt.stage > ckpt.config.target_resolution)
        fail(ErrorCategory::io, "checkpoint stage outside the configured schedule");

    MaskGan model(ckpt.config);
    unpack_params(model.g_params(), ckpt.generator_weights);
    unpack_params(model.d_params(), ckpt.discriminator_weights);

    int stage_idx = 0;
    for (int r = ckpt.config.start_resolution; r < ckpt.stage; r *= 2) ++stage_idx;

    Rng rng(derive_seed(seed, "mask-sample"));
    std::vector<BinaryMask> out;
    out.reserve(static_cast<size_t>(n));
    constexpr int kChunk = 16;
    for (int done = 0; done < n; done += kChunk) {
        const int batch = std::min(kChunk, n - done);
        const Tensor z = latent_batch(batch, rng);
        const Tensor field = model.g_forward(z, stage_idx, 1.0);
        for (int b = 0; b < batch; ++b) {
            BinaryMask m(ckpt.stage, ckpt.stage);
            for (int y = 0; y < ckpt.stage; ++y)
                for (int x = 0; x < ckpt.stage; ++x)
                    m.at(y, x) = field.at(b, 0, y, x) >= 0.5f ? 1 : 0;
            out.push_back(std::move(m));
        }
    }
    return out;
}

std::vector<BinaryMask> filter_masks(const std::vector<BinaryMask>& masks, double min_fill,
                                     double max_fill) {
    if (min_fill >= max_fill)
        fail(ErrorCategory::invalid_argument, "filter_masks requires min_fill < max_fill");
    if (min_fill < 0.0 || max_fill > 1.0)
        fail(ErrorCategory::invalid_argument, "filter_masks bounds must lie in [0,1]");
    std::vector<BinaryMask> out;
    for (const auto& m : masks) {
        const double fill = m.fill_ratio();
        if (fill >= min_fill && fill <= max_fill) out.push_back(m);
    }
    return out;
}

void save_mask_checkpoint(const std::filesystem::path& path, const MaskGanCheckpoint& ckpt) {
    std::vector<float> blob = ckpt.generator_weights;
    blob.insert(blob.end(), ckpt.discriminator_weights.begin(),
                ckpt.discriminator_weights.end());
    write_blob(path, blob);

    Metadata meta;
    meta["kind"] = "maskgan";
    meta["stage"] = std::to_string(ckpt.stage);
    meta["iteration"] = std::to_string(ckpt.iteration);
    meta["config_hash"] = ckpt.hash;
    meta["generator_count"] = std::to_string(ckpt.generator_weights.size());
    meta["start_resolution"] = std::to_string(ckpt.config.start_resolution);
    meta["target_resolution"] = std::to_string(ckpt.config.target_resolution);
    meta["iterations_per_stage"] = std::to_string(ckpt.config.iterations_per_stage);
    meta["batch_size"] = std::to_string(ckpt.config.batch_size);
    std::ostringstream lr;
    lr.precision(17);
    lr << ckpt.config.learning_rate;
    meta["learning_rate"] = lr.str();
    meta["seed"] = std::to_string(ckpt.config.seed);
    write_metadata(path.string() + ".meta", meta);
}

MaskGanCheckpoint load_mask_checkpoint(const std::filesystem::path& path) {
    const std::filesystem::path meta_path = path.string() + ".meta";
    const Metadata meta = read_metadata(meta_path);
    if (meta_get(meta, "kind", meta_path) != "maskgan")
        fail(ErrorCategory::io, "not a mask gan checkpoint: " + path.string());

    MaskGanCheckpoint ckpt;
    ckpt.config.start_resolution = std::stoi(meta_get(meta, "start_resolution", meta_path));
    ckpt.config.target_resolution = std::stoi(meta_get(meta, "target_resolution", meta_path));
    ckpt.config.iterations_per_stage =
        std::stoi(meta_get(meta, "iterations_per_stage", meta_path));
    ckpt.config.batch_size = std::stoi(meta_get(meta, "batch_size", meta_path));
    ckpt.config.learning_rate = std::stod(meta_get(meta, "learning_rate", meta_path));
    ckpt.config.seed = std::stoull(meta_get(meta, "seed", meta_path));
    ckpt.stage = std::stoi(meta_get(meta, "stage", meta_path));
    ckpt.iteration = std::stoll(meta_get(meta, "iteration", meta_path));
    ckpt.hash = meta_get(meta, "config_hash", meta_path);

    const std::vector<float> blob = read_blob(path);
    const size_t g_count = std::stoull(meta_get(meta, "generator_count", meta_path));
    if (g_count > blob.size())
        fail(ErrorCategory::io, "checkpoint blob shorter than generator weights: " + path.string());
    ckpt.generator_weights.assign(blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(g_count));
    ckpt.discriminator_weights.assign(blob.begin() + static_cast<std::ptrdiff_t>(g_count),
                                      blob.end());
    return ckpt;
}

} // namespace polyp
