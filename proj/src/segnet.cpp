#include "polypconnect/segnet.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "polypconnect/image_io.hpp"
#include "polypconnect/nn/layers.hpp"
#include "polypconnect/nn/losses.hpp"
#include "polypconnect/nn/optim.hpp"
#include "polypconnect/rng.hpp"
#include "polypconnect/serialize.hpp"

namespace polyp {

namespace {

using nn::Stack;
using nn::Tensor;

constexpr int kWidth = 16;

// U-shaped network with two pooling steps and skip connections carried
// around the container stacks by hand.
class UNet {
public:
    explicit UNet(std::uint64_t seed) {
        Rng rng(derive_seed(seed, "segnet-init"));
        enc1_.emplace<nn::Conv2d>(3, kWidth, 3, 1, 1, rng);
        enc1_.emplace<nn::InstanceNorm>(kWidth);
        enc1_.emplace<nn::LeakyReLU>();
        enc1_.emplace<nn::Conv2d>(kWidth, kWidth, 3, 1, 1, rng);
        enc1_.emplace<nn::InstanceNorm>(kWidth);
        enc1_.emplace<nn::LeakyReLU>();

        enc2_.emplace<nn::Conv2d>(kWidth, 2 * kWidth, 3, 1, 1, rng);
        enc2_.emplace<nn::InstanceNorm>(2 * kWidth);
        enc2_.emplace<nn::LeakyReLU>();

        bottleneck_.emplace<nn::Conv2d>(2 * kWidth, 4 * kWidth, 3, 1, 1, rng);
        bottleneck_.emplace<nn::InstanceNorm>(4 * kWidth);
        bottleneck_.emplace<nn::LeakyReLU>();
        bottleneck_.emplace<nn::Conv2d>(4 * kWidth, 2 * kWidth, 3, 1, 1, rng);
        bottleneck_.emplace<nn::InstanceNorm>(2 * kWidth);
        bottleneck_.emplace<nn::LeakyReLU>();

        dec2_.emplace<nn::Conv2d>(4 * kWidth, 2 * kWidth, 3, 1, 1, rng);
        dec2_.emplace<nn::InstanceNorm>(2 * kWidth);
        dec2_.emplace<nn::LeakyReLU>();

        dec1_.emplace<nn::Conv2d>(3 * kWidth, kWidth, 3, 1, 1, rng);
        dec1_.emplace<nn::InstanceNorm>(kWidth);
        dec1_.emplace<nn::LeakyReLU>();
        dec1_.emplace<nn::Conv2d>(kWidth, 1, 3, 1, 1, rng);
    }

    Tensor forward(const Tensor& x) {
        skip1_ = enc1_.forward(x);
        skip2_ = enc2_.forward(pool1_.forward(skip1_));
        const Tensor bottom = bottleneck_.forward(pool2_.forward(skip2_));
        const Tensor d2 = dec2_.forward(nn::concat_channels(up2_.forward(bottom), skip2_));
        return dec1_.forward(nn::concat_channels(up1_.forward(d2), skip1_));
    }

    void backward(const Tensor& grad_logits) {
        Tensor g_up1, g_skip1;
        nn::split_channels(dec1_.backward(grad_logits, true), 2 * kWidth, g_up1, g_skip1);
        Tensor g_up2, g_skip2;
        nn::split_channels(dec2_.backward(up1_.backward(g_up1, true), true), 2 * kWidth,
                           g_up2, g_skip2);
        Tensor g_s2 = pool2_.backward(
            bottleneck_.backward(up2_.backward(g_up2, true), true), true);
        for (size_t i = 0; i < g_s2.data.size(); ++i) g_s2.data[i] += g_skip2.data[i];
        Tensor g_s1 = pool1_.backward(enc2_.backward(g_s2, true), true);
        for (size_t i = 0; i < g_s1.data.size(); ++i) g_s1.data[i] += g_skip1.data[i];
        enc1_.backward(g_s1, true);
    }

    std::vector<nn::Param*> params() {
        std::vector<nn::Param*> out;
        for (Stack* s : {&enc1_, &enc2_, &bottleneck_, &dec2_, &dec1_})
            for (auto* p : s->params()) out.push_back(p);
        return out;
    }

private:
    Stack enc1_, enc2_, bottleneck_, dec2_, dec1_;
    nn::AvgPool2 pool1_, pool2_;
    nn::UpsampleNearest2 up1_, up2_;
    Tensor skip1_, skip2_;
};

Tensor images_to_tensor(const std::vector<RasterImage>& images) {
    const int h = images[0].height, w = images[0].width;
    Tensor t(static_cast<int>(images.size()), 3, h, w);
    for (size_t b = 0; b < images.size(); ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    t.at(static_cast<int>(b), c, y, x) =
                        static_cast<float>(images[b].at(y, x, c));
    return t;
}

Tensor masks_to_tensor(const std::vector<BinaryMask>& masks) {
    const int h = masks[0].height, w = masks[0].width;
    Tensor t(static_cast<int>(masks.size()), 1, h, w);
    for (size_t b = 0; b < masks.size(); ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                t.at(static_cast<int>(b), 0, y, x) = static_cast<float>(masks[b].at(y, x));
    return t;
}

UNet build_unet(const SegCheckpoint& ckpt) {
    UNet net(ckpt.config.seed);
    unpack_params(net.params(), ckpt.weights);
    return net;
}

SegCheckpoint snapshot(UNet& net, const SegConfig& cfg, int epoch) {
    SegCheckpoint ckpt;
    ckpt.config = cfg;
    ckpt.weights = pack_params(net.params());
    ckpt.epoch = epoch;
    ckpt.hash = config_hash(cfg);
    return ckpt;
}

void require_masks(const DatasetManifest& data, const char* what) {
    for (const auto& rec : data.records)
        if (!rec.has_mask())
            fail(ErrorCategory::missing_annotation,
                 std::string(what) + " requires a mask for every record; missing for " +
                     rec.image_path);
}

} // namespace

void validate(const SegConfig& config) {
    if (config.resolution < 8 || config.resolution % 4 != 0)
        fail(ErrorCategory::config,
             "segmentation resolution must be divisible by 4 and at least 8");
    if (config.epochs < 0) fail(ErrorCategory::config, "segmentation epochs must be >= 0");
    if (config.batch_size <= 0)
        fail(ErrorCategory::config, "segmentation batch_size must be positive");
    if (config.learning_rate <= 0.0)
        fail(ErrorCategory::config, "segmentation learning_rate must be positive");
    if (!(config.threshold > 0.0 && config.threshold < 1.0))
        fail(ErrorCategory::config, "segmentation threshold must be inside (0, 1)");
}

std::string config_hash(const SegConfig& config) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "segnet|" << config.resolution << '|' << config.epochs << '|' << config.batch_size
       << '|' << config.learning_rate << '|' << config.threshold << '|' << config.seed;
    return hex64(fnv1a64(ss.str()));
}

SegCheckpoint init_segmenter(const SegConfig& config) {
    validate(config);
    UNet net(config.seed);
    return snapshot(net, config, 0);
}

SegCheckpoint train_unet(const DatasetManifest& train, const SegConfig& config) {
    validate(config);
    if (train.empty())
        fail(ErrorCategory::insufficient_data, "segmentation training set is empty");
    require_masks(train, "segmentation training");

    UNet net(config.seed);
    nn::Adam opt(net.params(), config.learning_rate);

    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, "segnet-epoch-" + std::to_string(epoch)));
        shuffle_rng.shuffle(order);

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            std::vector<RasterImage> images;
            std::vector<BinaryMask> masks;
            for (size_t i = start; i < end; ++i) {
                const auto& rec = train.records[order[i]];
                images.push_back(load_image(rec.image_path, config.resolution));
                masks.push_back(load_mask(rec.mask_path, config.resolution));
            }
            const Tensor x = images_to_tensor(images);
            const Tensor target = masks_to_tensor(masks);

            const Tensor logits = net.forward(x);
            Tensor probs = logits;
            for (auto& v : probs.data) v = static_cast<float>(nn::sigmoid_d(v));

            Tensor g_bce, g_dice;
            const double bce = nn::bce_logits_with_grad(logits, target, g_bce);
            const double dice = nn::dice_loss_with_grad(probs, target, g_dice);
            if (!std::isfinite(bce) || !std::isfinite(dice))
                fail(ErrorCategory::training_diverged,
                     "segmentation loss non-finite at epoch " + std::to_string(epoch + 1));

            Tensor g_logits = g_bce;
            for (size_t i = 0; i < g_logits.data.size(); ++i) {
                const double p = probs.data[i];
                g_logits.data[i] += static_cast<float>(g_dice.data[i] * p * (1.0 - p));
            }
            net.backward(g_logits);
            opt.step();
            opt.zero_grad();
        }
    }
    return snapshot(net, config, config.epochs);
}

BinaryMask predict_mask(const SegCheckpoint& ckpt, const RasterImage& image,
                        double threshold) {
    image.validate();
    if (!(threshold > 0.0 && threshold < 1.0))
        fail(ErrorCategory::invalid_argument, "prediction threshold must be inside (0, 1)");
    const int r = ckpt.config.resolution;
    if (image.width != r || image.height != r)
        fail(ErrorCategory::shape,
             "segmentation input must match the checkpoint resolution " + std::to_string(r));

    UNet net = build_unet(ckpt);
    const Tensor logits = net.forward(images_to_tensor({image}));
    BinaryMask mask(r, r);
    for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x)
            mask.at(y, x) = nn::sigmoid_d(logits.at(0, 0, y, x)) >= threshold ? 1 : 0;
    return mask;
}

BinaryMask predict_mask(const SegCheckpoint& ckpt, const RasterImage& image) {
    return predict_mask(ckpt, image, ckpt.config.threshold);
}

SegMetrics evaluate_seg(const SegCheckpoint& ckpt, const DatasetManifest& val,
                        double threshold) {
    if (val.empty())
        fail(ErrorCategory::invalid_argument, "segmentation evaluation needs a non-empty set");
    require_masks(val, "segmentation evaluation");

    std::vector<BinaryMask> preds, gts;
    preds.reserve(val.size());
    gts.reserve(val.size());
    for (const auto& rec : val.records) {
        preds.push_back(
            predict_mask(ckpt, load_image(rec.image_path, ckpt.config.resolution), threshold));
        gts.push_back(load_mask(rec.mask_path, ckpt.config.resolution));
    }
    return iou_suite(preds, gts);
}

SegMetrics evaluate_seg(const SegCheckpoint& ckpt, const DatasetManifest& val) {
    return evaluate_seg(ckpt, val, ckpt.config.threshold);
}

DatasetManifest build_mixed_dataset(const DatasetManifest& real_train,
                                    const DatasetManifest& synth_pool, int n_synth,
                                    std::uint64_t seed) {
    if (n_synth < 0)
        fail(ErrorCategory::invalid_argument, "synthetic record count must be >= 0");
    for (const auto& rec : real_train.records)
        if (rec.origin != Origin::real || rec.split != Split::train)
            fail(ErrorCategory::invalid_argument,
                 "mixed dataset base must contain only real training records");
    if (n_synth > static_cast<int>(synth_pool.size()))
        fail(ErrorCategory::insufficient_data,
             "requested " + std::to_string(n_synth) + " synthetic records but the pool has " +
                 std::to_string(synth_pool.size()));
    require_masks(synth_pool, "mixed dataset construction");

    std::vector<size_t> order(synth_pool.size());
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(derive_seed(seed, "mix"));
    rng.shuffle(order);

    DatasetManifest out;
    out.seed = seed;
    out.records = real_train.records;
    for (int i = 0; i < n_synth; ++i) {
        DatasetRecord rec = synth_pool.records[order[static_cast<size_t>(i)]];
        rec.split = Split::train;
        out.records.push_back(std::move(rec));
    }
    return out;
}

void save_seg_checkpoint(const std::filesystem::path& path, const SegCheckpoint& ckpt) {
    write_blob(path, ckpt.weights);
    Metadata meta;
    meta["kind"] = "segnet";
    meta["epoch"] = std::to_string(ckpt.epoch);
    meta["config_hash"] = ckpt.hash;
    meta["resolution"] = std::to_string(ckpt.config.resolution);
    meta["epochs"] = std::to_string(ckpt.config.epochs);
    meta["batch_size"] = std::to_string(ckpt.config.batch_size);
    meta["seed"] = std::to_string(ckpt.config.seed);
    std::ostringstream nums;
    nums.precision(17);
    nums << ckpt.config.learning_rate;
    meta["learning_rate"] = nums.str();
    nums.str("");
    nums << ckpt.config.threshold;
    meta["threshold"] = nums.str();
    write_metadata(path.string() + ".meta", meta);
}

SegCheckpoint load_seg_checkpoint(const std::filesystem::path& path) {
    const std::filesystem::path meta_path = path.string() + ".meta";
    const Metadata meta = read_metadata(meta_path);
    if (meta_get(meta, "kind", meta_path) != "segnet")
        fail(ErrorCategory::io, "not a segmentation checkpoint: " + path.string());

    SegCheckpoint ckpt;
    ckpt.config.resolution = std::stoi(meta_get(meta, "resolution", meta_path));
    ckpt.config.epochs = std::stoi(meta_get(meta, "epochs", meta_path));
    ckpt.config.batch_size = std::stoi(meta_get(meta, "batch_size", meta_path));
    ckpt.config.learning_rate = std::stod(meta_get(meta, "learning_rate", meta_path));
    ckpt.config.threshold = std::stod(meta_get(meta, "threshold", meta_path));
    ckpt.config.seed = std::stoull(meta_get(meta, "seed", meta_path));
    ckpt.epoch = std::stoi(meta_get(meta, "epoch", meta_path));
    ckpt.hash = meta_get(meta, "config_hash", meta_path);
    ckpt.weights = read_blob(path);
    return ckpt;
}

} // namespace polyp
