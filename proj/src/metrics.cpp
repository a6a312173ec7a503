#include "polypconnect/metrics.hpp"

#include <cmath>

#include "polypconnect/rng.hpp"

namespace polyp {

namespace {

std::vector<double> luminance_plane(const RasterImage& img) {
    std::vector<double> out(static_cast<size_t>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out[static_cast<size_t>(y) * img.width + x] = luminance_at(img, y, x);
    return out;
}

void require_same_dims(const RasterImage& a, const RasterImage& b, const char* what) {
    a.validate();
    b.validate();
    if (a.width != b.width || a.height != b.height)
        fail(ErrorCategory::shape, std::string(what) + " operand dimensions differ");
}

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a) {
    Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    Eigen::VectorXd vals = es.eigenvalues();
    for (Eigen::Index i = 0; i < vals.size(); ++i)
        vals[i] = vals[i] > 0.0 ? std::sqrt(vals[i]) : 0.0;
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace

double ssim(const RasterImage& a, const RasterImage& b) {
    require_same_dims(a, b, "ssim");
    const int h = a.height, w = a.width;
    int win = 11;
    if (win > h || win > w) {
        win = std::min(h, w);
        if (win % 2 == 0) --win;
    }

    const double sigma = 1.5;
    std::vector<double> weight(static_cast<size_t>(win) * win);
    {
        const int r = win / 2;
        double sum = 0.0;
        for (int y = 0; y < win; ++y)
            for (int x = 0; x < win; ++x) {
                const double dy = y - r, dx = x - r;
                const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                weight[static_cast<size_t>(y) * win + x] = v;
                sum += v;
            }
        for (auto& v : weight) v /= sum;
    }

    const std::vector<double> la = luminance_plane(a);
    const std::vector<double> lb = luminance_plane(b);

    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;

    double total = 0.0;
    long long count = 0;
    for (int oy = 0; oy + win <= h; ++oy)
        for (int ox = 0; ox + win <= w; ++ox) {
            double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    const double wgt = weight[static_cast<size_t>(y) * win + x];
                    const double va = la[static_cast<size_t>(oy + y) * w + (ox + x)];
                    const double vb = lb[static_cast<size_t>(oy + y) * w + (ox + x)];
                    mx += wgt * va;
                    my += wgt * vb;
                    sxx += wgt * va * va;
                    syy += wgt * vb * vb;
                    sxy += wgt * va * vb;
                }
            const double vx = sxx - mx * mx;
            const double vy = syy - my * my;
            const double cov = sxy - mx * my;
            const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
            const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
            ++count;
        }
    return total / static_cast<double>(count);
}

double psnr(const RasterImage& a, const RasterImage& b) {
    require_same_dims(a, b, "psnr");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.data.size());
    if (mse == 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double fid(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b) {
    if (features_a.rows() < 2 || features_b.rows() < 2)
        fail(ErrorCategory::invalid_argument, "fid needs at least 2 samples per set");
    if (features_a.cols() != features_b.cols() || features_a.cols() < 1)
        fail(ErrorCategory::shape, "fid feature dimensions differ");
    if (!features_a.allFinite() || !features_b.allFinite())
        fail(ErrorCategory::numeric, "fid features contain non-finite values");

    const Eigen::VectorXd mu_a = features_a.colwise().mean();
    const Eigen::VectorXd mu_b = features_b.colwise().mean();
    const Eigen::MatrixXd ca =
        (features_a.rowwise() - mu_a.transpose()).transpose() *
        (features_a.rowwise() - mu_a.transpose()) / static_cast<double>(features_a.rows() - 1);
    const Eigen::MatrixXd cb =
        (features_b.rowwise() - mu_b.transpose()).transpose() *
        (features_b.rowwise() - mu_b.transpose()) / static_cast<double>(features_b.rows() - 1);

    const Eigen::MatrixXd sa = sqrtm_psd(ca);
    Eigen::MatrixXd prod = sa * cb * sa;
    prod = 0.5 * (prod + prod.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prod);
    double tr_sqrt = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double v = es.eigenvalues()[i];
        if (v > 0.0) tr_sqrt += std::sqrt(v);  // values below -1e-10 are numerically zero
    }
    const double mean_term = (mu_a - mu_b).squaredNorm();
    const double value = mean_term + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
    return std::max(0.0, value);
}

FeatureExtractor::FeatureExtractor(std::uint64_t seed) {
    // three stride-2 3x3 conv layers over a 32x32 resample: 3 -> 8 -> 16 -> 32
    const int chans[4] = {3, 8, 16, 32};
    Rng rng(derive_seed(seed, "feature-extractor"));
    for (int l = 0; l < 3; ++l) {
        nn::Tensor k(chans[l + 1], chans[l], 3, 3);
        const float scale = std::sqrt(2.0f / static_cast<float>(chans[l] * 9));
        for (auto& v : k.data) v = static_cast<float>(rng.normal()) * scale;
        weights_.push_back(std::move(k));
    }
    dim_ = chans[3];
}

namespace {

// Stride-2, pad-1 convolution followed by leaky ReLU; plain loops keep the
// embedder stateless so concurrent callers never race.
nn::Tensor conv_s2_lrelu(const nn::Tensor& x, const nn::Tensor& k) {
    const int oh = (x.h + 2 - 3) / 2 + 1;
    const int ow = (x.w + 2 - 3) / 2 + 1;
    nn::Tensor out(1, k.n, oh, ow);
    for (int oc = 0; oc < k.n; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int ic = 0; ic < x.c; ++ic)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int iy = oy * 2 - 1 + ky;
                            const int ix = ox * 2 - 1 + kx;
                            if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                            acc += static_cast<double>(x.at(0, ic, iy, ix)) *
                                   k.at(oc, ic, ky, kx);
                        }
                out.at(0, oc, oy, ox) =
                    static_cast<float>(acc > 0.0 ? acc : 0.2 * acc);
            }
    return out;
}

} // namespace

Eigen::VectorXd FeatureExtractor::embed(const RasterImage& image) const {
    image.validate();
    constexpr int res = 32;
    // area-style resample onto the fixed input grid
    nn::Tensor x(1, 3, res, res);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < res; ++y)
            for (int xx = 0; xx < res; ++xx) {
                const int y0 = y * image.height / res;
                const int y1 = std::max(y0 + 1, (y + 1) * image.height / res);
                const int x0 = xx * image.width / res;
                const int x1 = std::max(x0 + 1, (xx + 1) * image.width / res);
                double acc = 0.0;
                for (int iy = y0; iy < y1; ++iy)
                    for (int ix = x0; ix < x1; ++ix) acc += image.at(iy, ix, c);
                x.at(0, c, y, xx) = static_cast<float>(acc / ((y1 - y0) * (x1 - x0)));
            }

    for (const auto& k : weights_) x = conv_s2_lrelu(x, k);

    Eigen::VectorXd out(dim_);
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    for (int c = 0; c < dim_; ++c) {
        double acc = 0.0;
        for (size_t i = 0; i < plane; ++i) acc += x.data[static_cast<size_t>(c) * plane + i];
        out[c] = acc / static_cast<double>(plane);
    }
    return out;
}

Eigen::MatrixXd extract_features(const std::vector<RasterImage>& images,
                                 const FeatureExtractor& extractor) {
    if (images.empty())
        fail(ErrorCategory::invalid_argument, "extract_features needs at least one image");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), extractor.dim());
    for (size_t i = 0; i < images.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = extractor.embed(images[i]).transpose();
    return out;
}

SegMetrics iou_suite(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts) {
    if (preds.size() != gts.size())
        fail(ErrorCategory::shape, "prediction and ground-truth counts differ");
    if (preds.empty()) fail(ErrorCategory::invalid_argument, "iou_suite needs at least one pair");

    long long agg_inter = 0, agg_union = 0;
    long long tp = 0, fp = 0, fn = 0;
    double iou_sum = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
        const BinaryMask& p = preds[i];
        const BinaryMask& g = gts[i];
        p.validate();
        g.validate();
        if (p.width != g.width || p.height != g.height)
            fail(ErrorCategory::shape, "mask pair " + std::to_string(i) + " dimensions differ");
        long long inter = 0, uni = 0;
        for (size_t j = 0; j < p.data.size(); ++j) {
            const int pv = p.data[j], gv = g.data[j];
            inter += pv & gv;
            uni += pv | gv;
            tp += pv & gv;
            fp += pv & (1 - gv);
            fn += (1 - pv) & gv;
        }
        if (uni == 0) {
            iou_sum += 1.0;  // both empty: models agree on absence
        } else {
            iou_sum += static_cast<double>(inter) / static_cast<double>(uni);
            agg_inter += inter;
            agg_union += uni;
        }
    }

    SegMetrics m;
    m.dataset_iou = iou_sum / static_cast<double>(preds.size());
    m.image_iou = agg_union > 0
                      ? static_cast<double>(agg_inter) / static_cast<double>(agg_union)
                      : 1.0;
    const long long dice_den = 2 * tp + fp + fn;
    m.dice = dice_den > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(dice_den) : 1.0;
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    return m;
}

ReaderScore score_survey(const std::vector<ReaderResponse>& responses, int threshold) {
    if (responses.empty())
        fail(ErrorCategory::invalid_argument, "score_survey needs at least one response");
    ReaderScore s;
    for (const auto& r : responses) {
        if (r.confidence < 1 || r.confidence > 10)
            fail(ErrorCategory::invalid_argument,
                 "confidence " + std::to_string(r.confidence) + " outside [1,10] for image " +
                     r.image_id);
        const bool predicted_generated = r.confidence >= threshold;
        if (r.generated)
            (predicted_generated ? s.tp : s.fn) += 1;
        else
            (predicted_generated ? s.fp : s.tn) += 1;
    }
    const long long total = s.tp + s.fn + s.fp + s.tn;
    s.accuracy = static_cast<double>(s.tp + s.tn) / static_cast<double>(total);
    s.recall = s.tp + s.fn > 0 ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 0.0;
    s.precision =
        s.tp + s.fp > 0 ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 0.0;
    return s;
}

SurveyMean survey_mean(const std::vector<ReaderScore>& scores) {
    if (scores.empty()) fail(ErrorCategory::invalid_argument, "survey_mean needs at least one score");
    SurveyMean m;
    for (const auto& s : scores) {
        m.accuracy += s.accuracy;
        m.recall += s.recall;
        m.precision += s.precision;
    }
    const double n = static_cast<double>(scores.size());
    m.accuracy /= n;
    m.recall /= n;
    m.precision /= n;
    return m;
}

} // namespace polyp
