#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "polypconnect/image.hpp"
#include "polypconnect/nn/tensor.hpp"

namespace polyp {

// Mean local structural similarity on luminance, 11x11 Gaussian window
// (sigma 1.5, shrunk to the largest odd size that fits small images),
// C1=(0.01)^2, C2=(0.03)^2 for [0,1] data, averaged over fully valid windows.
double ssim(const RasterImage& a, const RasterImage& b);

// 10*log10(1/MSE) for [0,1] data, capped at the 100 dB sentinel (zero MSE
// included) so reports stay finite and sortable.
double psnr(const RasterImage& a, const RasterImage& b);

// Frechet distance between Gaussian fits of two feature sets (rows are
// samples). Matrix square root via eigendecomposition of the symmetrized
// product; tiny negative eigenvalues are clamped to zero.
double fid(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b);

// Small frozen convolutional embedder used as the FID front-end. Weights are
// a pure function of the seed, so embeddings are reproducible everywhere.
class FeatureExtractor {
public:
    static constexpr std::uint64_t kDefaultSeed = 0x9e3779b97f4a7c15ull;

    explicit FeatureExtractor(std::uint64_t seed = kDefaultSeed);

    int dim() const { return dim_; }
    Eigen::VectorXd embed(const RasterImage& image) const;

private:
    int dim_;
    std::vector<nn::Tensor> weights_;  // conv kernels, applied stride-2
};

// One embedding row per image, order preserved.
Eigen::MatrixXd extract_features(const std::vector<RasterImage>& images,
                                 const FeatureExtractor& extractor);

struct SegMetrics {
    double image_iou = 0.0;    // aggregate: total intersection / total union
    double dataset_iou = 0.0;  // mean of per-pair IoU values (mIoU)
    double dice = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

// Pairwise overlap metrics over a full prediction/ground-truth set.
// A pair with both masks empty counts 1.0 toward dataset_iou and is left out
// of the aggregate sums; aggregate ratios with zero denominator resolve to 1.
SegMetrics iou_suite(const std::vector<BinaryMask>& preds,
                     const std::vector<BinaryMask>& gts);

struct ReaderResponse {
    std::string image_id;
    int confidence = 1;   // 1..10; higher = more confident the image is generated
    bool generated = false;  // ground truth
};

struct ReaderScore {
    long long tp = 0, fn = 0, fp = 0, tn = 0;
    double accuracy = 0.0, recall = 0.0, precision = 0.0;
};

// Positive class is "generated"; a response predicts generated when its
// confidence is at or above the threshold.
ReaderScore score_survey(const std::vector<ReaderResponse>& responses, int threshold = 6);

struct SurveyMean {
    double accuracy = 0.0, recall = 0.0, precision = 0.0;
};

// Unweighted arithmetic mean of each rate across reader scores.
SurveyMean survey_mean(const std::vector<ReaderScore>& scores);

} // namespace polyp
