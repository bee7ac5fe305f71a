#pragma once

#include <span>
#include <vector>

#include "panseg/types.hpp"

namespace panseg {

struct LossWeights {
    double lambda_semantic = 1.0;
    double lambda_contour = 50.0;
    double lambda_center = 0.1;
};

/// Value plus (optionally) the gradient w.r.t. the prediction tensor, laid
/// out exactly like the prediction's data vector. All logs are clamped at
/// eps = 1e-12. Sums are accumulated per row and combined serially, so values
/// are bit-stable across thread counts.
struct LossValue {
    double value = 0.0;
    std::vector<double> grad;
    int skipped = 0;  // nms only: boundary pixels with degenerate normals
};

inline constexpr double kLogEps = 1e-12;

/// Mean over pixels of -log p_gt. Gradient is -1/(N*p_gt) on the gt channel.
LossValue semantic_ce(const SemanticProbMap& probs, const SemanticLabelMap& gt,
                      bool with_grad = true);

/// Class-balanced binary cross entropy, summed over pixels. beta is the
/// fraction of non-edge pixels in gt; the edge term is weighted by beta and
/// the non-edge term by 1-beta.
LossValue weighted_bce(const ContourProbMap& probs, const ContourMask& gt,
                       bool with_grad = true);

/// Symmetric Huber, summed over elements: 0.5 r^2 for |r| <= delta, else
/// delta*|r| - 0.5 delta^2, with r = pred - gt.
LossValue huber(std::span<const float> pred, std::span<const float> gt, double delta,
                bool with_grad = true);
LossValue huber(const ContourProbMap& pred, const ContourMask& gt, double delta = 0.3,
                bool with_grad = true);
LossValue huber(const OffsetField& pred, const OffsetField& gt, double delta = 1.0,
                bool with_grad = true);

/// Boundary sharpness term: for each gt contour pixel, samples `window`
/// points at unit spacing along the boundary normal (estimated from the
/// gradient field of the distance transform of gt), takes the softmax of the
/// samples, and penalizes -log of the center response. Sampling is bilinear
/// with clamp-to-edge coordinates. Pixels whose distance-transform gradient
/// vanishes over the whole 3x3 neighborhood (interiors of thick contour
/// bands) carry no normal and are skipped; `skipped` reports how many.
LossValue nms_loss(const ContourProbMap& probs, const ContourMask& gt_contours,
                   int window = 9, bool with_grad = true);

struct LossReport {
    double semantic = 0.0;
    double wbce = 0.0;
    double huber_contour = 0.0;
    double nms = 0.0;
    double center = 0.0;
    double total = 0.0;
    LossWeights weights;
};

/// total = l1*semantic + l2*(wbce + huber_contour + nms) + l3*center.
LossReport total_loss(double semantic, double wbce, double huber_contour, double nms,
                      double center, const LossWeights& weights = {});

/// Exact Euclidean distance (in pixels) from every pixel to the nearest set
/// pixel of the mask; infinity when the mask is empty. Row/column separable
/// lower-envelope passes.
std::vector<double> distance_transform(const BinaryMask& mask);

}  // namespace panseg
