#pragma once

// Serial reference implementations of the parallel kernels plus brute-force
// versions of the labeling/clustering/matching algorithms. Kept in the
// library so the benchmark can time them against the production paths; the
// test suites use them as independent oracles. Everything here favors
// obviousness over speed.

#include <span>

#include "panseg/metrics.hpp"
#include "panseg/refine.hpp"
#include "panseg/types.hpp"

namespace panseg::reference {

SemanticLabelMap argmax_semantic(const SemanticProbMap& probs);

ContourMask extract_contours(const InstanceLabelMap& instances);

/// Direct per-pixel scan of the full (2r+1)^2 window.
ContourMask dilate_brute(const ContourMask& mask, int rate);

/// Row-major BFS flood fill; ids numbered by first encounter, which makes it
/// directly comparable with the union-find labeling.
InstanceLabelMap connected_components_floodfill(const BinaryMask& mask, int connectivity);

/// All-pairs density clustering with the same core/border/tie rules as the
/// grid-accelerated version.
std::vector<int> dbscan_brute(const std::vector<Point2d>& points, double eps, int min_samples);

/// Exact distances by scanning every set pixel for every query pixel.
std::vector<double> distance_transform_brute(const BinaryMask& mask);

/// Segment matching by materializing every (gt, pred) same-class pair and
/// computing IoU from per-pair pixel scans.
std::map<int, PerClassPQ> panoptic_stats_brute(const PanopticMap& pred, const PanopticMap& gt,
                                               const ClassCatalog& catalog);

// Plain serial loss sums (no gradients); numerically identical accumulation
// order to the production row-partial reductions is NOT guaranteed, only
// agreement within floating-point slack.
double semantic_ce_value(const SemanticProbMap& probs, const SemanticLabelMap& gt);
double weighted_bce_value(const ContourProbMap& probs, const ContourMask& gt);
double huber_value(std::span<const float> pred, std::span<const float> gt, double delta);

}  // namespace panseg::reference
