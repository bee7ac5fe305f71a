#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "panseg/types.hpp"

namespace panseg {

struct RefineParams {
    double eps = 20.0;           // cluster radius and split-distance threshold, pixels
    int min_samples = 0;         // 0 = auto: max(10, ceil(0.01 * instance area))
    int64_t min_area = 300;      // instances below this are dissolved
    double merge_distance = 20.0;
    bool merge_same_class_only = true;
    bool enable_split = true;
    bool enable_merge = true;

    int min_samples_for(int64_t area) const {
        if (min_samples > 0) return min_samples;
        return static_cast<int>(std::max<int64_t>(10, (area + 99) / 100));
    }
};

using Point2d = std::array<double, 2>;  // (row, col)

/// position + offset for every pixel of the given instance, row-major order.
std::vector<Point2d> predicted_centers(const InstanceLabelMap& instances, uint32_t id,
                                       const OffsetField& offsets);

/// Density clustering. A point is core iff it has >= min_samples neighbors
/// within eps (inclusive, counting itself). Clusters are the connected
/// components of core points under eps-reachability plus their border
/// points; a border point reachable from several clusters joins the cluster
/// of its smallest-input-index core neighbor. Returns one label per point,
/// -1 for noise; clusters are numbered by first core point in input order.
/// Neighbor queries run on a uniform grid of cell size eps/sqrt(2), so the
/// dense blobs produced by center regression stay near-linear.
std::vector<int> dbscan(const std::vector<Point2d>& points, double eps, int min_samples);

// Each step recomputes record areas/centroids. Classes are re-voted and
// confidences re-averaged when labels+probs+catalog are all given (the
// in-memory pipeline passes them); otherwise children inherit class and
// confidence from their parents, area-weighted for merges.
InstanceLabelMap split_instances(const InstanceLabelMap& instances, const OffsetField& offsets,
                                 const RefineParams& params,
                                 const SemanticLabelMap* labels = nullptr,
                                 const SemanticProbMap* probs = nullptr,
                                 const ClassCatalog* catalog = nullptr);
InstanceLabelMap merge_instances(const InstanceLabelMap& instances, const OffsetField& offsets,
                                 const RefineParams& params,
                                 const SemanticLabelMap* labels = nullptr,
                                 const SemanticProbMap* probs = nullptr,
                                 const ClassCatalog* catalog = nullptr);
InstanceLabelMap filter_min_area(const InstanceLabelMap& instances, const OffsetField& offsets,
                                 const RefineParams& params,
                                 const SemanticLabelMap* labels = nullptr,
                                 const SemanticProbMap* probs = nullptr,
                                 const ClassCatalog* catalog = nullptr);

/// split -> merge -> min-area filter, honoring the enable flags (min-area
/// filtering always runs).
InstanceLabelMap refine_instances(const InstanceLabelMap& instances, const OffsetField& offsets,
                                  const RefineParams& params,
                                  const SemanticLabelMap* labels = nullptr,
                                  const SemanticProbMap* probs = nullptr,
                                  const ClassCatalog* catalog = nullptr);

}  // namespace panseg
