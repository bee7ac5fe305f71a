#pragma once

#include <map>
#include <vector>

#include "panseg/types.hpp"

namespace panseg {

struct PerClassPQ {
    double iou_sum = 0.0;
    long tp = 0, fp = 0, fn = 0;
};

struct PanopticScores {
    double pq = 0, sq = 0, rq = 0;
    double pq_things = 0, sq_things = 0, rq_things = 0;
    double pq_stuff = 0, sq_stuff = 0, rq_stuff = 0;
    std::map<int, PerClassPQ> per_class;
};

/// Per class: segments match iff IoU > 0.5 (unique by construction);
/// PQ = sum IoU / (TP + FP/2 + FN/2), SQ = sum IoU / TP, RQ = TP / (...).
/// Void pixels in gt are excluded: matched IoU subtracts the prediction's
/// void overlap from the union, and an unmatched prediction more than half
/// covered by gt void is not counted as FP. Averages run over classes
/// present in gt.
std::map<int, PerClassPQ> panoptic_stats(const PanopticMap& pred, const PanopticMap& gt,
                                         const ClassCatalog& catalog);
PanopticScores scores_from_stats(const std::map<int, PerClassPQ>& stats,
                                 const ClassCatalog& catalog);
PanopticScores panoptic_quality(const PanopticMap& pred, const PanopticMap& gt,
                                const ClassCatalog& catalog);
/// Accumulates per-class tallies across scenes into `into` (dataset-level).
void accumulate_stats(std::map<int, PerClassPQ>& into, const std::map<int, PerClassPQ>& scene);

struct MeanIoU {
    double miou = 0.0;
    std::map<int, double> per_class;  // classes with a nonempty union only
};

/// Per-class pixel IoU; the mean skips classes absent from both maps.
MeanIoU mean_iou(const SemanticLabelMap& pred, const SemanticLabelMap& gt,
                 const ClassCatalog& catalog);

/// K x K confusion accumulation for multi-scene evaluation (rows = gt).
void accumulate_confusion(std::vector<int64_t>& confusion, int k, const SemanticLabelMap& pred,
                          const SemanticLabelMap& gt);
MeanIoU miou_from_confusion(const std::vector<int64_t>& confusion, int k);

struct MaskAp {
    double map = 0.0;
    std::map<double, double> per_threshold;  // averaged over classes
    std::map<int, double> per_class;         // averaged over thresholds
};

std::vector<double> default_ap_thresholds();  // 0.50 : 0.05 : 0.95

/// Greedy confidence-ordered matching against same-class ground truth at
/// each IoU threshold; AP is the area under the PR curve with precision
/// interpolated by a running max from the right. Averaged over thresholds,
/// then over classes present in gt.
MaskAp mask_ap(const InstanceLabelMap& pred, const InstanceLabelMap& gt,
               const std::vector<double>& thresholds = default_ap_thresholds());

/// Pools detections across scenes per class before computing AP.
class ApAccumulator {
public:
    explicit ApAccumulator(std::vector<double> thresholds = default_ap_thresholds());
    void add_scene(const InstanceLabelMap& pred, const InstanceLabelMap& gt);
    MaskAp compute() const;

private:
    struct Detection {
        double confidence;
        int scene, pred_index;  // index into per-scene IoU rows
    };
    std::vector<double> thresholds_;
    // per class: detections and per-scene IoU tables vs gt instances
    std::map<int, std::vector<Detection>> detections_;
    std::map<int, std::vector<std::vector<std::vector<double>>>> ious_;  // [class][scene][pred][gt]
    std::map<int, long> gt_count_;
    int n_scenes_ = 0;
};

}  // namespace panseg
