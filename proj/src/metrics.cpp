#include "panseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace panseg {

namespace {

uint64_t pair_key(uint32_t a, uint32_t b) { return (static_cast<uint64_t>(a) << 32) | b; }

struct SegTables {
    std::unordered_map<uint32_t, int64_t> gt_area, pred_area;
    std::unordered_map<uint64_t, int64_t> inter;  // (gt_enc, pred_enc) -> count
};

SegTables build_tables(const PanopticMap& pred, const PanopticMap& gt) {
    SegTables t;
    const size_t n = gt.class_ids.size();
    for (size_t i = 0; i < n; ++i) {
        uint32_t ge = gt.encoded(i), pe = pred.encoded(i);
        t.gt_area[ge]++;
        t.pred_area[pe]++;
        t.inter[pair_key(ge, pe)]++;
    }
    return t;
}

}  // namespace

std::map<int, PerClassPQ> panoptic_stats(const PanopticMap& pred, const PanopticMap& gt,
                                         const ClassCatalog& catalog) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ValidationError("panoptic_quality: dimension mismatch");
    const int k = catalog.num_classes();
    const uint32_t void_enc = PanopticMap::encode(catalog.void_id(), 0);
    for (uint16_t cls : pred.class_ids)
        if (cls > k)  // == k is the void class
            throw ValidationError("panoptic_quality: prediction class " + std::to_string(cls) +
                                  " not in catalog");
    for (uint16_t cls : gt.class_ids)
        if (cls > k)
            throw ValidationError("panoptic_quality: gt class " + std::to_string(cls) +
                                  " not in catalog");

    SegTables t = build_tables(pred, gt);

    std::map<int, PerClassPQ> stats;
    std::unordered_map<uint32_t, uint8_t> gt_matched, pred_matched;

    // sorted pair traversal keeps tie-free matching deterministic
    std::vector<std::pair<uint64_t, int64_t>> pairs(t.inter.begin(), t.inter.end());
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [key, inter] : pairs) {
        uint32_t ge = static_cast<uint32_t>(key >> 32), pe = static_cast<uint32_t>(key);
        if (ge == void_enc || pe == void_enc) continue;
        auto [gcls, ginst] = PanopticMap::decode(ge);
        auto [pcls, pinst] = PanopticMap::decode(pe);
        (void)ginst;
        (void)pinst;
        if (gcls != pcls) continue;
        int64_t void_overlap = 0;
        if (auto it = t.inter.find(pair_key(void_enc, pe)); it != t.inter.end())
            void_overlap = it->second;
        double uni = static_cast<double>(t.pred_area[pe] + t.gt_area[ge] - inter - void_overlap);
        double iou = uni > 0 ? inter / uni : 0.0;
        if (iou > 0.5) {
            auto& s = stats[gcls];
            s.tp++;
            s.iou_sum += iou;
            gt_matched[ge] = 1;
            pred_matched[pe] = 1;
        }
    }

    std::vector<std::pair<uint32_t, int64_t>> gt_segs(t.gt_area.begin(), t.gt_area.end());
    std::sort(gt_segs.begin(), gt_segs.end());
    for (const auto& [ge, area] : gt_segs) {
        (void)area;
        if (ge == void_enc || gt_matched.count(ge)) continue;
        stats[PanopticMap::decode(ge).first].fn++;
    }
    std::vector<std::pair<uint32_t, int64_t>> pred_segs(t.pred_area.begin(), t.pred_area.end());
    std::sort(pred_segs.begin(), pred_segs.end());
    for (const auto& [pe, area] : pred_segs) {
        if (pe == void_enc || pred_matched.count(pe)) continue;
        int64_t void_overlap = 0;
        if (auto it = t.inter.find(pair_key(void_enc, pe)); it != t.inter.end())
            void_overlap = it->second;
        if (void_overlap * 2 > area) continue;  // mostly-void predictions are not FPs
        stats[PanopticMap::decode(pe).first].fp++;
    }
    return stats;
}

void accumulate_stats(std::map<int, PerClassPQ>& into, const std::map<int, PerClassPQ>& scene) {
    for (const auto& [cls, s] : scene) {
        auto& d = into[cls];
        d.iou_sum += s.iou_sum;
        d.tp += s.tp;
        d.fp += s.fp;
        d.fn += s.fn;
    }
}

PanopticScores scores_from_stats(const std::map<int, PerClassPQ>& stats,
                                 const ClassCatalog& catalog) {
    PanopticScores out;
    out.per_class = stats;
    double pq_sum = 0, sq_sum = 0, rq_sum = 0;
    double pq_th = 0, sq_th = 0, rq_th = 0, pq_st = 0, sq_st = 0, rq_st = 0;
    int n = 0, n_th = 0, n_st = 0;
    for (const auto& [cls, s] : stats) {
        if (s.tp + s.fn == 0) continue;  // class absent from gt
        double denom = s.tp + 0.5 * s.fp + 0.5 * s.fn;
        double pq = denom > 0 ? s.iou_sum / denom : 0.0;
        double sq = s.tp > 0 ? s.iou_sum / s.tp : 0.0;
        double rq = denom > 0 ? s.tp / denom : 0.0;
        pq_sum += pq;
        sq_sum += sq;
        rq_sum += rq;
        ++n;
        if (cls < catalog.num_classes() && catalog.is_thing(cls)) {
            pq_th += pq;
            sq_th += sq;
            rq_th += rq;
            ++n_th;
        } else if (cls < catalog.num_classes()) {
            pq_st += pq;
            sq_st += sq;
            rq_st += rq;
            ++n_st;
        }
    }
    if (n) {
        out.pq = pq_sum / n;
        out.sq = sq_sum / n;
        out.rq = rq_sum / n;
    }
    if (n_th) {
        out.pq_things = pq_th / n_th;
        out.sq_things = sq_th / n_th;
        out.rq_things = rq_th / n_th;
    }
    if (n_st) {
        out.pq_stuff = pq_st / n_st;
        out.sq_stuff = sq_st / n_st;
        out.rq_stuff = rq_st / n_st;
    }
    return out;
}

PanopticScores panoptic_quality(const PanopticMap& pred, const PanopticMap& gt,
                                const ClassCatalog& catalog) {
    return scores_from_stats(panoptic_stats(pred, gt, catalog), catalog);
}

void accumulate_confusion(std::vector<int64_t>& confusion, int k, const SemanticLabelMap& pred,
                          const SemanticLabelMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ValidationError("mean_iou: dimension mismatch");
    if (confusion.size() != static_cast<size_t>(k) * k)
        throw ValidationError("mean_iou: confusion matrix size mismatch");
    const size_t n = gt.labels.size();
    for (size_t i = 0; i < n; ++i) {
        uint16_t g = gt.labels[i], p = pred.labels[i];
        if (g >= k || p >= k) throw ValidationError("mean_iou: label out of catalog range");
        confusion[static_cast<size_t>(g) * k + p]++;
    }
}

MeanIoU miou_from_confusion(const std::vector<int64_t>& confusion, int k) {
    MeanIoU out;
    double sum = 0;
    int n = 0;
    for (int c = 0; c < k; ++c) {
        int64_t tp = confusion[static_cast<size_t>(c) * k + c];
        int64_t gt_total = 0, pred_total = 0;
        for (int j = 0; j < k; ++j) {
            gt_total += confusion[static_cast<size_t>(c) * k + j];
            pred_total += confusion[static_cast<size_t>(j) * k + c];
        }
        int64_t uni = gt_total + pred_total - tp;
        if (uni == 0) continue;  // absent from both: skipped
        double iou = static_cast<double>(tp) / uni;
        out.per_class[c] = iou;
        sum += iou;
        ++n;
    }
    out.miou = n ? sum / n : 0.0;
    return out;
}

MeanIoU mean_iou(const SemanticLabelMap& pred, const SemanticLabelMap& gt,
                 const ClassCatalog& catalog) {
    const int k = catalog.num_classes();
    std::vector<int64_t> confusion(static_cast<size_t>(k) * k, 0);
    accumulate_confusion(confusion, k, pred, gt);
    return miou_from_confusion(confusion, k);
}

std::vector<double> default_ap_thresholds() {
    std::vector<double> out;
    for (int i = 0; i < 10; ++i) out.push_back(0.50 + 0.05 * i);
    return out;
}

ApAccumulator::ApAccumulator(std::vector<double> thresholds)
    : thresholds_(std::move(thresholds)) {
    if (thresholds_.empty()) throw ValidationError("mask_ap: no IoU thresholds");
}

void ApAccumulator::add_scene(const InstanceLabelMap& pred, const InstanceLabelMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ValidationError("mask_ap: dimension mismatch");

    // pairwise mask IoU between pred and gt instances in one pass
    std::unordered_map<uint64_t, int64_t> inter;
    const size_t n = gt.ids.size();
    for (size_t i = 0; i < n; ++i)
        if (pred.ids[i] && gt.ids[i]) inter[pair_key(pred.ids[i], gt.ids[i])]++;

    std::map<int, std::vector<const InstanceRecord*>> pred_by_class, gt_by_class;
    for (const auto& r : pred.records) pred_by_class[r.class_id].push_back(&r);
    for (const auto& r : gt.records) gt_by_class[r.class_id].push_back(&r);

    std::map<int, uint8_t> classes;
    for (const auto& [cls, v] : pred_by_class) {
        (void)v;
        classes[cls] = 1;
    }
    for (const auto& [cls, v] : gt_by_class) {
        (void)v;
        classes[cls] = 1;
    }

    for (const auto& [cls, present] : classes) {
        (void)present;
        auto& preds = pred_by_class[cls];
        auto& gts = gt_by_class[cls];
        gt_count_[cls] += static_cast<long>(gts.size());

        auto& class_ious = ious_[cls];
        class_ious.resize(n_scenes_ + 1);
        auto& table = class_ious[n_scenes_];
        table.assign(preds.size(), std::vector<double>(gts.size(), 0.0));
        for (size_t p = 0; p < preds.size(); ++p) {
            for (size_t g = 0; g < gts.size(); ++g) {
                int64_t i2 = 0;
                if (auto it = inter.find(pair_key(preds[p]->id, gts[g]->id)); it != inter.end())
                    i2 = it->second;
                int64_t uni = preds[p]->area + gts[g]->area - i2;
                table[p][g] = uni > 0 ? static_cast<double>(i2) / uni : 0.0;
            }
        }
        for (size_t p = 0; p < preds.size(); ++p)
            detections_[cls].push_back({preds[p]->confidence, n_scenes_, static_cast<int>(p)});
    }
    ++n_scenes_;
}

MaskAp ApAccumulator::compute() const {
    MaskAp out;
    std::map<double, double> thr_sum;
    int n_classes = 0;

    for (const auto& [cls, gt_n] : gt_count_) {
        if (gt_n == 0) continue;  // class absent from gt: skipped
        ++n_classes;

        std::vector<Detection> dets;
        if (auto it = detections_.find(cls); it != detections_.end()) dets = it->second;
        // descending confidence; ties by scene then record order (ascending id)
        std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
            return a.confidence > b.confidence;
        });

        const auto& class_ious = ious_.at(cls);
        double class_sum = 0.0;
        for (double thr : thresholds_) {
            // greedy matching at this threshold
            std::vector<std::vector<uint8_t>> used(class_ious.size());
            for (size_t s = 0; s < class_ious.size(); ++s) {
                size_t n_gt = class_ious[s].empty() ? 0 : class_ious[s][0].size();
                // scenes with zero predictions keep an empty table; gt size
                // is only needed where predictions exist
                if (!class_ious[s].empty()) used[s].assign(n_gt, 0);
            }
            std::vector<uint8_t> is_tp(dets.size(), 0);
            for (size_t d = 0; d < dets.size(); ++d) {
                const auto& table = class_ious[dets[d].scene];
                const auto& row = table[dets[d].pred_index];
                int best_g = -1;
                double best_iou = 0.0;
                for (size_t g = 0; g < row.size(); ++g) {
                    if (used[dets[d].scene][g]) continue;
                    if (row[g] >= thr && row[g] > best_iou) {
                        best_iou = row[g];
                        best_g = static_cast<int>(g);
                    }
                }
                if (best_g >= 0) {
                    used[dets[d].scene][best_g] = 1;
                    is_tp[d] = 1;
                }
            }

            // PR curve, right-running-max interpolation
            std::vector<double> precision(dets.size()), recall(dets.size());
            long tp = 0;
            for (size_t d = 0; d < dets.size(); ++d) {
                tp += is_tp[d];
                precision[d] = static_cast<double>(tp) / static_cast<double>(d + 1);
                recall[d] = static_cast<double>(tp) / static_cast<double>(gt_n);
            }
            for (int d = static_cast<int>(dets.size()) - 2; d >= 0; --d)
                precision[d] = std::max(precision[d], precision[d + 1]);
            double ap = 0.0, prev_recall = 0.0;
            for (size_t d = 0; d < dets.size(); ++d) {
                ap += (recall[d] - prev_recall) * precision[d];
                prev_recall = recall[d];
            }
            class_sum += ap;
            thr_sum[thr] += ap;
        }
        out.per_class[cls] = class_sum / thresholds_.size();
        out.map += out.per_class[cls];
    }
    if (n_classes) {
        out.map /= n_classes;
        for (auto& [thr, s] : thr_sum) out.per_threshold[thr] = s / n_classes;
    }
    return out;
}

MaskAp mask_ap(const InstanceLabelMap& pred, const InstanceLabelMap& gt,
               const std::vector<double>& thresholds) {
    ApAccumulator acc(thresholds);
    acc.add_scene(pred, gt);
    return acc.compute();
}

}  // namespace panseg
