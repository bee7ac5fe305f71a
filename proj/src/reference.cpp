#include "panseg/reference.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "panseg/losses.hpp"

namespace panseg::reference {

SemanticLabelMap argmax_semantic(const SemanticProbMap& probs) {
    SemanticLabelMap out = SemanticLabelMap::zeros(probs.height, probs.width);
    for (int r = 0; r < probs.height; ++r)
        for (int c = 0; c < probs.width; ++c) {
            int best = 0;
            for (int k = 1; k < probs.channels; ++k)
                if (probs.at(r, c, k) > probs.at(r, c, best)) best = k;
            out.at(r, c) = static_cast<uint16_t>(best);
        }
    return out;
}

ContourMask extract_contours(const InstanceLabelMap& instances) {
    const int h = instances.height, w = instances.width;
    ContourMask out = ContourMask::zeros(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            uint32_t id = instances.at(r, c);
            if (id == 0) continue;
            bool boundary = false;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    int nr = r + dr, nc = c + dc;
                    if (nr < 0 || nr >= h || nc < 0 || nc >= w || instances.at(nr, nc) != id)
                        boundary = true;
                }
            if (boundary) out.set(r, c, true);
        }
    return out;
}

ContourMask dilate_brute(const ContourMask& mask, int rate) {
    const int h = mask.height, w = mask.width;
    ContourMask out = ContourMask::zeros(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            bool hit = false;
            for (int dr = -rate; dr <= rate && !hit; ++dr)
                for (int dc = -rate; dc <= rate; ++dc) {
                    int nr = r + dr, nc = c + dc;
                    if (nr >= 0 && nr < h && nc >= 0 && nc < w && mask.at(nr, nc)) {
                        hit = true;
                        break;
                    }
                }
            out.set(r, c, hit);
        }
    return out;
}

InstanceLabelMap connected_components_floodfill(const BinaryMask& mask, int connectivity) {
    const int h = mask.height, w = mask.width;
    InstanceLabelMap out = InstanceLabelMap::zeros(h, w);
    uint32_t next = 1;
    std::deque<int> queue;
    for (int r0 = 0; r0 < h; ++r0)
        for (int c0 = 0; c0 < w; ++c0) {
            if (!mask.at(r0, c0) || out.at(r0, c0) != 0) continue;
            uint32_t id = next++;
            out.at(r0, c0) = id;
            queue.push_back(r0 * w + c0);
            while (!queue.empty()) {
                int p = queue.front();
                queue.pop_front();
                int r = p / w, c = p % w;
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        if (connectivity == 4 && dr != 0 && dc != 0) continue;
                        int nr = r + dr, nc = c + dc;
                        if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                        if (!mask.at(nr, nc) || out.at(nr, nc) != 0) continue;
                        out.at(nr, nc) = id;
                        queue.push_back(nr * w + nc);
                    }
            }
        }
    return out;
}

std::vector<int> dbscan_brute(const std::vector<Point2d>& points, double eps, int min_samples) {
    const int n = static_cast<int>(points.size());
    std::vector<int> labels(n, -1);
    if (n == 0) return labels;
    const double eps2 = eps * eps;

    auto d2 = [&](int a, int b) {
        double dr = points[a][0] - points[b][0], dc = points[a][1] - points[b][1];
        return dr * dr + dc * dc;
    };

    std::vector<uint8_t> core(n, 0);
    for (int i = 0; i < n; ++i) {
        int count = 0;
        for (int j = 0; j < n; ++j)
            if (d2(i, j) <= eps2) ++count;
        core[i] = count >= min_samples;
    }

    // components of cores under eps-reachability, numbered by first core
    int next_cluster = 0;
    for (int i = 0; i < n; ++i) {
        if (!core[i] || labels[i] != -1) continue;
        int cluster = next_cluster++;
        std::deque<int> queue{i};
        labels[i] = cluster;
        while (!queue.empty()) {
            int p = queue.front();
            queue.pop_front();
            for (int q = 0; q < n; ++q) {
                if (!core[q] || labels[q] != -1 || d2(p, q) > eps2) continue;
                labels[q] = cluster;
                queue.push_back(q);
            }
        }
    }

    // border points join the cluster of their first core neighbor
    for (int i = 0; i < n; ++i) {
        if (core[i]) continue;
        for (int q = 0; q < n; ++q)
            if (core[q] && d2(i, q) <= eps2) {
                labels[i] = labels[q];
                break;
            }
    }
    return labels;
}

std::vector<double> distance_transform_brute(const BinaryMask& mask) {
    const int h = mask.height, w = mask.width;
    std::vector<std::pair<int, int>> sources;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (mask.at(r, c)) sources.emplace_back(r, c);
    std::vector<double> out(static_cast<size_t>(h) * w,
                            std::numeric_limits<double>::infinity());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double best = std::numeric_limits<double>::infinity();
            for (auto [sr, sc] : sources) {
                double d = static_cast<double>(r - sr) * (r - sr) +
                           static_cast<double>(c - sc) * (c - sc);
                best = std::min(best, d);
            }
            out[static_cast<size_t>(r) * w + c] = std::sqrt(best);
        }
    return out;
}

std::map<int, PerClassPQ> panoptic_stats_brute(const PanopticMap& pred, const PanopticMap& gt,
                                               const ClassCatalog& catalog) {
    const size_t n = gt.class_ids.size();
    const uint32_t void_enc = PanopticMap::encode(catalog.void_id(), 0);

    std::vector<uint32_t> gt_enc(n), pred_enc(n);
    for (size_t i = 0; i < n; ++i) {
        gt_enc[i] = gt.encoded(i);
        pred_enc[i] = pred.encoded(i);
    }
    auto uniq = [](std::vector<uint32_t> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    auto gt_segs = uniq(gt_enc), pred_segs = uniq(pred_enc);

    auto area_of = [&](const std::vector<uint32_t>& enc, uint32_t seg) {
        int64_t a = 0;
        for (uint32_t e : enc) a += (e == seg);
        return a;
    };
    auto inter_of = [&](uint32_t g, uint32_t p) {
        int64_t a = 0;
        for (size_t i = 0; i < n; ++i) a += (gt_enc[i] == g && pred_enc[i] == p);
        return a;
    };

    std::map<int, PerClassPQ> stats;
    std::vector<uint32_t> matched_gt, matched_pred;
    for (uint32_t g : gt_segs) {
        if (g == void_enc) continue;
        for (uint32_t p : pred_segs) {
            if (p == void_enc) continue;
            if (PanopticMap::decode(g).first != PanopticMap::decode(p).first) continue;
            int64_t inter = inter_of(g, p);
            if (inter == 0) continue;
            int64_t void_overlap = inter_of(void_enc, p);
            double uni = static_cast<double>(area_of(gt_enc, g) + area_of(pred_enc, p) - inter -
                                             void_overlap);
            double iou = uni > 0 ? inter / uni : 0.0;
            if (iou > 0.5) {
                auto& s = stats[PanopticMap::decode(g).first];
                s.tp++;
                s.iou_sum += iou;
                matched_gt.push_back(g);
                matched_pred.push_back(p);
            }
        }
    }
    for (uint32_t g : gt_segs) {
        if (g == void_enc) continue;
        if (std::find(matched_gt.begin(), matched_gt.end(), g) == matched_gt.end())
            stats[PanopticMap::decode(g).first].fn++;
    }
    for (uint32_t p : pred_segs) {
        if (p == void_enc) continue;
        if (std::find(matched_pred.begin(), matched_pred.end(), p) != matched_pred.end()) continue;
        if (inter_of(void_enc, p) * 2 > area_of(pred_enc, p)) continue;
        stats[PanopticMap::decode(p).first].fp++;
    }
    return stats;
}

double semantic_ce_value(const SemanticProbMap& probs, const SemanticLabelMap& gt) {
    double sum = 0.0;
    for (int r = 0; r < probs.height; ++r)
        for (int c = 0; c < probs.width; ++c)
            sum -= std::log(std::max(static_cast<double>(probs.at(r, c, gt.at(r, c))), kLogEps));
    return sum / (static_cast<double>(probs.height) * probs.width);
}

double weighted_bce_value(const ContourProbMap& probs, const ContourMask& gt) {
    const double n = static_cast<double>(probs.height) * probs.width;
    double beta = (n - static_cast<double>(gt.count())) / n;
    double sum = 0.0;
    for (int r = 0; r < probs.height; ++r)
        for (int c = 0; c < probs.width; ++c) {
            double p = probs.at(r, c);
            if (gt.at(r, c))
                sum -= beta * std::log(std::max(p, kLogEps));
            else
                sum -= (1.0 - beta) * std::log(std::max(1.0 - p, kLogEps));
        }
    return sum;
}

double huber_value(std::span<const float> pred, std::span<const float> gt, double delta) {
    double sum = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double r = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
        sum += std::abs(r) <= delta ? 0.5 * r * r : delta * std::abs(r) - 0.5 * delta * delta;
    }
    return sum;
}

}  // namespace panseg::reference
