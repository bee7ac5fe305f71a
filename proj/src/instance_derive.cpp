#include "panseg/instance_derive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace panseg {

BinaryMask instance_class_mask(const SemanticLabelMap& labels, const ClassCatalog& catalog) {
    const int h = labels.height, w = labels.width;
    const int k = catalog.num_classes();
    std::vector<uint8_t> thing(k, 0);
    for (int i = 0; i < k; ++i) thing[i] = catalog.classes[i].is_thing ? 1 : 0;

    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (labels.at(r, c) >= k)
                throw ValidationError("instance_class_mask: label " +
                                      std::to_string(labels.at(r, c)) + " not in catalog at (" +
                                      std::to_string(r) + "," + std::to_string(c) + ")");

    BinaryMask out = BinaryMask::zeros(h, w);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) out.mask[out.idx(r, c)] = thing[labels.at(r, c)];
    return out;
}

BinaryMask boundary_aware_mask(const BinaryMask& class_mask, const ContourProbMap& contour_probs,
                               const DeriveParams& params) {
    if (class_mask.height != contour_probs.height || class_mask.width != contour_probs.width)
        throw ValidationError("boundary_aware_mask: dimension mismatch");
    if (!(params.contour_threshold > 0.0 && params.contour_threshold < 1.0))
        throw ValidationError("boundary_aware_mask: threshold must be inside (0,1)");
    const int h = class_mask.height, w = class_mask.width;
    const float thr = static_cast<float>(params.contour_threshold);

    BinaryMask out = BinaryMask::zeros(h, w);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            out.mask[out.idx(r, c)] =
                (class_mask.at(r, c) && !(contour_probs.at(r, c) > thr)) ? 1 : 0;
    return out;
}

namespace {

struct UnionFind {
    std::vector<int32_t> parent;
    explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int32_t find(int32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int32_t a, int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b)
            parent[b] = a;  // smaller root wins: keeps labels row-major stable
        else
            parent[a] = b;
    }
};

}  // namespace

InstanceLabelMap connected_components(const BinaryMask& mask, int connectivity) {
    if (connectivity != 4 && connectivity != 8)
        throw ValidationError("connected_components: connectivity must be 4 or 8");
    const int h = mask.height, w = mask.width;
    InstanceLabelMap out = InstanceLabelMap::zeros(h, w);

    UnionFind uf(static_cast<size_t>(h) * w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask.at(r, c)) continue;
            int32_t i = r * w + c;
            if (c > 0 && mask.at(r, c - 1)) uf.unite(i, i - 1);
            if (r > 0 && mask.at(r - 1, c)) uf.unite(i, i - w);
            if (connectivity == 8 && r > 0) {
                if (c > 0 && mask.at(r - 1, c - 1)) uf.unite(i, i - w - 1);
                if (c + 1 < w && mask.at(r - 1, c + 1)) uf.unite(i, i - w + 1);
            }
        }
    }

    // second pass: number roots in row-major first-encounter order
    std::vector<uint32_t> root_label(static_cast<size_t>(h) * w, 0);
    uint32_t next = 1;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask.at(r, c)) continue;
            int32_t root = uf.find(r * w + c);
            if (root_label[root] == 0) root_label[root] = next++;
            out.at(r, c) = root_label[root];
        }
    }
    return out;
}

void assign_class_and_confidence(InstanceLabelMap& instances, const SemanticLabelMap& labels,
                                 const SemanticProbMap& probs, const ClassCatalog& catalog,
                                 DeriveDiagnostics* diag) {
    const int h = instances.height, w = instances.width;
    const int k = catalog.num_classes();
    if (labels.height != h || labels.width != w || probs.height != h || probs.width != w)
        throw ValidationError("assign_class_and_confidence: dimension mismatch");

    uint32_t max_id = 0;
    for (uint32_t id : instances.ids) max_id = std::max(max_id, id);
    if (max_id == 0) {
        instances.records.clear();
        return;
    }

    // label histogram + geometry per id
    std::vector<std::vector<int64_t>> hist(max_id + 1, std::vector<int64_t>(k, 0));
    std::vector<int64_t> area(max_id + 1, 0);
    std::vector<double> row_sum(max_id + 1, 0.0), col_sum(max_id + 1, 0.0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            uint32_t id = instances.at(r, c);
            if (id == 0) continue;
            uint16_t cls = labels.at(r, c);
            if (cls >= k) throw ValidationError("assign_class_and_confidence: label out of range");
            hist[id][cls]++;
            area[id]++;
            row_sum[id] += r;
            col_sum[id] += c;
        }
    }

    std::vector<int> chosen(max_id + 1, -1);
    instances.records.clear();
    for (uint32_t id = 1; id <= max_id; ++id) {
        if (area[id] == 0) continue;
        int modal = 0;
        int64_t best = -1;
        for (int cls = 0; cls < k; ++cls)
            if (hist[id][cls] > best) {  // strict: smallest class id wins ties
                best = hist[id][cls];
                modal = cls;
            }
        if (!catalog.is_thing(modal)) {
            if (diag) diag->stuff_modal_instances++;
            int modal_thing = -1;
            int64_t best_thing = 0;
            for (int cls = 0; cls < k; ++cls)
                if (catalog.is_thing(cls) && hist[id][cls] > best_thing) {
                    best_thing = hist[id][cls];
                    modal_thing = cls;
                }
            // no thing label inside at all: fall back to the first thing class
            modal = modal_thing >= 0 ? modal_thing : catalog.thing_ids().front();
        }
        chosen[id] = modal;

        InstanceRecord rec;
        rec.id = id;
        rec.class_id = modal;
        rec.area = area[id];
        rec.centroid_row = row_sum[id] / area[id];
        rec.centroid_col = col_sum[id] / area[id];
        instances.records.push_back(rec);
    }

    // confidence: mean of the assigned-class channel over the instance
    std::vector<double> conf_sum(max_id + 1, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            uint32_t id = instances.at(r, c);
            if (id == 0) continue;
            conf_sum[id] += probs.at(r, c, chosen[id]);
        }
    for (auto& rec : instances.records)
        rec.confidence = std::clamp(conf_sum[rec.id] / rec.area, 0.0, 1.0);
}

void refresh_confidence(InstanceLabelMap& instances, const SemanticProbMap& probs) {
    if (instances.records.empty()) return;
    uint32_t max_id = 0;
    for (const auto& rec : instances.records) max_id = std::max(max_id, rec.id);
    std::vector<int> cls(max_id + 1, -1);
    for (const auto& rec : instances.records) cls[rec.id] = rec.class_id;
    std::vector<double> conf_sum(max_id + 1, 0.0);
    std::vector<int64_t> area(max_id + 1, 0);
    for (int r = 0; r < instances.height; ++r)
        for (int c = 0; c < instances.width; ++c) {
            uint32_t id = instances.at(r, c);
            if (id == 0 || id > max_id || cls[id] < 0) continue;
            conf_sum[id] += probs.at(r, c, cls[id]);
            area[id]++;
        }
    for (auto& rec : instances.records)
        if (area[rec.id] > 0)
            rec.confidence = std::clamp(conf_sum[rec.id] / area[rec.id], 0.0, 1.0);
}

void reassign_contour_pixels(InstanceLabelMap& instances, const BinaryMask& class_mask,
                             const OffsetField* offsets) {
    const int h = instances.height, w = instances.width;
    if (class_mask.height != h || class_mask.width != w)
        throw ValidationError("reassign_contour_pixels: dimension mismatch");
    if (instances.records.empty()) return;  // nothing to assign to

    if (offsets) {
        const auto& recs = instances.records;
        const int n_rec = static_cast<int>(recs.size());
#pragma omp parallel for schedule(static)
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (!class_mask.at(r, c) || instances.at(r, c) != 0) continue;
                double pr = r + offsets->drow(r, c);
                double pc = c + offsets->dcol(r, c);
                double best_d2 = std::numeric_limits<double>::infinity();
                uint32_t best_id = 0;
                for (int i = 0; i < n_rec; ++i) {
                    double dr = pr - recs[i].centroid_row, dc = pc - recs[i].centroid_col;
                    double d2 = dr * dr + dc * dc;
                    if (d2 < best_d2 || (d2 == best_d2 && recs[i].id < best_id)) {
                        best_d2 = d2;
                        best_id = recs[i].id;
                    }
                }
                instances.at(r, c) = best_id;
            }
        }
    } else {
        // layered multi-source BFS: a layer's claims are resolved together so
        // the smaller id wins equal-distance ties regardless of queue order
        std::vector<uint32_t> claim(static_cast<size_t>(h) * w, 0);
        std::vector<int> frontier;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                if (instances.at(r, c) != 0) frontier.push_back(r * w + c);

        const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
        while (!frontier.empty()) {
            std::vector<int> next;
            for (int p : frontier) {
                int r = p / w, c = p % w;
                uint32_t id = instances.ids[p];
                for (int d = 0; d < 4; ++d) {
                    int nr = r + dr[d], nc = c + dc[d];
                    if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                    size_t ni = static_cast<size_t>(nr) * w + nc;
                    if (!class_mask.mask[ni] || instances.ids[ni] != 0) continue;
                    if (claim[ni] == 0) {
                        claim[ni] = id;
                        next.push_back(static_cast<int>(ni));
                    } else if (id < claim[ni]) {
                        claim[ni] = id;
                    }
                }
            }
            for (int p : next) instances.ids[p] = claim[p];
            frontier = std::move(next);
        }
    }
    rebuild_geometry(instances);
}

InstanceLabelMap derive_instances(const SemanticProbMap& probs,
                                  const ContourProbMap& contour_probs, const OffsetField* offsets,
                                  const ClassCatalog& catalog, const DeriveParams& params,
                                  SemanticLabelMap* out_labels, DeriveDiagnostics* diag) {
    SemanticLabelMap labels = argmax_semantic(probs);
    BinaryMask class_mask = instance_class_mask(labels, catalog);
    BinaryMask ba_mask = boundary_aware_mask(class_mask, contour_probs, params);
    InstanceLabelMap inst = connected_components(ba_mask, params.connectivity);
    assign_class_and_confidence(inst, labels, probs, catalog, diag);
    reassign_contour_pixels(inst, class_mask, offsets);
    refresh_confidence(inst, probs);
    if (out_labels) *out_labels = std::move(labels);
    return inst;
}

}  // namespace panseg
