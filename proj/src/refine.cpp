#include "panseg/refine.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "panseg/instance_derive.hpp"

namespace panseg {

std::vector<Point2d> predicted_centers(const InstanceLabelMap& instances, uint32_t id,
                                       const OffsetField& offsets) {
    std::vector<Point2d> out;
    for (int r = 0; r < instances.height; ++r)
        for (int c = 0; c < instances.width; ++c)
            if (instances.at(r, c) == id)
                out.push_back({r + offsets.drow(r, c), c + offsets.dcol(r, c)});
    return out;
}

namespace {

struct Cell {
    std::vector<int> pts;    // point indices, ascending
    std::vector<int> cores;  // core subset, ascending
    double min_r = std::numeric_limits<double>::infinity();
    double max_r = -std::numeric_limits<double>::infinity();
    double min_c = std::numeric_limits<double>::infinity();
    double max_c = -std::numeric_limits<double>::infinity();
};

uint64_t cell_key(int64_t cx, int64_t cy) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(cx)) << 32) |
           static_cast<uint64_t>(static_cast<uint32_t>(cy));
}

double min_dist2_to_box(const Point2d& p, const Cell& cell) {
    double dr = std::max({cell.min_r - p[0], 0.0, p[0] - cell.max_r});
    double dc = std::max({cell.min_c - p[1], 0.0, p[1] - cell.max_c});
    return dr * dr + dc * dc;
}

double max_dist2_to_box(const Point2d& p, const Cell& cell) {
    double dr = std::max(std::abs(p[0] - cell.min_r), std::abs(p[0] - cell.max_r));
    double dc = std::max(std::abs(p[1] - cell.min_c), std::abs(p[1] - cell.max_c));
    return dr * dr + dc * dc;
}

double min_dist2_box_box(const Cell& a, const Cell& b) {
    double dr = std::max({b.min_r - a.max_r, 0.0, a.min_r - b.max_r});
    double dc = std::max({b.min_c - a.max_c, 0.0, a.min_c - b.max_c});
    return dr * dr + dc * dc;
}

double max_dist2_box_box(const Cell& a, const Cell& b) {
    double dr = std::max(std::abs(a.max_r - b.min_r), std::abs(b.max_r - a.min_r));
    double dc = std::max(std::abs(a.max_c - b.min_c), std::abs(b.max_c - a.min_c));
    return dr * dr + dc * dc;
}

double dist2(const Point2d& a, const Point2d& b) {
    double dr = a[0] - b[0], dc = a[1] - b[1];
    return dr * dr + dc * dc;
}

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::vector<int> dbscan(const std::vector<Point2d>& points, double eps, int min_samples) {
    if (!(eps > 0)) throw ValidationError("dbscan: eps must be positive");
    if (min_samples < 1) throw ValidationError("dbscan: min_samples must be >= 1");
    const int n = static_cast<int>(points.size());
    if (n == 0) return {};

    // cell side eps/sqrt(2): any two points sharing a cell are within eps
    const double s = eps / std::sqrt(2.0);
    const double eps2 = eps * eps;

    std::unordered_map<uint64_t, int> index;
    std::vector<Cell> cells;
    std::vector<std::pair<int64_t, int64_t>> coords;
    std::vector<int> cell_of(n);
    for (int i = 0; i < n; ++i) {
        int64_t cx = static_cast<int64_t>(std::floor(points[i][0] / s));
        int64_t cy = static_cast<int64_t>(std::floor(points[i][1] / s));
        auto [it, inserted] = index.try_emplace(cell_key(cx, cy), static_cast<int>(cells.size()));
        if (inserted) {
            cells.emplace_back();
            coords.emplace_back(cx, cy);
        }
        Cell& cell = cells[it->second];
        cell.pts.push_back(i);
        cell.min_r = std::min(cell.min_r, points[i][0]);
        cell.max_r = std::max(cell.max_r, points[i][0]);
        cell.min_c = std::min(cell.min_c, points[i][1]);
        cell.max_c = std::max(cell.max_c, points[i][1]);
        cell_of[i] = it->second;
    }

    auto neighbor_cells = [&](int ci) {
        std::vector<int> out;
        auto [cx, cy] = coords[ci];
        for (int64_t dx = -2; dx <= 2; ++dx)
            for (int64_t dy = -2; dy <= 2; ++dy) {
                auto it = index.find(cell_key(cx + dx, cy + dy));
                if (it != index.end()) out.push_back(it->second);
            }
        return out;
    };

    // core determination
    std::vector<uint8_t> is_core(n, 0);
    for (int ci = 0; ci < static_cast<int>(cells.size()); ++ci) {
        Cell& cell = cells[ci];
        if (static_cast<int>(cell.pts.size()) >= min_samples) {
            for (int p : cell.pts) is_core[p] = 1;
            cell.cores = cell.pts;
            continue;
        }
        auto nbrs = neighbor_cells(ci);
        for (int p : cell.pts) {
            int count = 0;
            for (int nc : nbrs) {
                const Cell& other = cells[nc];
                if (min_dist2_to_box(points[p], other) > eps2) continue;
                if (max_dist2_to_box(points[p], other) <= eps2) {
                    count += static_cast<int>(other.pts.size());
                } else {
                    for (int q : other.pts)
                        if (dist2(points[p], points[q]) <= eps2) ++count;
                }
                if (count >= min_samples) break;
            }
            if (count >= min_samples) {
                is_core[p] = 1;
                cell.cores.push_back(p);
            }
        }
    }

    // core connectivity: cores sharing a cell are mutually within eps, so
    // one cross-cell link merges entire cells
    DisjointSet ds(n);
    for (const Cell& cell : cells)
        for (size_t i = 1; i < cell.cores.size(); ++i) ds.unite(cell.cores[0], cell.cores[i]);
    for (int ci = 0; ci < static_cast<int>(cells.size()); ++ci) {
        const Cell& a = cells[ci];
        if (a.cores.empty()) continue;
        for (int cj : neighbor_cells(ci)) {
            if (cj <= ci) continue;  // each unordered pair once
            const Cell& b = cells[cj];
            if (b.cores.empty()) continue;
            if (min_dist2_box_box(a, b) > eps2) continue;
            if (max_dist2_box_box(a, b) <= eps2) {
                ds.unite(a.cores[0], b.cores[0]);
                continue;
            }
            bool linked = false;
            for (int p : a.cores) {
                for (int q : b.cores)
                    if (dist2(points[p], points[q]) <= eps2) {
                        ds.unite(p, q);
                        linked = true;
                        break;
                    }
                if (linked) break;
            }
        }
    }

    // number clusters by first core point in input order
    std::vector<int> labels(n, -1);
    std::unordered_map<int, int> cluster_of_root;
    int next_cluster = 0;
    for (int i = 0; i < n; ++i) {
        if (!is_core[i]) continue;
        int root = ds.find(i);
        auto [it, inserted] = cluster_of_root.try_emplace(root, next_cluster);
        if (inserted) ++next_cluster;
        labels[i] = it->second;
    }

    // border points follow their smallest-input-index core neighbor
    std::vector<int> cell_min_core(cells.size(), -1);
    for (size_t ci = 0; ci < cells.size(); ++ci)
        if (!cells[ci].cores.empty()) cell_min_core[ci] = cells[ci].cores.front();
    for (int i = 0; i < n; ++i) {
        if (is_core[i]) continue;
        int best = -1;
        for (int nc : neighbor_cells(cell_of[i])) {
            const Cell& other = cells[nc];
            if (other.cores.empty()) continue;
            if (best >= 0 && cell_min_core[nc] >= best) continue;
            if (min_dist2_to_box(points[i], other) > eps2) continue;
            if (max_dist2_to_box(points[i], other) <= eps2) {
                best = cell_min_core[nc];
                continue;
            }
            for (int q : other.cores) {
                if (best >= 0 && q >= best) break;  // cores ascending
                if (dist2(points[i], points[q]) <= eps2) {
                    best = q;
                    break;
                }
            }
        }
        if (best >= 0) labels[i] = labels[best];
    }
    return labels;
}

namespace {

// Rebuilds records after an id-rewriting step. With full semantics at hand
// the records are re-voted from scratch; otherwise the per-id hints carry
// the inherited class/confidence and only geometry is recomputed.
void finalize_records(InstanceLabelMap& m, const std::map<uint32_t, InstanceRecord>& hints,
                      const SemanticLabelMap* labels, const SemanticProbMap* probs,
                      const ClassCatalog* catalog) {
    if (labels && probs && catalog) {
        assign_class_and_confidence(m, *labels, *probs, *catalog);
        return;
    }
    m.records.clear();
    for (const auto& [id, rec] : hints) {
        (void)id;
        m.records.push_back(rec);
    }
    rebuild_geometry(m);
}

std::map<uint32_t, Point2d> mean_predicted_centroids(const InstanceLabelMap& instances,
                                                     const OffsetField& offsets) {
    std::map<uint32_t, Point2d> sums;
    std::map<uint32_t, int64_t> counts;
    for (int r = 0; r < instances.height; ++r)
        for (int c = 0; c < instances.width; ++c) {
            uint32_t id = instances.at(r, c);
            if (id == 0) continue;
            auto it = sums.try_emplace(id, Point2d{0.0, 0.0}).first;
            it->second[0] += r + offsets.drow(r, c);
            it->second[1] += c + offsets.dcol(r, c);
            counts[id]++;
        }
    for (auto& [id, s] : sums) {
        s[0] /= counts[id];
        s[1] /= counts[id];
    }
    return sums;
}

}  // namespace

InstanceLabelMap split_instances(const InstanceLabelMap& instances, const OffsetField& offsets,
                                 const RefineParams& params, const SemanticLabelMap* labels,
                                 const SemanticProbMap* probs, const ClassCatalog* catalog) {
    const int h = instances.height, w = instances.width;
    if (offsets.height != h || offsets.width != w)
        throw ValidationError("split_instances: dimension mismatch");

    // pixels per instance, ascending id
    std::map<uint32_t, std::vector<int>> pixels;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            uint32_t id = instances.at(r, c);
            if (id) pixels[id].push_back(r * w + c);
        }

    struct SplitPlan {
        uint32_t id = 0;
        int n_clusters = 0;              // < 2: keep as-is
        std::vector<int> pixel_cluster;  // per pixel of the instance
    };
    std::vector<SplitPlan> plans(pixels.size());
    std::vector<const std::pair<const uint32_t, std::vector<int>>*> items;
    items.reserve(pixels.size());
    for (const auto& kv : pixels) items.push_back(&kv);

#pragma omp parallel for schedule(dynamic)
    for (int ii = 0; ii < static_cast<int>(items.size()); ++ii) {
        const auto& px = items[ii]->second;
        SplitPlan& plan = plans[ii];
        plan.id = items[ii]->first;

        std::vector<Point2d> pts(px.size());
        for (size_t i = 0; i < px.size(); ++i) {
            int r = px[i] / w, c = px[i] % w;
            pts[i] = {r + offsets.drow(r, c), c + offsets.dcol(r, c)};
        }
        int ms = params.min_samples_for(static_cast<int64_t>(px.size()));
        std::vector<int> cl = dbscan(pts, params.eps, ms);

        int k = 0;
        for (int v : cl) k = std::max(k, v + 1);
        if (k < 2) continue;  // no distinct centroids found

        std::vector<Point2d> means(k, {0, 0});
        std::vector<int64_t> counts(k, 0);
        for (size_t i = 0; i < cl.size(); ++i)
            if (cl[i] >= 0) {
                means[cl[i]][0] += pts[i][0];
                means[cl[i]][1] += pts[i][1];
                counts[cl[i]]++;
            }
        for (int j = 0; j < k; ++j) {
            means[j][0] /= counts[j];
            means[j][1] /= counts[j];
        }

        // split only when every pair of cluster means is at least eps apart
        bool all_far = true;
        for (int a = 0; a < k && all_far; ++a)
            for (int b = a + 1; b < k; ++b)
                if (std::sqrt(dist2(means[a], means[b])) < params.eps) {
                    all_far = false;
                    break;
                }
        if (!all_far) continue;

        plan.n_clusters = k;
        plan.pixel_cluster.resize(px.size());
        for (size_t i = 0; i < px.size(); ++i) {
            if (cl[i] >= 0) {
                plan.pixel_cluster[i] = cl[i];
            } else {
                // noise: nearest cluster mean, smaller index on ties
                int best = 0;
                double best_d = dist2(pts[i], means[0]);
                for (int j = 1; j < k; ++j) {
                    double d = dist2(pts[i], means[j]);
                    if (d < best_d) {
                        best_d = d;
                        best = j;
                    }
                }
                plan.pixel_cluster[i] = best;
            }
        }
    }

    InstanceLabelMap out = instances;
    uint32_t next_id = 0;
    for (const auto& kv : pixels) next_id = std::max(next_id, kv.first);
    ++next_id;

    std::map<uint32_t, InstanceRecord> hints;
    for (const auto& rec : instances.records) hints[rec.id] = rec;

    for (size_t ii = 0; ii < plans.size(); ++ii) {
        const SplitPlan& plan = plans[ii];
        if (plan.n_clusters < 2) continue;
        const auto& px = items[ii]->second;
        InstanceRecord parent;
        if (auto it = hints.find(plan.id); it != hints.end()) parent = it->second;
        uint32_t base = next_id;
        next_id += plan.n_clusters;
        hints.erase(plan.id);
        for (int j = 0; j < plan.n_clusters; ++j) {
            InstanceRecord child = parent;  // class/confidence inherited
            child.id = base + j;
            hints[child.id] = child;
        }
        for (size_t i = 0; i < px.size(); ++i) out.ids[px[i]] = base + plan.pixel_cluster[i];
    }

    finalize_records(out, hints, labels, probs, catalog);
    return out;
}

InstanceLabelMap merge_instances(const InstanceLabelMap& instances, const OffsetField& offsets,
                                 const RefineParams& params, const SemanticLabelMap* labels,
                                 const SemanticProbMap* probs, const ClassCatalog* catalog) {
    const int h = instances.height, w = instances.width;
    if (offsets.height != h || offsets.width != w)
        throw ValidationError("merge_instances: dimension mismatch");
    if (instances.records.empty()) return instances;

    auto centroids = mean_predicted_centroids(instances, offsets);
    std::vector<const InstanceRecord*> recs;
    recs.reserve(instances.records.size());
    for (const auto& r : instances.records) recs.push_back(&r);
    const int n = static_cast<int>(recs.size());

    DisjointSet ds(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (params.merge_same_class_only && recs[i]->class_id != recs[j]->class_id) continue;
            auto ci = centroids.find(recs[i]->id), cj = centroids.find(recs[j]->id);
            if (ci == centroids.end() || cj == centroids.end()) continue;
            if (std::sqrt(dist2(ci->second, cj->second)) < params.merge_distance)
                ds.unite(i, j);  // strict "closer than"
        }

    // each connected component collapses onto its smallest member id
    uint32_t max_id = 0;
    for (const auto* r : recs) max_id = std::max(max_id, r->id);
    std::vector<uint32_t> remap(max_id + 1);
    std::iota(remap.begin(), remap.end(), 0);
    std::map<int, uint32_t> root_target;
    for (int i = 0; i < n; ++i) {
        int root = ds.find(i);
        auto it = root_target.find(root);
        if (it == root_target.end() || recs[i]->id < it->second) root_target[root] = recs[i]->id;
    }
    for (int i = 0; i < n; ++i) remap[recs[i]->id] = root_target[ds.find(i)];

    InstanceLabelMap out = instances;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            uint32_t id = out.at(r, c);
            if (id && id <= max_id) out.at(r, c) = remap[id];
        }

    // merged record: majority class by member area (kept deterministic by
    // ascending class id), area-weighted confidence
    std::map<uint32_t, InstanceRecord> hints;
    std::map<uint32_t, std::map<int, int64_t>> class_area;
    std::map<uint32_t, double> conf_sum;
    std::map<uint32_t, int64_t> area_sum;
    for (const auto& rec : instances.records) {
        uint32_t t = remap[rec.id];
        class_area[t][rec.class_id] += rec.area;
        conf_sum[t] += rec.confidence * rec.area;
        area_sum[t] += rec.area;
    }
    for (const auto& [t, areas] : class_area) {
        InstanceRecord rec;
        rec.id = t;
        int64_t best = -1;
        for (const auto& [cls, a] : areas)
            if (a > best) {
                best = a;
                rec.class_id = cls;
            }
        rec.confidence = area_sum.at(t) > 0 ? conf_sum.at(t) / area_sum.at(t) : 1.0;
        hints[t] = rec;
    }

    finalize_records(out, hints, labels, probs, catalog);
    return out;
}

InstanceLabelMap filter_min_area(const InstanceLabelMap& instances, const OffsetField& offsets,
                                 const RefineParams& params, const SemanticLabelMap* labels,
                                 const SemanticProbMap* probs, const ClassCatalog* catalog) {
    const int h = instances.height, w = instances.width;
    if (offsets.height != h || offsets.width != w)
        throw ValidationError("filter_min_area: dimension mismatch");

    std::vector<InstanceRecord> survivors;
    uint32_t max_id = 0;
    for (const auto& rec : instances.records) max_id = std::max(max_id, rec.id);
    std::vector<uint8_t> dissolved(max_id + 1, 0);
    bool any = false;
    for (const auto& rec : instances.records) {
        if (rec.area < params.min_area) {
            dissolved[rec.id] = 1;
            any = true;
        } else {
            survivors.push_back(rec);
        }
    }
    if (!any) return instances;

    InstanceLabelMap out = instances;
    const int n_surv = static_cast<int>(survivors.size());
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            uint32_t id = out.at(r, c);
            if (id == 0 || id > max_id || !dissolved[id]) continue;
            if (n_surv == 0) {
                out.at(r, c) = 0;  // void downstream
                continue;
            }
            double pr = r + offsets.drow(r, c), pc = c + offsets.dcol(r, c);
            double best_d = std::numeric_limits<double>::infinity();
            uint32_t best_id = 0;
            for (int i = 0; i < n_surv; ++i) {
                double dr = pr - survivors[i].centroid_row;
                double dc = pc - survivors[i].centroid_col;
                double d = dr * dr + dc * dc;
                if (d < best_d) {  // survivors ascend by id: ties keep smaller
                    best_d = d;
                    best_id = survivors[i].id;
                }
            }
            out.at(r, c) = best_id;
        }
    }

    std::map<uint32_t, InstanceRecord> hints;
    for (const auto& rec : survivors) hints[rec.id] = rec;
    finalize_records(out, hints, labels, probs, catalog);
    return out;
}

InstanceLabelMap refine_instances(const InstanceLabelMap& instances, const OffsetField& offsets,
                                  const RefineParams& params, const SemanticLabelMap* labels,
                                  const SemanticProbMap* probs, const ClassCatalog* catalog) {
    InstanceLabelMap cur = instances;
    if (params.enable_split) cur = split_instances(cur, offsets, params, labels, probs, catalog);
    if (params.enable_merge) cur = merge_instances(cur, offsets, params, labels, probs, catalog);
    cur = filter_min_area(cur, offsets, params, labels, probs, catalog);
    return cur;
}

}  // namespace panseg
