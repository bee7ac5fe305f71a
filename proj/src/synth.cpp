#include "panseg/synth.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "panseg/gt_contour.hpp"
#include "panseg/panoptic.hpp"
#include "panseg/rng.hpp"

namespace panseg {

namespace {

// stable stream tags for the independent noise channels
enum Stream : uint64_t {
    kPlacement = 1,
    kOccluder = 2,
    kBreaks = 3,
    kFalseWalls = 4,
    kFlips = 5,
    kOffsets = 6,
};

struct Shape {
    bool ellipse;
    int r0, c0, h, w;  // bounding box
    int class_id;

    bool contains(int r, int c) const {
        if (!ellipse) return r >= r0 && r < r0 + h && c >= c0 && c < c0 + w;
        double cy = r0 + (h - 1) / 2.0, cx = c0 + (w - 1) / 2.0;
        double ay = h / 2.0, ax = w / 2.0;
        double dy = (r - cy) / ay, dx = (c - cx) / ax;
        return dy * dy + dx * dx <= 1.0;
    }
    int64_t area() const {
        int64_t n = 0;
        for (int r = r0; r < r0 + h; ++r)
            for (int c = c0; c < c0 + w; ++c) n += contains(r, c);
        return n;
    }
    std::pair<double, double> centroid() const {
        double sr = 0, sc = 0;
        int64_t n = 0;
        for (int r = r0; r < r0 + h; ++r)
            for (int c = c0; c < c0 + w; ++c)
                if (contains(r, c)) {
                    sr += r;
                    sc += c;
                    ++n;
                }
        return {sr / n, sc / n};
    }
};

}  // namespace

std::string SceneSpec::to_json() const {
    nlohmann::json j;
    j["height"] = height;
    j["width"] = width;
    j["seed"] = seed;
    j["n_instances"] = n_instances;
    j["rectangles"] = rectangles;
    j["ellipses"] = ellipses;
    j["min_size"] = min_size;
    j["max_size"] = max_size;
    j["min_instance_area"] = min_instance_area;
    j["min_centroid_separation"] = min_centroid_separation;
    j["placement_margin"] = placement_margin;
    j["placement_gap"] = placement_gap;
    j["pair_prob"] = pair_prob;
    j["dilation_rate"] = dilation_rate;
    j["noise"] = {{"contour_break_prob", noise.contour_break_prob},
                  {"contour_break_radius", noise.contour_break_radius},
                  {"semantic_flip_prob", noise.semantic_flip_prob},
                  {"offset_noise_sigma", noise.offset_noise_sigma},
                  {"contour_false_positive_prob", noise.contour_false_positive_prob},
                  {"occluder_prob", noise.occluder_prob}};
    return j.dump(2);
}

SceneSpec SceneSpec::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad scene spec JSON: ") + e.what());
    }
    SceneSpec s;
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.seed = j.value("seed", s.seed);
    s.n_instances = j.value("n_instances", s.n_instances);
    s.rectangles = j.value("rectangles", s.rectangles);
    s.ellipses = j.value("ellipses", s.ellipses);
    s.min_size = j.value("min_size", s.min_size);
    s.max_size = j.value("max_size", s.max_size);
    s.min_instance_area = j.value("min_instance_area", s.min_instance_area);
    s.min_centroid_separation = j.value("min_centroid_separation", s.min_centroid_separation);
    s.placement_margin = j.value("placement_margin", s.placement_margin);
    s.placement_gap = j.value("placement_gap", s.placement_gap);
    s.pair_prob = j.value("pair_prob", s.pair_prob);
    s.dilation_rate = j.value("dilation_rate", s.dilation_rate);
    if (j.contains("noise")) {
        const auto& n = j["noise"];
        s.noise.contour_break_prob = n.value("contour_break_prob", 0.0);
        s.noise.contour_break_radius = n.value("contour_break_radius", 2);
        s.noise.semantic_flip_prob = n.value("semantic_flip_prob", 0.0);
        s.noise.offset_noise_sigma = n.value("offset_noise_sigma", 0.0);
        s.noise.contour_false_positive_prob = n.value("contour_false_positive_prob", 0.0);
        s.noise.occluder_prob = n.value("occluder_prob", 0.0);
    }
    return s;
}

GroundTruth generate_scene(const SceneSpec& spec, const ClassCatalog& catalog) {
    catalog.validate();
    const int h = spec.height, w = spec.width;
    if (h < 4 * spec.min_size || w < 4 * spec.min_size)
        throw ValidationError("generate_scene: scene too small for the configured shapes");
    auto things = catalog.thing_ids();
    auto stuffs = catalog.stuff_ids();
    if (stuffs.size() < 2)
        throw ValidationError("generate_scene: catalog needs two stuff classes for the backdrop");
    if (!spec.rectangles && !spec.ellipses)
        throw ValidationError("generate_scene: no shape kind enabled");

    Rng rng(spec.seed, kPlacement);

    // stuff backdrop: class stuffs[0] with a horizontal band of stuffs[1]
    GroundTruth gt;
    gt.labels = SemanticLabelMap::zeros(h, w);
    for (auto& v : gt.labels.labels) v = static_cast<uint16_t>(stuffs[0]);
    int band_top = h / 8, band_bot = h / 4;
    for (int r = band_top; r < band_bot; ++r)
        for (int c = 0; c < w; ++c) gt.labels.at(r, c) = static_cast<uint16_t>(stuffs[1]);

    // instance placement with rejection sampling; some placements are flush
    // rectangle pairs separated only by the instance contour
    std::vector<Shape> shapes;
    const int max_retries = 400;
    const int pair_side_min =
        std::max(spec.min_size, static_cast<int>(std::ceil(spec.min_centroid_separation)));
    const bool can_pair = spec.pair_prob > 0.0 && pair_side_min <= spec.max_size;

    auto fits_existing = [&](const Shape& s, std::string* blocker) {
        auto [cr, cc] = s.centroid();
        for (const Shape& o : shapes) {
            auto [oc_r, oc_c] = o.centroid();
            if (std::hypot(cr - oc_r, cc - oc_c) < spec.min_centroid_separation) {
                *blocker = "min_centroid_separation";
                return false;
            }
            // expanded bounding boxes must not touch
            int g = spec.placement_gap;
            bool disjoint = s.r0 - g >= o.r0 + o.h || o.r0 - g >= s.r0 + s.h ||
                            s.c0 - g >= o.c0 + o.w || o.c0 - g >= s.c0 + s.w;
            if (!disjoint) {
                *blocker = "placement_gap";
                return false;
            }
        }
        return true;
    };

    int placed = 0;
    while (placed < spec.n_instances) {
        bool as_pair =
            can_pair && placed + 1 < spec.n_instances && rng.uniform() < spec.pair_prob;
        bool done = false;
        std::string blocker = "separation";
        for (int attempt = 0; attempt < max_retries && !done; ++attempt) {
            if (as_pair) {
                bool horizontal = rng.uniform() < 0.5;
                Shape a, b;
                a.ellipse = b.ellipse = false;
                if (horizontal) {  // side by side, sharing a vertical border
                    a.w = static_cast<int>(rng.uniform_int(pair_side_min, spec.max_size));
                    b.w = static_cast<int>(rng.uniform_int(pair_side_min, spec.max_size));
                    a.h = static_cast<int>(rng.uniform_int(spec.min_size, spec.max_size));
                    b.h = static_cast<int>(rng.uniform_int(spec.min_size, spec.max_size));
                    int span_w = a.w + b.w, span_h = std::max(a.h, b.h);
                    if (h - spec.placement_margin - span_h <= spec.placement_margin ||
                        w - spec.placement_margin - span_w <= spec.placement_margin)
                        continue;
                    a.r0 = static_cast<int>(
                        rng.uniform_int(spec.placement_margin, h - spec.placement_margin - span_h));
                    a.c0 = static_cast<int>(
                        rng.uniform_int(spec.placement_margin, w - spec.placement_margin - span_w));
                    b.r0 = a.r0 + (a.h - b.h) / 2;
                    b.r0 = std::clamp(b.r0, spec.placement_margin,
                                      h - spec.placement_margin - b.h);
                    b.c0 = a.c0 + a.w;
                } else {  // stacked, sharing a horizontal border
                    a.h = static_cast<int>(rng.uniform_int(pair_side_min, spec.max_size));
                    b.h = static_cast<int>(rng.uniform_int(pair_side_min, spec.max_size));
                    a.w = static_cast<int>(rng.uniform_int(spec.min_size, spec.max_size));
                    b.w = static_cast<int>(rng.uniform_int(spec.min_size, spec.max_size));
                    int span_h = a.h + b.h, span_w = std::max(a.w, b.w);
                    if (h - spec.placement_margin - span_h <= spec.placement_margin ||
                        w - spec.placement_margin - span_w <= spec.placement_margin)
                        continue;
                    a.r0 = static_cast<int>(
                        rng.uniform_int(spec.placement_margin, h - spec.placement_margin - span_h));
                    a.c0 = static_cast<int>(
                        rng.uniform_int(spec.placement_margin, w - spec.placement_margin - span_w));
                    b.c0 = a.c0 + (a.w - b.w) / 2;
                    b.c0 = std::clamp(b.c0, spec.placement_margin,
                                      w - spec.placement_margin - b.w);
                    b.r0 = a.r0 + a.h;
                }
                a.class_id = things[rng.uniform_int(0, static_cast<int64_t>(things.size()) - 1)];
                b.class_id = things[rng.uniform_int(0, static_cast<int64_t>(things.size()) - 1)];
                if (a.area() < spec.min_instance_area || b.area() < spec.min_instance_area) {
                    blocker = "min_instance_area";
                    continue;
                }
                if (!fits_existing(a, &blocker) || !fits_existing(b, &blocker)) continue;
                shapes.push_back(a);
                shapes.push_back(b);
                placed += 2;
                done = true;
            } else {
                Shape s;
                if (spec.rectangles && spec.ellipses)
                    s.ellipse = rng.uniform() < 0.5;
                else
                    s.ellipse = spec.ellipses;
                s.h = static_cast<int>(rng.uniform_int(spec.min_size, spec.max_size));
                s.w = static_cast<int>(rng.uniform_int(spec.min_size, spec.max_size));
                s.r0 = static_cast<int>(
                    rng.uniform_int(spec.placement_margin, h - spec.placement_margin - s.h));
                s.c0 = static_cast<int>(
                    rng.uniform_int(spec.placement_margin, w - spec.placement_margin - s.w));
                s.class_id = things[rng.uniform_int(0, static_cast<int64_t>(things.size()) - 1)];
                if (s.area() < spec.min_instance_area) {
                    blocker = "min_instance_area";
                    continue;
                }
                if (!fits_existing(s, &blocker)) continue;
                shapes.push_back(s);
                placed += 1;
                done = true;
            }
        }
        if (!done)
            throw ValidationError("generate_scene: cannot place instance " +
                                  std::to_string(placed) + " under constraint '" + blocker +
                                  "' after " + std::to_string(max_retries) + " retries");
    }

    gt.instances = InstanceLabelMap::zeros(h, w);
    for (size_t i = 0; i < shapes.size(); ++i) {
        const Shape& s = shapes[i];
        uint32_t id = static_cast<uint32_t>(i + 1);
        for (int r = s.r0; r < s.r0 + s.h; ++r)
            for (int c = s.c0; c < s.c0 + s.w; ++c)
                if (s.contains(r, c)) {
                    gt.instances.at(r, c) = id;
                    gt.labels.at(r, c) = static_cast<uint16_t>(s.class_id);
                }
    }

    // occluders: thin stuff strips through the middle third of an instance,
    // cutting one id into two 4-disconnected parts
    Rng occ_rng(spec.seed, kOccluder);
    const uint16_t pole = static_cast<uint16_t>(stuffs.size() > 2 ? stuffs[2] : stuffs[1]);
    for (size_t i = 0; i < shapes.size(); ++i) {
        const Shape& s = shapes[i];
        double u = occ_rng.uniform();
        bool vertical = occ_rng.uniform() < 0.5;
        int width_px = static_cast<int>(occ_rng.uniform_int(1, 2));
        double frac = occ_rng.uniform(0.40, 0.60);
        if (u >= spec.noise.occluder_prob) continue;  // draws happen regardless
        if (vertical) {
            int cut = s.c0 + static_cast<int>(frac * s.w);
            for (int r = std::max(0, s.r0 - 1); r < std::min(h, s.r0 + s.h + 1); ++r)
                for (int c = cut; c < std::min(cut + width_px, w); ++c)
                    if (gt.instances.at(r, c) == i + 1) {
                        gt.instances.at(r, c) = 0;
                        gt.labels.at(r, c) = pole;
                    }
        } else {
            int cut = s.r0 + static_cast<int>(frac * s.h);
            for (int c = std::max(0, s.c0 - 1); c < std::min(w, s.c0 + s.w + 1); ++c)
                for (int r = cut; r < std::min(cut + width_px, h); ++r)
                    if (gt.instances.at(r, c) == i + 1) {
                        gt.instances.at(r, c) = 0;
                        gt.labels.at(r, c) = pole;
                    }
        }
    }

    for (size_t i = 0; i < shapes.size(); ++i) {
        InstanceRecord rec;
        rec.id = static_cast<uint32_t>(i + 1);
        rec.class_id = shapes[i].class_id;
        gt.instances.records.push_back(rec);
    }
    rebuild_geometry(gt.instances);

    gt.panoptic = merge_panoptic(gt.labels, gt.instances, catalog);
    return gt;
}

Predictions simulate_predictions(const GroundTruth& gt, const SceneSpec& spec,
                                 const ClassCatalog& catalog) {
    const int h = gt.labels.height, w = gt.labels.width;
    const int k = catalog.num_classes();

    Predictions out;

    // semantic: one-hot of (possibly flipped) labels
    SemanticLabelMap noisy = gt.labels;
    if (spec.noise.semantic_flip_prob > 0.0) {
        Rng rng(spec.seed, kFlips);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                double u = rng.uniform();
                int64_t alt = rng.uniform_int(0, k - 2);
                if (u >= spec.noise.semantic_flip_prob) continue;
                int cur = noisy.at(r, c);
                noisy.at(r, c) = static_cast<uint16_t>(alt >= cur ? alt + 1 : alt);
            }
    }
    out.semantic_probs = SemanticProbMap::zeros(h, w, k);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) out.semantic_probs.at(r, c, noisy.at(r, c)) = 1.f;

    // contours: dilated gt contours as probability 1
    ContourMask thin_contours = extract_contours(gt.instances);
    ContourMask contours = dilate_contours(thin_contours, spec.dilation_rate);

    if (spec.noise.contour_break_prob > 0.0) {
        // Break seeds are drawn per thin-contour pixel from a fixed stream,
        // so the seed set at a smaller probability is a subset of the set at
        // a larger one. Each seed erases the band through its full thickness
        // (radius + dilation rate): a detector that misses a boundary misses
        // the whole stretch, and partially-deep holes would leave orphaned
        // band pockets that read as speckle instances.
        Rng rng(spec.seed, kBreaks);
        std::vector<std::pair<int, int>> seeds;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                if (!thin_contours.at(r, c)) continue;
                if (rng.uniform() < spec.noise.contour_break_prob) seeds.emplace_back(r, c);
            }
        ContourMask broken = contours;
        int rad = spec.noise.contour_break_radius + spec.dilation_rate;
        for (auto [sr, sc] : seeds)
            for (int r = std::max(0, sr - rad); r <= std::min(h - 1, sr + rad); ++r)
                for (int c = std::max(0, sc - rad); c <= std::min(w - 1, sc + rad); ++c)
                    broken.mask[broken.idx(r, c)] = 0;
        contours = std::move(broken);
    }

    if (spec.noise.contour_false_positive_prob > 0.0) {
        // a false wall through an instance cuts a sub-minimum-area fragment
        Rng rng(spec.seed, kFalseWalls);
        for (const auto& rec : gt.instances.records) {
            double u = rng.uniform();
            bool vertical = rng.uniform() < 0.5;
            double frac = rng.uniform(0.18, 0.30);
            bool near_start = rng.uniform() < 0.5;
            if (u >= spec.noise.contour_false_positive_prob) continue;

            // instance bounding box
            int min_r = h, max_r = -1, min_c = w, max_c = -1;
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c)
                    if (gt.instances.at(r, c) == rec.id) {
                        min_r = std::min(min_r, r);
                        max_r = std::max(max_r, r);
                        min_c = std::min(min_c, c);
                        max_c = std::max(max_c, c);
                    }
            if (max_r < 0) continue;
            const int thick = 3;
            if (vertical) {
                int ext = max_c - min_c + 1;
                int cut = near_start ? min_c + static_cast<int>(frac * ext)
                                     : max_c - static_cast<int>(frac * ext) - thick + 1;
                for (int r = min_r; r <= max_r; ++r)
                    for (int c = std::max(0, cut); c < std::min(w, cut + thick); ++c)
                        if (gt.instances.at(r, c) == rec.id) contours.mask[contours.idx(r, c)] = 1;
            } else {
                int ext = max_r - min_r + 1;
                int cut = near_start ? min_r + static_cast<int>(frac * ext)
                                     : max_r - static_cast<int>(frac * ext) - thick + 1;
                for (int c = min_c; c <= max_c; ++c)
                    for (int r = std::max(0, cut); r < std::min(h, cut + thick); ++r)
                        if (gt.instances.at(r, c) == rec.id) contours.mask[contours.idx(r, c)] = 1;
            }
        }
    }

    out.contour_probs = ContourProbMap::zeros(h, w);
    for (size_t i = 0; i < contours.mask.size(); ++i)
        out.contour_probs.probs[i] = contours.mask[i] ? 1.f : 0.f;

    // offsets: exact centroid - position on instance pixels, plus noise
    out.offsets = OffsetField::zeros(h, w);
    uint32_t max_id = 0;
    for (const auto& rec : gt.instances.records) max_id = std::max(max_id, rec.id);
    std::vector<double> cent_r(max_id + 1, 0.0), cent_c(max_id + 1, 0.0);
    for (const auto& rec : gt.instances.records) {
        cent_r[rec.id] = rec.centroid_row;
        cent_c[rec.id] = rec.centroid_col;
    }
    Rng rng(spec.seed, kOffsets);
    const double sigma = spec.noise.offset_noise_sigma;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            uint32_t id = gt.instances.at(r, c);
            if (id == 0) continue;
            double nr = rng.normal(), nc = rng.normal();  // fixed draw order
            out.offsets.drow(r, c) = static_cast<float>(cent_r[id] - r + sigma * nr);
            out.offsets.dcol(r, c) = static_cast<float>(cent_c[id] - c + sigma * nc);
        }

    return out;
}

}  // namespace panseg
