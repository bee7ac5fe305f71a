#include "panseg/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace panseg {

namespace {

std::string pixel_str(int r, int c) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "(%d,%d)", r, c);
    return buf;
}

}  // namespace

bool ClassCatalog::is_thing(int class_id) const {
    if (class_id < 0 || class_id >= num_classes())
        throw ValidationError("class id " + std::to_string(class_id) +
                              " not in catalog (K=" + std::to_string(num_classes()) + ")");
    return classes[class_id].is_thing;
}

std::vector<int> ClassCatalog::thing_ids() const {
    std::vector<int> out;
    for (const auto& e : classes)
        if (e.is_thing) out.push_back(e.id);
    return out;
}

std::vector<int> ClassCatalog::stuff_ids() const {
    std::vector<int> out;
    for (const auto& e : classes)
        if (!e.is_thing) out.push_back(e.id);
    return out;
}

void ClassCatalog::validate() const {
    if (classes.empty()) throw ValidationError("catalog: empty class list");
    for (int i = 0; i < num_classes(); ++i) {
        if (classes[i].id != i)
            throw ValidationError("catalog: class ids must be contiguous from 0, entry " +
                                  std::to_string(i) + " has id " + std::to_string(classes[i].id));
    }
    bool any_thing = false, any_stuff = false;
    for (const auto& e : classes) (e.is_thing ? any_thing : any_stuff) = true;
    if (!any_thing || !any_stuff)
        throw ValidationError("catalog: needs at least one thing and one stuff class");
}

ClassCatalog ClassCatalog::default_synthetic() {
    ClassCatalog cat;
    cat.classes = {
        {0, "background", false}, {1, "band", false}, {2, "pole", false},
        {3, "crate", true},       {4, "disc", true},  {5, "widget", true},
    };
    return cat;
}

size_t BinaryMask::count() const {
    size_t n = 0;
    for (uint8_t v : mask) n += (v != 0);
    return n;
}

const InstanceRecord* InstanceLabelMap::find(uint32_t id) const {
    for (const auto& r : records)
        if (r.id == id) return &r;
    return nullptr;
}

InstanceRecord* InstanceLabelMap::find(uint32_t id) {
    for (auto& r : records)
        if (r.id == id) return &r;
    return nullptr;
}

void validate(const SemanticProbMap& m) {
    if (m.channels < 1) throw ValidationError("semantic_probs: needs at least 1 channel");
    if (m.probs.size() != static_cast<size_t>(m.height) * m.width * m.channels)
        throw ValidationError("semantic_probs: payload size mismatch");
    for (int r = 0; r < m.height; ++r) {
        for (int c = 0; c < m.width; ++c) {
            double sum = 0.0;
            for (int k = 0; k < m.channels; ++k) {
                float v = m.at(r, c, k);
                if (!(v >= 0.f && v <= 1.f))
                    throw ValidationError("semantic_probs: value " + std::to_string(v) +
                                          " out of [0,1] at pixel " + pixel_str(r, c));
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-5)
                throw ValidationError("semantic_probs: channel sum " + std::to_string(sum) +
                                      " != 1 at pixel " + pixel_str(r, c));
        }
    }
}

void validate(const SemanticLabelMap& m, int num_classes) {
    if (m.labels.size() != static_cast<size_t>(m.height) * m.width)
        throw ValidationError("labels: payload size mismatch");
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c)
            if (m.at(r, c) >= num_classes)
                throw ValidationError("labels: class " + std::to_string(m.at(r, c)) +
                                      " >= K=" + std::to_string(num_classes) + " at pixel " +
                                      pixel_str(r, c));
}

void validate(const ContourProbMap& m) {
    if (m.probs.size() != static_cast<size_t>(m.height) * m.width)
        throw ValidationError("contour_probs: payload size mismatch");
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) {
            float v = m.at(r, c);
            if (!(v >= 0.f && v <= 1.f))
                throw ValidationError("contour_probs: value " + std::to_string(v) +
                                      " out of [0,1] at pixel " + pixel_str(r, c));
        }
}

void validate(const OffsetField& m) {
    if (m.offsets.size() != static_cast<size_t>(m.height) * m.width * 2)
        throw ValidationError("offsets: payload size mismatch");
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c)
            if (!std::isfinite(m.drow(r, c)) || !std::isfinite(m.dcol(r, c)))
                throw ValidationError("offsets: non-finite value at pixel " + pixel_str(r, c));
}

void validate(const InstanceLabelMap& m) {
    if (m.ids.size() != static_cast<size_t>(m.height) * m.width)
        throw ValidationError("instances: payload size mismatch");
    std::map<uint32_t, int64_t> area;
    std::map<uint32_t, std::pair<double, double>> sums;
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) {
            uint32_t id = m.at(r, c);
            if (id == 0) continue;
            area[id]++;
            auto& s = sums[id];
            s.first += r;
            s.second += c;
        }
    std::set<uint32_t> with_record;
    for (const auto& rec : m.records) {
        if (rec.id == 0) throw ValidationError("instances: record with id 0");
        if (!with_record.insert(rec.id).second)
            throw ValidationError("instances: duplicate record for id " + std::to_string(rec.id));
        auto it = area.find(rec.id);
        if (it == area.end())
            throw ValidationError("instances: record id " + std::to_string(rec.id) +
                                  " never appears in the id raster");
        if (rec.area != it->second)
            throw ValidationError("instances: record area " + std::to_string(rec.area) +
                                  " != pixel count " + std::to_string(it->second) + " for id " +
                                  std::to_string(rec.id));
        const auto& s = sums[rec.id];
        double cr = s.first / it->second, cc = s.second / it->second;
        if (std::abs(cr - rec.centroid_row) > 1e-6 || std::abs(cc - rec.centroid_col) > 1e-6)
            throw ValidationError("instances: record centroid mismatch for id " +
                                  std::to_string(rec.id));
        if (!(rec.confidence >= 0.0 && rec.confidence <= 1.0))
            throw ValidationError("instances: confidence out of [0,1] for id " +
                                  std::to_string(rec.id));
    }
    for (const auto& [id, a] : area) {
        (void)a;
        if (!with_record.count(id))
            throw ValidationError("instances: id " + std::to_string(id) + " has no record");
    }
}

void validate(const InstanceLabelMap& m, const ClassCatalog& catalog) {
    validate(m);
    for (const auto& rec : m.records)
        if (!catalog.is_thing(rec.class_id))
            throw ValidationError("instances: record class " + std::to_string(rec.class_id) +
                                  " is not a thing class (id " + std::to_string(rec.id) + ")");
}

void validate(const PanopticMap& m, const ClassCatalog& catalog) {
    size_t n = static_cast<size_t>(m.height) * m.width;
    if (m.class_ids.size() != n || m.instance_ids.size() != n)
        throw ValidationError("panoptic: payload size mismatch");
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) {
            size_t i = m.idx(r, c);
            int cls = m.class_ids[i], inst = m.instance_ids[i];
            if (inst >= static_cast<int>(PanopticMap::kEncodeBase))
                throw ValidationError("panoptic: instance id " + std::to_string(inst) +
                                      " >= 1000 at pixel " + pixel_str(r, c));
            if (cls == catalog.void_id()) {
                if (inst != 0)
                    throw ValidationError("panoptic: void pixel with instance id at " +
                                          pixel_str(r, c));
                continue;
            }
            if (catalog.is_thing(cls)) {
                if (inst < 1)
                    throw ValidationError("panoptic: thing pixel without instance id at " +
                                          pixel_str(r, c));
            } else if (inst != 0) {
                throw ValidationError("panoptic: stuff pixel with instance id at " +
                                      pixel_str(r, c));
            }
        }
}

SemanticLabelMap argmax_semantic(const SemanticProbMap& probs) {
    SemanticLabelMap out = SemanticLabelMap::zeros(probs.height, probs.width);
    const int h = probs.height, w = probs.width, k = probs.channels;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const float* p = &probs.probs[probs.idx(r, c, 0)];
            int best = 0;
            float best_v = p[0];
            for (int ch = 1; ch < k; ++ch)
                if (p[ch] > best_v) {  // strict: smallest index wins ties
                    best_v = p[ch];
                    best = ch;
                }
            out.at(r, c) = static_cast<uint16_t>(best);
        }
    }
    return out;
}

void rebuild_geometry(InstanceLabelMap& m) {
    std::map<uint32_t, InstanceRecord> by_id;
    for (const auto& rec : m.records) by_id[rec.id] = rec;

    std::map<uint32_t, int64_t> area;
    std::map<uint32_t, std::pair<double, double>> sums;
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) {
            uint32_t id = m.at(r, c);
            if (id == 0) continue;
            area[id]++;
            auto& s = sums[id];
            s.first += r;
            s.second += c;
        }

    std::vector<InstanceRecord> out;
    out.reserve(area.size());
    for (const auto& [id, a] : area) {
        InstanceRecord rec;
        auto it = by_id.find(id);
        if (it != by_id.end()) rec = it->second;
        rec.id = id;
        rec.area = a;
        rec.centroid_row = sums[id].first / a;
        rec.centroid_col = sums[id].second / a;
        out.push_back(rec);
    }
    m.records = std::move(out);
}

}  // namespace panseg
