#include "panseg/panoptic.hpp"

#include <algorithm>
#include <map>

namespace panseg {

PanopticMap merge_panoptic(const SemanticLabelMap& labels, const InstanceLabelMap& instances,
                           const ClassCatalog& catalog) {
    const int h = labels.height, w = labels.width;
    if (instances.height != h || instances.width != w)
        throw ValidationError("merge_panoptic: dimension mismatch");
    const int k = catalog.num_classes();
    for (uint16_t cls : labels.labels)
        if (cls >= k) throw ValidationError("merge_panoptic: label out of catalog range");

    // dense per-class instance indices, ordered by original id
    uint32_t max_id = 0;
    for (const auto& rec : instances.records) {
        if (!catalog.is_thing(rec.class_id))
            throw ValidationError("merge_panoptic: instance " + std::to_string(rec.id) +
                                  " carries stuff class " + std::to_string(rec.class_id));
        max_id = std::max(max_id, rec.id);
    }
    std::vector<int> dense_index(max_id + 1, 0), inst_class(max_id + 1, -1);
    std::map<int, int> next_per_class;
    for (const auto& rec : instances.records) {  // records ascend by id
        int idx = ++next_per_class[rec.class_id];
        if (idx >= static_cast<int>(PanopticMap::kEncodeBase))
            throw ValidationError("merge_panoptic: class " + std::to_string(rec.class_id) +
                                  " has >= 1000 instances; encoding overflow");
        dense_index[rec.id] = idx;
        inst_class[rec.id] = rec.class_id;
    }

    const int void_id = catalog.void_id();
    std::vector<uint8_t> thing(k, 0);
    for (int i = 0; i < k; ++i) thing[i] = catalog.classes[i].is_thing ? 1 : 0;

    PanopticMap out = PanopticMap::zeros(h, w);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            size_t i = out.idx(r, c);
            uint32_t id = instances.ids[i];
            if (id != 0 && id <= max_id && inst_class[id] >= 0) {
                out.class_ids[i] = static_cast<uint16_t>(inst_class[id]);
                out.instance_ids[i] = static_cast<uint16_t>(dense_index[id]);
            } else if (!thing[labels.labels[i]]) {
                out.class_ids[i] = labels.labels[i];
                out.instance_ids[i] = 0;
            } else {
                // thing pixel the reassignment could not reach
                out.class_ids[i] = static_cast<uint16_t>(void_id);
                out.instance_ids[i] = 0;
            }
        }
    }
    return out;
}

}  // namespace panseg
