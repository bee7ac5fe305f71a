#pragma once

#include "panseg/types.hpp"

namespace panseg {

/// Merges semantic labels with instances, conflict-free by construction:
/// stuff pixels keep (label, 0); pixels with an instance id take the
/// instance's class and a dense per-class index >= 1 (ordered by original
/// id); thing-labeled pixels left without an instance become (void, 0) with
/// void = K. Throws ValidationError if an instance record carries a stuff
/// class or a class needs >= 1000 instance indices.
PanopticMap merge_panoptic(const SemanticLabelMap& labels, const InstanceLabelMap& instances,
                           const ClassCatalog& catalog);

}  // namespace panseg
