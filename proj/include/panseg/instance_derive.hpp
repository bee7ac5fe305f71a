#pragma once

#include "panseg/types.hpp"

namespace panseg {

struct DeriveParams {
    double contour_threshold = 0.5;  // strictly inside (0,1)
    int connectivity = 4;            // 4 or 8
};

struct DeriveDiagnostics {
    int stuff_modal_instances = 0;  // instances whose overall modal label was stuff
};

/// True exactly where the semantic label is a thing class.
BinaryMask instance_class_mask(const SemanticLabelMap& labels, const ClassCatalog& catalog);

/// class_mask AND NOT (contour_probs > threshold).
BinaryMask boundary_aware_mask(const BinaryMask& class_mask, const ContourProbMap& contour_probs,
                               const DeriveParams& params);

/// Two-pass union-find labeling. Ids are assigned 1,2,... in order of first
/// row-major encounter, so identical inputs give identical id maps.
/// Records are left empty; assign_class_and_confidence fills them.
InstanceLabelMap connected_components(const BinaryMask& mask, int connectivity);

/// Fills records: class = modal thing label over the instance's pixels
/// (smallest class id on ties), confidence = mean of the semantic
/// probability at the assigned class channel, plus area and centroid.
/// Instances whose overall modal label is stuff are counted in diagnostics
/// and re-voted over thing labels only.
void assign_class_and_confidence(InstanceLabelMap& instances, const SemanticLabelMap& labels,
                                 const SemanticProbMap& probs, const ClassCatalog& catalog,
                                 DeriveDiagnostics* diag = nullptr);

/// Gives every id-0 pixel of class_mask an instance id. With offsets, each
/// pixel joins the instance whose centroid is nearest to the pixel's
/// predicted center (position + offset), ties to the smaller id. Without
/// offsets, a layered multi-source BFS over class_mask (4-connectivity)
/// claims pixels, equal-distance ties to the smaller id. Pixels no rule can
/// reach keep id 0. Record areas/centroids are recomputed.
void reassign_contour_pixels(InstanceLabelMap& instances, const BinaryMask& class_mask,
                             const OffsetField* offsets);

/// Re-averages every record's confidence over its current pixel set.
void refresh_confidence(InstanceLabelMap& instances, const SemanticProbMap& probs);

/// Full derivation: argmax -> class mask -> boundary-aware mask -> connected
/// components -> class/confidence -> contour-pixel reassignment (confidence
/// re-averaged over the final pixel sets).
InstanceLabelMap derive_instances(const SemanticProbMap& probs,
                                  const ContourProbMap& contour_probs, const OffsetField* offsets,
                                  const ClassCatalog& catalog, const DeriveParams& params = {},
                                  SemanticLabelMap* out_labels = nullptr,
                                  DeriveDiagnostics* diag = nullptr);

}  // namespace panseg
