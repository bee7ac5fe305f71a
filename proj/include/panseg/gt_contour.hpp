#pragma once

#include "panseg/types.hpp"

namespace panseg {

/// Inner-boundary extraction: a pixel is a contour pixel iff its id is
/// nonzero and its 8-neighborhood contains a different id. Pixels with id 0
/// and the image border both count as "different", so instances touching the
/// frame still get contours. Removing these pixels from the thing mask leaves
/// 4-adjacent instances 4-disconnected.
ContourMask extract_contours(const InstanceLabelMap& instances);

/// Morphological dilation with a square structuring element of side
/// 2*rate+1. rate 0 is the identity.
ContourMask dilate_contours(const ContourMask& mask, int rate);

}  // namespace panseg
