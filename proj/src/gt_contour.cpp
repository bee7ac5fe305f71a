#include "panseg/gt_contour.hpp"

#include <algorithm>

namespace panseg {

ContourMask extract_contours(const InstanceLabelMap& instances) {
    const int h = instances.height, w = instances.width;
    ContourMask out = ContourMask::zeros(h, w);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            uint32_t id = instances.at(r, c);
            if (id == 0) continue;
            bool boundary = false;
            for (int dr = -1; dr <= 1 && !boundary; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    int nr = r + dr, nc = c + dc;
                    if (nr < 0 || nr >= h || nc < 0 || nc >= w || instances.at(nr, nc) != id) {
                        boundary = true;
                        break;
                    }
                }
            }
            out.mask[out.idx(r, c)] = boundary ? 1 : 0;
        }
    }
    return out;
}

ContourMask dilate_contours(const ContourMask& mask, int rate) {
    if (rate < 0) throw ValidationError("dilate: negative rate");
    if (rate == 0) return mask;
    const int h = mask.height, w = mask.width;

    // The square element is separable: a horizontal sliding-window pass
    // followed by a vertical one, each tracking the count of set pixels in
    // the window.
    ContourMask tmp = ContourMask::zeros(h, w);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r) {
        const uint8_t* in = &mask.mask[mask.idx(r, 0)];
        uint8_t* out = &tmp.mask[tmp.idx(r, 0)];
        int inside = 0;
        for (int c = 0; c < std::min(rate, w); ++c) inside += in[c];
        for (int c = 0; c < w; ++c) {
            int add = c + rate;
            if (add < w) inside += in[add];
            out[c] = inside > 0 ? 1 : 0;
            int drop = c - rate;
            if (drop >= 0) inside -= in[drop];
        }
    }

    ContourMask out = ContourMask::zeros(h, w);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < w; ++c) {
        int inside = 0;
        for (int r = 0; r < std::min(rate, h); ++r) inside += tmp.mask[tmp.idx(r, c)];
        for (int r = 0; r < h; ++r) {
            int add = r + rate;
            if (add < h) inside += tmp.mask[tmp.idx(add, c)];
            out.mask[out.idx(r, c)] = inside > 0 ? 1 : 0;
            int drop = r - rate;
            if (drop >= 0) inside -= tmp.mask[tmp.idx(drop, c)];
        }
    }
    return out;
}

}  // namespace panseg
