#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace panseg {

// Thrown when a tensor violates a domain invariant (bad probability,
// inconsistent instance records, ...). CLI maps this to exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on malformed files (bad magic, truncated payload, wrong dtype/tag).
// CLI maps this, like IoError, to exit code 2.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when the filesystem itself fails (missing file, short write).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Ordered class table. Ids must be contiguous from 0; panoptic operation
/// additionally needs at least one thing and one stuff class.
struct ClassCatalog {
    struct Entry {
        int id = 0;
        std::string name;
        bool is_thing = false;
    };
    std::vector<Entry> classes;

    int num_classes() const { return static_cast<int>(classes.size()); }
    bool is_thing(int class_id) const;
    /// Reserved label for pixels left unassigned by the pipeline; one past
    /// the last catalog id.
    int void_id() const { return num_classes(); }
    std::vector<int> thing_ids() const;
    std::vector<int> stuff_ids() const;

    void validate() const;

    /// Small palette used by the synthetic scene generator and tests:
    /// 3 stuff classes (background, band, pole) + 3 thing classes.
    static ClassCatalog default_synthetic();
};

/// H x W x K per-pixel class probabilities, row-major, channel-minor.
struct SemanticProbMap {
    int height = 0, width = 0, channels = 0;
    std::vector<float> probs;

    static SemanticProbMap zeros(int h, int w, int k) {
        return {h, w, k, std::vector<float>(static_cast<size_t>(h) * w * k, 0.f)};
    }
    size_t idx(int r, int c, int k) const {
        return (static_cast<size_t>(r) * width + c) * channels + k;
    }
    float at(int r, int c, int k) const { return probs[idx(r, c, k)]; }
    float& at(int r, int c, int k) { return probs[idx(r, c, k)]; }
};

/// H x W class ids.
struct SemanticLabelMap {
    int height = 0, width = 0;
    std::vector<uint16_t> labels;

    static SemanticLabelMap zeros(int h, int w) {
        return {h, w, std::vector<uint16_t>(static_cast<size_t>(h) * w, 0)};
    }
    size_t idx(int r, int c) const { return static_cast<size_t>(r) * width + c; }
    uint16_t at(int r, int c) const { return labels[idx(r, c)]; }
    uint16_t& at(int r, int c) { return labels[idx(r, c)]; }
};

/// H x W contour probabilities in [0,1].
struct ContourProbMap {
    int height = 0, width = 0;
    std::vector<float> probs;

    static ContourProbMap zeros(int h, int w) {
        return {h, w, std::vector<float>(static_cast<size_t>(h) * w, 0.f)};
    }
    size_t idx(int r, int c) const { return static_cast<size_t>(r) * width + c; }
    float at(int r, int c) const { return probs[idx(r, c)]; }
    float& at(int r, int c) { return probs[idx(r, c)]; }
};

/// H x W boolean raster (stored as u8). Used for contour masks and for the
/// intermediate thing/boundary masks of instance derivation.
struct BinaryMask {
    int height = 0, width = 0;
    std::vector<uint8_t> mask;

    static BinaryMask zeros(int h, int w) {
        return {h, w, std::vector<uint8_t>(static_cast<size_t>(h) * w, 0)};
    }
    size_t idx(int r, int c) const { return static_cast<size_t>(r) * width + c; }
    bool at(int r, int c) const { return mask[idx(r, c)] != 0; }
    void set(int r, int c, bool v) { mask[idx(r, c)] = v ? 1 : 0; }
    size_t count() const;
};

using ContourMask = BinaryMask;

/// H x W x 2 per-pixel offsets, channel order (d_row, d_col), in pixels.
/// Convention used everywhere: predicted_center(p) = position(p) + offset(p).
struct OffsetField {
    int height = 0, width = 0;
    std::vector<float> offsets;  // 2 channels, interleaved

    static OffsetField zeros(int h, int w) {
        return {h, w, std::vector<float>(static_cast<size_t>(h) * w * 2, 0.f)};
    }
    size_t idx(int r, int c, int ch) const {
        return (static_cast<size_t>(r) * width + c) * 2 + ch;
    }
    float drow(int r, int c) const { return offsets[idx(r, c, 0)]; }
    float dcol(int r, int c) const { return offsets[idx(r, c, 1)]; }
    float& drow(int r, int c) { return offsets[idx(r, c, 0)]; }
    float& dcol(int r, int c) { return offsets[idx(r, c, 1)]; }
};

struct InstanceRecord {
    uint32_t id = 0;
    int class_id = 0;
    int64_t area = 0;
    double centroid_row = 0.0, centroid_col = 0.0;
    double confidence = 1.0;
};

/// H x W instance ids (0 = no instance) plus one record per nonzero id.
struct InstanceLabelMap {
    int height = 0, width = 0;
    std::vector<uint32_t> ids;
    std::vector<InstanceRecord> records;  // sorted by id

    static InstanceLabelMap zeros(int h, int w) {
        return {h, w, std::vector<uint32_t>(static_cast<size_t>(h) * w, 0), {}};
    }
    size_t idx(int r, int c) const { return static_cast<size_t>(r) * width + c; }
    uint32_t at(int r, int c) const { return ids[idx(r, c)]; }
    uint32_t& at(int r, int c) { return ids[idx(r, c)]; }
    const InstanceRecord* find(uint32_t id) const;
    InstanceRecord* find(uint32_t id);
};

/// H x W (class_id, instance_id) pairs. Stuff pixels carry instance_id 0,
/// thing pixels ids >= 1. Encoded on disk as class_id * 1000 + instance_id.
struct PanopticMap {
    static constexpr uint32_t kEncodeBase = 1000;

    int height = 0, width = 0;
    std::vector<uint16_t> class_ids;
    std::vector<uint16_t> instance_ids;

    static PanopticMap zeros(int h, int w) {
        size_t n = static_cast<size_t>(h) * w;
        return {h, w, std::vector<uint16_t>(n, 0), std::vector<uint16_t>(n, 0)};
    }
    size_t idx(int r, int c) const { return static_cast<size_t>(r) * width + c; }
    uint32_t encoded(size_t i) const {
        return static_cast<uint32_t>(class_ids[i]) * kEncodeBase + instance_ids[i];
    }
    static uint32_t encode(int class_id, int instance_id) {
        return static_cast<uint32_t>(class_id) * kEncodeBase +
               static_cast<uint32_t>(instance_id);
    }
    static std::pair<int, int> decode(uint32_t encoded) {
        return {static_cast<int>(encoded / kEncodeBase),
                static_cast<int>(encoded % kEncodeBase)};
    }
};

// Invariant checks. Each throws ValidationError naming the first offending
// pixel in row-major order.
void validate(const SemanticProbMap& m);
void validate(const SemanticLabelMap& m, int num_classes);
void validate(const ContourProbMap& m);
void validate(const OffsetField& m);
void validate(const InstanceLabelMap& m);
void validate(const InstanceLabelMap& m, const ClassCatalog& catalog);
void validate(const PanopticMap& m, const ClassCatalog& catalog);

/// Per pixel, the smallest class index attaining the maximum probability.
SemanticLabelMap argmax_semantic(const SemanticProbMap& probs);

/// Recomputes area and centroid of every record from the id raster, drops
/// records whose id no longer appears, and creates records (class/confidence
/// defaulted) for ids that lack one. Keeps records sorted by id.
void rebuild_geometry(InstanceLabelMap& m);

}  // namespace panseg
