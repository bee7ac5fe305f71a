#pragma once

#include <cstdint>
#include <string>

#include "panseg/types.hpp"

namespace panseg {

/// Noise knobs for simulated predictions. Each knob draws from its own RNG
/// stream, so sweeping one knob keeps every other corruption fixed and the
/// corrupted sets nest as the knob grows.
struct NoiseSpec {
    double contour_break_prob = 0.0;  // per contour pixel: seed a break patch
    int contour_break_radius = 2;     // Chebyshev radius zeroed around a seed
    double semantic_flip_prob = 0.0;  // per pixel: relabel to a random class
    double offset_noise_sigma = 0.0;  // gaussian noise per offset component
    double contour_false_positive_prob = 0.0;  // per instance: false wall
    double occluder_prob = 0.0;       // per instance: thin stuff strip through it
};

struct SceneSpec {
    int height = 240, width = 320;
    uint64_t seed = 1;
    int n_instances = 6;
    bool rectangles = true, ellipses = true;
    int min_size = 24, max_size = 48;       // shape extent per axis, pixels
    int64_t min_instance_area = 500;        // resample smaller shapes
    double min_centroid_separation = 40.0;  // 2 * default eps
    int placement_margin = 6;               // to the image border
    int placement_gap = 6;                  // between instance bounding boxes
    // fraction of placements that attach a second rectangle flush against the
    // first, so only the instance contour separates them (members are sized
    // >= min_centroid_separation so the separation invariant still holds)
    double pair_prob = 0.35;
    int dilation_rate = 2;                  // thickness of simulated contours
    NoiseSpec noise;

    std::string to_json() const;
    static SceneSpec from_json(const std::string& text);
};

struct GroundTruth {
    SemanticLabelMap labels;
    InstanceLabelMap instances;
    PanopticMap panoptic;
};

struct Predictions {
    SemanticProbMap semantic_probs;
    ContourProbMap contour_probs;
    OffsetField offsets;
};

/// Deterministic in spec.seed. Stuff background (class 0) with a horizontal
/// band of class 1; instances are rectangles/ellipses of random thing
/// classes placed with the spec's separation constraints. The occluder knob
/// cuts a thin class-2 strip through an instance, leaving one instance id
/// with two disconnected parts. Throws ValidationError when placement runs
/// out of retries, naming the constraint.
GroundTruth generate_scene(const SceneSpec& spec, const ClassCatalog& catalog);

/// Zero noise: one-hot semantic probabilities, ground-truth contours dilated
/// at spec.dilation_rate with probability 1, exact offsets
/// (instance centroid - position; zero on stuff). Knobs corrupt each channel
/// independently and deterministically in spec.seed.
Predictions simulate_predictions(const GroundTruth& gt, const SceneSpec& spec,
                                 const ClassCatalog& catalog);

}  // namespace panseg
