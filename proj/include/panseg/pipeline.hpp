#pragma once

#include "panseg/instance_derive.hpp"
#include "panseg/metrics.hpp"
#include "panseg/refine.hpp"
#include "panseg/synth.hpp"
#include "panseg/types.hpp"

namespace panseg {

struct PipelineParams {
    DeriveParams derive;
    RefineParams refine;
    bool refine_enabled = true;
};

struct StageTimings {
    double synth_ms = 0, derive_ms = 0, refine_ms = 0, panoptic_ms = 0, eval_ms = 0;
};

struct PipelineArtifacts {
    SemanticLabelMap pred_labels;
    InstanceLabelMap instances;
    PanopticMap panoptic;
    StageTimings timings;
};

struct SceneScores {
    PanopticScores panoptic;
    MeanIoU miou;
    MaskAp ap;
};

/// derive -> (refine) -> panoptic on in-memory prediction tensors.
PipelineArtifacts run_post_processing(const SemanticProbMap& probs,
                                      const ContourProbMap& contour_probs,
                                      const OffsetField* offsets, const ClassCatalog& catalog,
                                      const PipelineParams& params);

SceneScores score_scene(const PipelineArtifacts& artifacts, const GroundTruth& gt,
                        const ClassCatalog& catalog);

struct SceneRun {
    GroundTruth gt;
    Predictions preds;
    PipelineArtifacts artifacts;
    SceneScores scores;
};

/// synth -> simulate -> post-processing -> metrics for one seed.
SceneRun run_synthetic_scene(SceneSpec spec, const ClassCatalog& catalog,
                             const PipelineParams& params);

}  // namespace panseg
