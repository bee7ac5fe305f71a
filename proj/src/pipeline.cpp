#include "panseg/pipeline.hpp"

#include <chrono>

#include "panseg/panoptic.hpp"

namespace panseg {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

PipelineArtifacts run_post_processing(const SemanticProbMap& probs,
                                      const ContourProbMap& contour_probs,
                                      const OffsetField* offsets, const ClassCatalog& catalog,
                                      const PipelineParams& params) {
    PipelineArtifacts out;

    auto t0 = std::chrono::steady_clock::now();
    out.instances = derive_instances(probs, contour_probs, offsets, catalog, params.derive,
                                     &out.pred_labels);
    out.timings.derive_ms = ms_since(t0);

    if (params.refine_enabled && offsets) {
        t0 = std::chrono::steady_clock::now();
        out.instances =
            refine_instances(out.instances, *offsets, params.refine, &out.pred_labels, &probs,
                             &catalog);
        out.timings.refine_ms = ms_since(t0);
    }

    t0 = std::chrono::steady_clock::now();
    out.panoptic = merge_panoptic(out.pred_labels, out.instances, catalog);
    out.timings.panoptic_ms = ms_since(t0);
    return out;
}

SceneScores score_scene(const PipelineArtifacts& artifacts, const GroundTruth& gt,
                        const ClassCatalog& catalog) {
    SceneScores s;
    s.panoptic = panoptic_quality(artifacts.panoptic, gt.panoptic, catalog);
    s.miou = mean_iou(artifacts.pred_labels, gt.labels, catalog);
    s.ap = mask_ap(artifacts.instances, gt.instances);
    return s;
}

SceneRun run_synthetic_scene(SceneSpec spec, const ClassCatalog& catalog,
                             const PipelineParams& params) {
    SceneRun run;
    auto t0 = std::chrono::steady_clock::now();
    run.gt = generate_scene(spec, catalog);
    run.preds = simulate_predictions(run.gt, spec, catalog);
    double synth_ms = ms_since(t0);

    run.artifacts = run_post_processing(run.preds.semantic_probs, run.preds.contour_probs,
                                        &run.preds.offsets, catalog, params);
    run.artifacts.timings.synth_ms = synth_ms;

    t0 = std::chrono::steady_clock::now();
    run.scores = score_scene(run.artifacts, run.gt, catalog);
    run.artifacts.timings.eval_ms = ms_since(t0);
    return run;
}

}  // namespace panseg
