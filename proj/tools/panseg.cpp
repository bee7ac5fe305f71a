// panseg: contour-driven panoptic segmentation post-processing toolkit.
//
// Subcommands: gt-contours, loss, derive, refine, panoptic, eval, synth,
// pipeline, ablate. All tensors travel as STF files; reports are JSON
// (ablation tables additionally CSV). Exit codes: 0 ok, 1 validation error,
// 2 I/O or format error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "panseg/gt_contour.hpp"
#include "panseg/losses.hpp"
#include "panseg/panoptic.hpp"
#include "panseg/parallel.hpp"
#include "panseg/pipeline.hpp"
#include "panseg/stf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace panseg;

namespace {

std::string scene_stem(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%04d", index);
    return buf;
}

json read_json_file(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    try {
        json j;
        is >> j;
        return j;
    } catch (const json::exception& e) {
        throw FormatError("bad JSON in " + path.string() + ": " + e.what());
    }
}

void write_json_file(const json& j, const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << j.dump(2) << "\n";
}

ClassCatalog load_catalog(const std::string& path) {
    if (path.empty()) return ClassCatalog::default_synthetic();
    return stf::read_catalog(path);
}

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw IoError("input file not found: " + path);
}

LossWeights parse_weights(const std::string& csv) {
    LossWeights w;
    if (csv.empty()) return w;
    double a, b, c;
    if (std::sscanf(csv.c_str(), "%lf,%lf,%lf", &a, &b, &c) != 3)
        throw ValidationError("weights must be three comma-separated numbers, got '" + csv + "'");
    if (a < 0 || b < 0 || c < 0) throw ValidationError("weights must be non-negative");
    w.lambda_semantic = a;
    w.lambda_contour = b;
    w.lambda_center = c;
    return w;
}

// ---------------------------------------------------------------------------
// pipeline configuration (shared by `pipeline` and `ablate`)
// ---------------------------------------------------------------------------

struct PipelineConfig {
    SceneSpec scene;
    int n_scenes = 1;
    PipelineParams params;
    ClassCatalog catalog = ClassCatalog::default_synthetic();
    LossWeights weights;
    // tensor-input mode (used when `inputs` is present in the config)
    bool tensor_mode = false;
    std::string in_semantic_probs, in_contour_probs, in_offsets;
    std::string in_gt_panoptic, in_gt_labels, in_gt_instances, in_gt_records;
};

PipelineConfig parse_pipeline_config(const json& j) {
    PipelineConfig cfg;
    if (j.contains("scene")) cfg.scene = SceneSpec::from_json(j["scene"].dump());
    cfg.n_scenes = j.value("n_scenes", 1);
    if (j.contains("derive")) {
        cfg.params.derive.contour_threshold =
            j["derive"].value("threshold", cfg.params.derive.contour_threshold);
        cfg.params.derive.connectivity =
            j["derive"].value("connectivity", cfg.params.derive.connectivity);
    }
    if (j.contains("refine")) {
        const auto& r = j["refine"];
        cfg.params.refine.eps = r.value("eps", cfg.params.refine.eps);
        cfg.params.refine.min_samples = r.value("min_samples", cfg.params.refine.min_samples);
        cfg.params.refine.min_area = r.value("min_area", cfg.params.refine.min_area);
        cfg.params.refine.merge_distance =
            r.value("merge_distance", cfg.params.refine.merge_distance);
        cfg.params.refine.merge_same_class_only =
            r.value("same_class_only", cfg.params.refine.merge_same_class_only);
        cfg.params.refine.enable_split = r.value("split", cfg.params.refine.enable_split);
        cfg.params.refine.enable_merge = r.value("merge", cfg.params.refine.enable_merge);
    }
    cfg.params.refine_enabled = j.value("refine_enabled", true);
    if (j.contains("catalog")) {
        if (j["catalog"].is_string()) {
            cfg.catalog = stf::read_catalog(j["catalog"].get<std::string>());
        } else {
            ClassCatalog cat;
            for (const auto& e : j["catalog"].at("classes"))
                cat.classes.push_back({e.at("id").get<int>(), e.at("name").get<std::string>(),
                                       e.at("is_thing").get<bool>()});
            cat.validate();
            cfg.catalog = cat;
        }
    }
    if (j.contains("weights")) {
        auto w = j["weights"];
        cfg.weights = {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()};
    }
    if (j.contains("inputs")) {
        const auto& in = j["inputs"];
        cfg.tensor_mode = true;
        cfg.in_semantic_probs = in.value("semantic_probs", "");
        cfg.in_contour_probs = in.value("contour_probs", "");
        cfg.in_offsets = in.value("offsets", "");
        cfg.in_gt_panoptic = in.value("gt_panoptic", "");
        cfg.in_gt_labels = in.value("gt_labels", "");
        cfg.in_gt_instances = in.value("gt_instances", "");
        cfg.in_gt_records = in.value("gt_records", "");
    }
    return cfg;
}

json config_echo(const PipelineConfig& cfg) {
    json j;
    j["scene"] = json::parse(cfg.scene.to_json());
    j["n_scenes"] = cfg.n_scenes;
    j["derive"] = {{"threshold", cfg.params.derive.contour_threshold},
                   {"connectivity", cfg.params.derive.connectivity}};
    j["refine"] = {{"eps", cfg.params.refine.eps},
                   {"min_samples", cfg.params.refine.min_samples},
                   {"min_area", cfg.params.refine.min_area},
                   {"merge_distance", cfg.params.refine.merge_distance},
                   {"same_class_only", cfg.params.refine.merge_same_class_only},
                   {"split", cfg.params.refine.enable_split},
                   {"merge", cfg.params.refine.enable_merge}};
    j["refine_enabled"] = cfg.params.refine_enabled;
    j["threads"] = max_threads();
    return j;
}

json scores_to_json(const SceneScores& s) {
    json j;
    j["pq"] = s.panoptic.pq;
    j["sq"] = s.panoptic.sq;
    j["rq"] = s.panoptic.rq;
    j["pq_things"] = s.panoptic.pq_things;
    j["sq_things"] = s.panoptic.sq_things;
    j["rq_things"] = s.panoptic.rq_things;
    j["pq_stuff"] = s.panoptic.pq_stuff;
    j["miou"] = s.miou.miou;
    j["ap"] = s.ap.map;
    return j;
}

json timings_to_json(const StageTimings& t) {
    return json{{"synth_ms", t.synth_ms},
                {"derive_ms", t.derive_ms},
                {"refine_ms", t.refine_ms},
                {"panoptic_ms", t.panoptic_ms},
                {"eval_ms", t.eval_ms}};
}

void write_pred_artifacts(const PipelineArtifacts& art, const fs::path& dir,
                          const std::string& stem) {
    fs::create_directories(dir);
    stf::write_tensor(art.pred_labels, dir / (stem + ".semantic.stf"));
    stf::write_tensor(art.instances, dir / (stem + ".instances.stf"));
    stf::write_records(art.instances, dir / (stem + ".records.json"));
    stf::write_tensor(art.panoptic, dir / (stem + ".panoptic.stf"));
}

void write_gt_artifacts(const GroundTruth& gt, const fs::path& dir, const std::string& stem) {
    fs::create_directories(dir);
    stf::write_tensor(gt.labels, dir / (stem + ".semantic.stf"));
    stf::write_tensor(gt.instances, dir / (stem + ".instances.stf"));
    stf::write_records(gt.instances, dir / (stem + ".records.json"));
    stf::write_tensor(gt.panoptic, dir / (stem + ".panoptic.stf"));
}

// ---------------------------------------------------------------------------
// subcommand implementations
// ---------------------------------------------------------------------------

int cmd_gt_contours(const std::string& instances_path, int rate, const std::string& out,
                    const std::string& debug_pgm) {
    require_file(instances_path);
    InstanceLabelMap instances = stf::read_instances(instances_path);
    ContourMask contours = dilate_contours(extract_contours(instances), rate);
    stf::write_tensor(contours, out);
    if (!debug_pgm.empty()) stf::write_pgm(contours, debug_pgm);
    std::cout << "contours: " << contours.count() << " pixels -> " << out << "\n";
    return 0;
}

int cmd_loss(const std::vector<std::string>& probs_paths, const std::vector<std::string>& gt_paths,
             const std::string& weights_csv, int window, const std::string& report_path) {
    if (probs_paths.size() != gt_paths.size())
        throw ValidationError("--probs and --gt must be given the same number of times");
    LossWeights weights = parse_weights(weights_csv);

    json rep;
    double semantic = 0, wbce_v = 0, huber_c = 0, nms_v = 0, center = 0;
    for (size_t i = 0; i < probs_paths.size(); ++i) {
        require_file(probs_paths[i]);
        require_file(gt_paths[i]);
        stf::Header hdr = stf::peek(probs_paths[i]);
        switch (hdr.tag) {
            case stf::Tag::SemanticProbs: {
                SemanticProbMap probs = stf::read_semantic_probs(probs_paths[i]);
                SemanticLabelMap gt = stf::read_labels(gt_paths[i]);
                semantic = semantic_ce(probs, gt, false).value;
                break;
            }
            case stf::Tag::ContourProbs: {
                ContourProbMap probs = stf::read_contour_probs(probs_paths[i]);
                ContourMask gt = stf::read_contour_mask(gt_paths[i]);
                wbce_v = weighted_bce(probs, gt, false).value;
                huber_c = huber(probs, gt, 0.3, false).value;
                LossValue nl = nms_loss(probs, gt, window, false);
                nms_v = nl.value;
                rep["nms_skipped_pixels"] = nl.skipped;
                break;
            }
            case stf::Tag::Offsets: {
                OffsetField pred = stf::read_offsets(probs_paths[i]);
                OffsetField gt = stf::read_offsets(gt_paths[i]);
                center = huber(pred, gt, 1.0, false).value;
                break;
            }
            default:
                throw ValidationError("loss: unsupported prediction tensor tag in " +
                                      probs_paths[i]);
        }
    }
    LossReport total = total_loss(semantic, wbce_v, huber_c, nms_v, center, weights);
    rep["semantic"] = total.semantic;
    rep["wbce"] = total.wbce;
    rep["huber_contour"] = total.huber_contour;
    rep["nms"] = total.nms;
    rep["center"] = total.center;
    rep["total"] = total.total;
    rep["weights"] = {weights.lambda_semantic, weights.lambda_contour, weights.lambda_center};
    write_json_file(rep, report_path);
    std::cout << "total loss " << total.total << " -> " << report_path << "\n";
    return 0;
}

int cmd_derive(const std::string& probs_path, const std::string& contours_path,
               const std::string& offsets_path, double threshold, int connectivity,
               const std::string& catalog_path, const std::string& out,
               const std::string& records_out, const std::string& labels_out) {
    require_file(probs_path);
    require_file(contours_path);
    SemanticProbMap probs = stf::read_semantic_probs(probs_path);
    ContourProbMap contours = stf::read_contour_probs(contours_path);
    OffsetField offsets;
    bool have_offsets = !offsets_path.empty();
    if (have_offsets) {
        require_file(offsets_path);
        offsets = stf::read_offsets(offsets_path);
    }
    ClassCatalog catalog = load_catalog(catalog_path);

    DeriveParams params;
    params.contour_threshold = threshold;
    params.connectivity = connectivity;
    SemanticLabelMap labels;
    DeriveDiagnostics diag;
    InstanceLabelMap instances = derive_instances(
        probs, contours, have_offsets ? &offsets : nullptr, catalog, params, &labels, &diag);

    stf::write_tensor(instances, out);
    if (!records_out.empty()) stf::write_records(instances, records_out);
    if (!labels_out.empty()) stf::write_tensor(labels, labels_out);
    std::cout << "derived " << instances.records.size() << " instances";
    if (diag.stuff_modal_instances)
        std::cout << " (" << diag.stuff_modal_instances << " stuff-modal, re-voted)";
    std::cout << " -> " << out << "\n";
    return 0;
}

int cmd_refine(const std::string& instances_path, const std::string& offsets_path,
               const std::string& records_path, const RefineParams& params,
               const std::string& out, const std::string& records_out) {
    require_file(instances_path);
    require_file(offsets_path);
    InstanceLabelMap instances = stf::read_instances(instances_path);
    if (!records_path.empty()) {
        require_file(records_path);
        stf::read_records(instances, records_path);
    }
    OffsetField offsets = stf::read_offsets(offsets_path);

    InstanceLabelMap refined = refine_instances(instances, offsets, params);
    stf::write_tensor(refined, out);
    if (!records_out.empty()) stf::write_records(refined, records_out);
    std::cout << "refined " << instances.records.size() << " -> " << refined.records.size()
              << " instances -> " << out << "\n";
    return 0;
}

int cmd_panoptic(const std::string& semantic_path, const std::string& instances_path,
                 const std::string& records_path, const std::string& catalog_path,
                 const std::string& out, const std::string& debug_ppm) {
    require_file(semantic_path);
    require_file(instances_path);
    ClassCatalog catalog = load_catalog(catalog_path);

    stf::Header hdr = stf::peek(semantic_path);
    SemanticLabelMap labels;
    SemanticProbMap probs;
    bool have_probs = false;
    if (hdr.tag == stf::Tag::SemanticProbs) {
        probs = stf::read_semantic_probs(semantic_path);
        labels = argmax_semantic(probs);
        have_probs = true;
    } else {
        labels = stf::read_labels(semantic_path);
    }

    InstanceLabelMap instances = stf::read_instances(instances_path);
    if (!records_path.empty()) {
        require_file(records_path);
        stf::read_records(instances, records_path);
    } else {
        // no records available: re-vote classes from the semantics
        if (!have_probs) {
            probs = SemanticProbMap::zeros(labels.height, labels.width, catalog.num_classes());
            for (int r = 0; r < labels.height; ++r)
                for (int c = 0; c < labels.width; ++c) probs.at(r, c, labels.at(r, c)) = 1.f;
        }
        assign_class_and_confidence(instances, labels, probs, catalog);
    }

    PanopticMap pan = merge_panoptic(labels, instances, catalog);
    stf::write_tensor(pan, out);
    if (!debug_ppm.empty()) stf::write_debug_ppm(pan, debug_ppm);
    std::cout << "panoptic map -> " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
             const std::string& catalog_path, const std::string& report_path) {
    ClassCatalog catalog = load_catalog(catalog_path);
    if (!fs::is_directory(gt_dir)) throw IoError("gt dir not found: " + gt_dir);
    if (!fs::is_directory(pred_dir)) throw IoError("pred dir not found: " + pred_dir);

    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(gt_dir)) {
        std::string name = entry.path().filename().string();
        const std::string suffix = ".panoptic.stf";
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            stems.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(stems.begin(), stems.end());
    if (stems.empty()) throw IoError("no *.panoptic.stf ground truth found in " + gt_dir);

    std::map<int, PerClassPQ> pq_total;
    const int k = catalog.num_classes();
    std::vector<int64_t> confusion(static_cast<size_t>(k) * k, 0);
    ApAccumulator ap_acc;
    bool any_semantic = false, any_instances = false;
    json per_scene = json::array();

    for (const std::string& stem : stems) {
        fs::path gp = fs::path(gt_dir) / (stem + ".panoptic.stf");
        fs::path pp = fs::path(pred_dir) / (stem + ".panoptic.stf");
        require_file(pp.string());
        PanopticMap gt_pan = stf::read_panoptic(gp);
        PanopticMap pred_pan = stf::read_panoptic(pp);
        auto stats = panoptic_stats(pred_pan, gt_pan, catalog);
        accumulate_stats(pq_total, stats);
        json row;
        row["stem"] = stem;
        row["pq"] = scores_from_stats(stats, catalog).pq;

        fs::path gsem = fs::path(gt_dir) / (stem + ".semantic.stf");
        fs::path psem = fs::path(pred_dir) / (stem + ".semantic.stf");
        if (fs::exists(gsem) && fs::exists(psem)) {
            SemanticLabelMap g = stf::read_labels(gsem), p = stf::read_labels(psem);
            accumulate_confusion(confusion, k, p, g);
            row["miou"] = mean_iou(p, g, catalog).miou;
            any_semantic = true;
        }

        fs::path gin = fs::path(gt_dir) / (stem + ".instances.stf");
        fs::path pin = fs::path(pred_dir) / (stem + ".instances.stf");
        if (fs::exists(gin) && fs::exists(pin)) {
            InstanceLabelMap g = stf::read_instances(gin), p = stf::read_instances(pin);
            fs::path grec = fs::path(gt_dir) / (stem + ".records.json");
            fs::path prec = fs::path(pred_dir) / (stem + ".records.json");
            if (fs::exists(grec)) stf::read_records(g, grec);
            if (fs::exists(prec)) stf::read_records(p, prec);
            ap_acc.add_scene(p, g);
            any_instances = true;
        }
        per_scene.push_back(row);
    }

    PanopticScores pq = scores_from_stats(pq_total, catalog);
    json rep;
    rep["n_scenes"] = stems.size();
    rep["pq"] = pq.pq;
    rep["sq"] = pq.sq;
    rep["rq"] = pq.rq;
    rep["pq_things"] = pq.pq_things;
    rep["sq_things"] = pq.sq_things;
    rep["rq_things"] = pq.rq_things;
    rep["pq_stuff"] = pq.pq_stuff;
    json per_class = json::object();
    for (const auto& [cls, s] : pq.per_class)
        per_class[std::to_string(cls)] = {
            {"iou_sum", s.iou_sum}, {"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}};
    rep["pq_per_class"] = per_class;
    if (any_semantic) {
        MeanIoU m = miou_from_confusion(confusion, k);
        rep["miou"] = m.miou;
        json pc = json::object();
        for (const auto& [cls, v] : m.per_class) pc[std::to_string(cls)] = v;
        rep["miou_per_class"] = pc;
    }
    if (any_instances) {
        MaskAp ap = ap_acc.compute();
        rep["ap"] = ap.map;
        json pt = json::object();
        for (const auto& [thr, v] : ap.per_threshold) {
            char key[16];
            std::snprintf(key, sizeof(key), "%.2f", thr);
            pt[key] = v;
        }
        rep["ap_per_threshold"] = pt;
    }
    rep["scenes"] = per_scene;
    write_json_file(rep, report_path);
    std::cout << "PQ " << pq.pq;
    if (any_semantic) std::cout << "  mIoU " << rep["miou"].get<double>();
    if (any_instances) std::cout << "  AP " << rep["ap"].get<double>();
    std::cout << "  (" << stems.size() << " scenes) -> " << report_path << "\n";
    return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, int count,
              const std::string& catalog_path) {
    SceneSpec base;
    if (!spec_path.empty()) {
        require_file(spec_path);
        std::ifstream is(spec_path);
        std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        base = SceneSpec::from_json(text);
    }
    ClassCatalog catalog = load_catalog(catalog_path);
    fs::path dir(out_dir);
    fs::create_directories(dir / "preds");
    fs::create_directories(dir / "gt");

    json manifest;
    manifest["spec"] = json::parse(base.to_json());
    manifest["scenes"] = json::array();
    stf::write_catalog(catalog, dir / "catalog.json");
    manifest["catalog"] = "catalog.json";

    for (int i = 0; i < count; ++i) {
        SceneSpec spec = base;
        spec.seed = base.seed + static_cast<uint64_t>(i);
        std::string stem = scene_stem(i);
        GroundTruth gt = generate_scene(spec, catalog);
        Predictions preds = simulate_predictions(gt, spec, catalog);
        stf::write_tensor(preds.semantic_probs, dir / "preds" / (stem + ".semantic_probs.stf"));
        stf::write_tensor(preds.contour_probs, dir / "preds" / (stem + ".contour_probs.stf"));
        stf::write_tensor(preds.offsets, dir / "preds" / (stem + ".offsets.stf"));
        write_gt_artifacts(gt, dir / "gt", stem);
        manifest["scenes"].push_back({{"stem", stem}, {"seed", spec.seed}});
    }
    write_json_file(manifest, dir / "manifest.json");
    std::cout << count << " scenes -> " << out_dir << "\n";
    return 0;
}

int run_pipeline_config(const PipelineConfig& cfg, const std::string& out_dir,
                        const std::string& report_path) {
    json rep;
    rep["config"] = config_echo(cfg);
    json scenes = json::array();

    if (cfg.tensor_mode) {
        require_file(cfg.in_semantic_probs);
        require_file(cfg.in_contour_probs);
        SemanticProbMap probs = stf::read_semantic_probs(cfg.in_semantic_probs);
        ContourProbMap contours = stf::read_contour_probs(cfg.in_contour_probs);
        OffsetField offsets;
        bool have_offsets = !cfg.in_offsets.empty();
        if (have_offsets) {
            require_file(cfg.in_offsets);
            offsets = stf::read_offsets(cfg.in_offsets);
        }
        PipelineArtifacts art = run_post_processing(
            probs, contours, have_offsets ? &offsets : nullptr, cfg.catalog, cfg.params);
        if (!out_dir.empty()) write_pred_artifacts(art, fs::path(out_dir) / "pred", "scene_0000");
        json row;
        row["stem"] = "scene_0000";
        if (!cfg.in_gt_panoptic.empty()) {
            require_file(cfg.in_gt_panoptic);
            GroundTruth gt;
            gt.panoptic = stf::read_panoptic(cfg.in_gt_panoptic);
            SceneScores scores;
            scores.panoptic = panoptic_quality(art.panoptic, gt.panoptic, cfg.catalog);
            if (!cfg.in_gt_labels.empty()) {
                gt.labels = stf::read_labels(cfg.in_gt_labels);
                scores.miou = mean_iou(art.pred_labels, gt.labels, cfg.catalog);
            }
            if (!cfg.in_gt_instances.empty()) {
                gt.instances = stf::read_instances(cfg.in_gt_instances);
                if (!cfg.in_gt_records.empty()) stf::read_records(gt.instances, cfg.in_gt_records);
                scores.ap = mask_ap(art.instances, gt.instances);
            }
            row["scores"] = scores_to_json(scores);
        }
        row["timings"] = timings_to_json(art.timings);
        scenes.push_back(row);
    } else {
        std::vector<SceneRun> runs(cfg.n_scenes);
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < cfg.n_scenes; ++i) {
            SceneSpec spec = cfg.scene;
            spec.seed = cfg.scene.seed + static_cast<uint64_t>(i);
            runs[i] = run_synthetic_scene(spec, cfg.catalog, cfg.params);
        }
        double mean_pq = 0, mean_miou = 0, mean_ap = 0;
        for (int i = 0; i < cfg.n_scenes; ++i) {
            const SceneRun& run = runs[i];
            std::string stem = scene_stem(i);
            if (!out_dir.empty()) {
                write_gt_artifacts(run.gt, fs::path(out_dir) / "gt", stem);
                write_pred_artifacts(run.artifacts, fs::path(out_dir) / "pred", stem);
            }
            json row;
            row["stem"] = stem;
            row["seed"] = cfg.scene.seed + static_cast<uint64_t>(i);
            row["scores"] = scores_to_json(run.scores);
            row["timings"] = timings_to_json(run.artifacts.timings);
            scenes.push_back(row);
            mean_pq += run.scores.panoptic.pq;
            mean_miou += run.scores.miou.miou;
            mean_ap += run.scores.ap.map;
        }
        rep["mean"] = {{"pq", mean_pq / cfg.n_scenes},
                       {"miou", mean_miou / cfg.n_scenes},
                       {"ap", mean_ap / cfg.n_scenes}};
    }
    rep["scenes"] = scenes;
    if (!report_path.empty()) write_json_file(rep, report_path);
    if (rep.contains("mean"))
        std::cout << "mean PQ " << rep["mean"]["pq"].get<double>() << " over " << cfg.n_scenes
                  << " scenes\n";
    return 0;
}

// desk-scale analogs of the published ablation axes
int cmd_ablate(const std::string& axis, const std::vector<std::string>& grid,
               const std::string& config_path, const std::string& out_prefix) {
    PipelineConfig base;
    if (!config_path.empty()) base = parse_pipeline_config(read_json_file(config_path));
    if (base.tensor_mode) throw ValidationError("ablate requires a synthetic-scene config");
    if (grid.empty()) throw ValidationError("ablate: empty grid");

    // validate the whole grid before any run starts
    std::vector<PipelineConfig> configs;
    std::vector<std::string> combos;
    for (const std::string& v : grid) {
        PipelineConfig cfg = base;
        if (axis == "dilation_rate") {
            int rate = std::stoi(v);
            if (rate < 0) throw ValidationError("ablate: negative dilation rate " + v);
            cfg.scene.dilation_rate = rate;
        } else if (axis == "min_area") {
            int64_t area = std::stoll(v);
            if (area < 0) throw ValidationError("ablate: negative min_area " + v);
            cfg.params.refine.min_area = area;
        } else if (axis == "refine_flags") {
            if (v == "off") {
                cfg.params.refine_enabled = false;
            } else if (v == "split") {
                cfg.params.refine.enable_split = true;
                cfg.params.refine.enable_merge = false;
            } else if (v == "split+merge") {
                cfg.params.refine.enable_split = true;
                cfg.params.refine.enable_merge = true;
            } else {
                throw ValidationError("ablate: refine_flags value must be off|split|split+merge, got " + v);
            }
        } else if (axis == "loss_combo") {
            if (v != "wbce" && v != "wbce+huber" && v != "wbce+nms" && v != "wbce+huber+nms")
                throw ValidationError("ablate: unknown loss combo " + v);
            combos.push_back(v);
        } else {
            throw ValidationError("ablate: unknown axis " + axis +
                                  " (want dilation_rate|min_area|loss_combo|refine_flags)");
        }
        configs.push_back(cfg);
    }

    json table = json::array();
    std::ofstream csv(out_prefix + ".csv");
    if (!csv) throw IoError("cannot open for writing: " + out_prefix + ".csv");
    csv << "axis,value,ap,pq,pq_things,sq_things,rq_things,miou";
    if (axis == "loss_combo") csv << ",wbce,huber,nms,total_loss";
    csv << "\n";

    for (size_t gi = 0; gi < grid.size(); ++gi) {
        const PipelineConfig& cfg = configs[gi];
        std::vector<SceneRun> runs(cfg.n_scenes);
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < cfg.n_scenes; ++i) {
            SceneSpec spec = cfg.scene;
            spec.seed = cfg.scene.seed + static_cast<uint64_t>(i);
            runs[i] = run_synthetic_scene(spec, cfg.catalog, cfg.params);
        }
        double pq = 0, ap = 0, pq_th = 0, sq_th = 0, rq_th = 0, miou = 0;
        for (const SceneRun& run : runs) {
            pq += run.scores.panoptic.pq;
            ap += run.scores.ap.map;
            pq_th += run.scores.panoptic.pq_things;
            sq_th += run.scores.panoptic.sq_things;
            rq_th += run.scores.panoptic.rq_things;
            miou += run.scores.miou.miou;
        }
        const double n = cfg.n_scenes;
        json row;
        row["axis"] = axis;
        row["value"] = grid[gi];
        row["ap"] = ap / n;
        row["pq"] = pq / n;
        row["pq_things"] = pq_th / n;
        row["sq_things"] = sq_th / n;
        row["rq_things"] = rq_th / n;
        row["miou"] = miou / n;
        csv << axis << "," << grid[gi] << "," << ap / n << "," << pq / n << "," << pq_th / n
            << "," << sq_th / n << "," << rq_th / n << "," << miou / n;

        if (axis == "loss_combo") {
            // contour-loss terms on the simulated predictions; the knob picks
            // which terms enter the total (training itself is out of scope)
            const std::string& combo = combos[gi];
            double wbce_sum = 0, huber_sum = 0, nms_sum = 0, total_sum = 0;
            for (int i = 0; i < cfg.n_scenes; ++i) {
                const SceneRun& run = runs[i];
                ContourMask gt_contours =
                    dilate_contours(extract_contours(run.gt.instances), cfg.scene.dilation_rate);
                double wb = weighted_bce(run.preds.contour_probs, gt_contours, false).value;
                double hb = combo.find("huber") != std::string::npos
                                ? huber(run.preds.contour_probs, gt_contours, 0.3, false).value
                                : 0.0;
                double nm = combo.find("nms") != std::string::npos
                                ? nms_loss(run.preds.contour_probs, gt_contours, 9, false).value
                                : 0.0;
                double ce = semantic_ce(run.preds.semantic_probs, run.gt.labels, false).value;
                wbce_sum += wb;
                huber_sum += hb;
                nms_sum += nm;
                total_sum += total_loss(ce, wb, hb, nm, 0.0, cfg.weights).total;
            }
            row["wbce"] = wbce_sum / n;
            row["huber"] = huber_sum / n;
            row["nms"] = nms_sum / n;
            row["total_loss"] = total_sum / n;
            csv << "," << wbce_sum / n << "," << huber_sum / n << "," << nms_sum / n << ","
                << total_sum / n;
        }
        csv << "\n";
        table.push_back(row);
        std::cout << axis << "=" << grid[gi] << ": PQ " << pq / n << ", AP " << ap / n << "\n";
    }
    write_json_file(table, out_prefix + ".json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contour-driven panoptic segmentation pipeline"};
    app.require_subcommand(1);

    int threads = 0;
    if (const char* env = std::getenv("PANSEG_THREADS")) threads = std::atoi(env);
    app.add_option("--threads", threads, "worker threads (default: PANSEG_THREADS or all cores)");

    // gt-contours
    auto* gc = app.add_subcommand("gt-contours", "instance contours from an instance label map");
    std::string gc_in, gc_out, gc_pgm;
    int gc_rate = 2;
    gc->add_option("--instances", gc_in, "instance label map (STF)")->required();
    gc->add_option("--rate", gc_rate, "dilation rate (default 2)");
    gc->add_option("--out", gc_out, "output contour mask (STF)")->required();
    gc->add_option("--debug-pgm", gc_pgm, "also write a PGM rendering");

    // loss
    auto* lo = app.add_subcommand("loss", "loss values for prediction/target pairs");
    std::vector<std::string> lo_probs, lo_gt;
    std::string lo_weights, lo_report = "loss.json";
    int lo_window = 9;
    lo->add_option("--probs", lo_probs, "prediction tensor (repeatable)")->required();
    lo->add_option("--gt", lo_gt, "matching target tensor (repeatable)")->required();
    lo->add_option("--weights", lo_weights, "lambda_semantic,lambda_contour,lambda_center");
    lo->add_option("--window", lo_window, "sample window for the boundary-sharpness term");
    lo->add_option("--report", lo_report, "output JSON report")->required();

    // derive
    auto* de = app.add_subcommand("derive", "instances from semantics + contours");
    std::string de_probs, de_contours, de_offsets, de_catalog, de_out, de_records, de_labels;
    double de_threshold = 0.5;
    int de_connectivity = 4;
    de->add_option("--semantic-probs", de_probs, "semantic probability tensor")->required();
    de->add_option("--contours", de_contours, "contour probability map")->required();
    de->add_option("--offsets", de_offsets, "center offset field (optional)");
    de->add_option("--threshold", de_threshold, "contour binarization threshold");
    de->add_option("--connectivity", de_connectivity, "4 or 8");
    de->add_option("--catalog", de_catalog, "class catalog JSON (default: built-in)");
    de->add_option("--out", de_out, "output instance map (STF)")->required();
    de->add_option("--records", de_records, "output instance records JSON");
    de->add_option("--labels-out", de_labels, "also write the argmax label map");

    // refine
    auto* re = app.add_subcommand("refine", "split/merge/min-area refinement");
    std::string re_in, re_offsets, re_records, re_out, re_records_out;
    RefineParams re_params;
    bool re_no_merge = false, re_no_split = false, re_cross = false;
    re->add_option("--instances", re_in, "instance map (STF)")->required();
    re->add_option("--records", re_records, "instance records JSON (classes/confidences)");
    re->add_option("--offsets", re_offsets, "center offset field")->required();
    re->add_option("--eps", re_params.eps, "cluster radius / split distance");
    re->add_option("--min-samples", re_params.min_samples, "0 = max(10, 1% of area)");
    re->add_option("--min-area", re_params.min_area, "dissolve instances below this area");
    re->add_option("--merge-distance", re_params.merge_distance, "merge when closer than this");
    re->add_flag("--no-merge", re_no_merge, "skip the merge stage");
    re->add_flag("--no-split", re_no_split, "skip the split stage");
    re->add_flag("--cross-class-merge", re_cross, "allow merging across classes");
    re->add_option("--out", re_out, "output instance map (STF)")->required();
    re->add_option("--out-records", re_records_out, "output records JSON");

    // panoptic
    auto* pa = app.add_subcommand("panoptic", "merge semantics and instances");
    std::string pa_sem, pa_inst, pa_records, pa_catalog, pa_out, pa_ppm;
    pa->add_option("--semantic", pa_sem, "label map or probability tensor")->required();
    pa->add_option("--instances", pa_inst, "instance map (STF)")->required();
    pa->add_option("--records", pa_records, "instance records JSON");
    pa->add_option("--catalog", pa_catalog, "class catalog JSON (default: built-in)");
    pa->add_option("--out", pa_out, "output panoptic map (STF)")->required();
    pa->add_option("--debug-ppm", pa_ppm, "color rendering (PPM)");

    // eval
    auto* ev = app.add_subcommand("eval", "PQ/SQ/RQ, mIoU and AP over scene directories");
    std::string ev_pred, ev_gt, ev_catalog, ev_report = "metrics.json";
    ev->add_option("--pred-dir", ev_pred, "predictions directory")->required();
    ev->add_option("--gt-dir", ev_gt, "ground truth directory")->required();
    ev->add_option("--catalog", ev_catalog, "class catalog JSON (default: built-in)");
    ev->add_option("--report", ev_report, "output JSON report");

    // synth
    auto* sy = app.add_subcommand("synth", "generate synthetic scenes + predictions");
    std::string sy_spec, sy_out = "scenes", sy_catalog;
    int sy_count = 1;
    sy->add_option("--spec", sy_spec, "scene spec JSON (default spec when omitted)");
    sy->add_option("--out-dir", sy_out, "output directory");
    sy->add_option("--count", sy_count, "number of scenes (seeds spec.seed..+count-1)");
    sy->add_option("--catalog", sy_catalog, "class catalog JSON (default: built-in)");

    // pipeline
    auto* pi = app.add_subcommand("pipeline", "derive -> refine -> panoptic -> eval");
    std::string pi_config, pi_out, pi_report = "report.json";
    bool pi_no_refine = false;
    int pi_scenes = 0;
    std::uint64_t pi_seed = 0;
    pi->add_option("--config", pi_config, "pipeline config JSON");
    pi->add_option("--out-dir", pi_out, "write gt/ and pred/ artifact trees here");
    pi->add_option("--report", pi_report, "output JSON report");
    pi->add_flag("--no-refine", pi_no_refine, "skip the refinement stage");
    pi->add_option("--scenes", pi_scenes, "override number of synthetic scenes");
    pi->add_option("--seed", pi_seed, "override the base seed");

    // ablate
    auto* ab = app.add_subcommand("ablate", "metric tables along one parameter axis");
    std::string ab_axis, ab_config, ab_prefix = "ablation";
    std::vector<std::string> ab_grid;
    ab->add_option("--axis", ab_axis, "dilation_rate|min_area|loss_combo|refine_flags")
        ->required();
    ab->add_option("--grid", ab_grid, "grid values")->required()->delimiter(',');
    ab->add_option("--config", ab_config, "base pipeline config JSON");
    ab->add_option("--out-prefix", ab_prefix, "writes <prefix>.csv and <prefix>.json");

    CLI11_PARSE(app, argc, argv);

    try {
        set_max_threads(threads);
        if (gc->parsed()) return cmd_gt_contours(gc_in, gc_rate, gc_out, gc_pgm);
        if (lo->parsed()) return cmd_loss(lo_probs, lo_gt, lo_weights, lo_window, lo_report);
        if (de->parsed())
            return cmd_derive(de_probs, de_contours, de_offsets, de_threshold, de_connectivity,
                              de_catalog, de_out, de_records, de_labels);
        if (re->parsed()) {
            re_params.enable_merge = !re_no_merge;
            re_params.enable_split = !re_no_split;
            re_params.merge_same_class_only = !re_cross;
            return cmd_refine(re_in, re_offsets, re_records, re_params, re_out, re_records_out);
        }
        if (pa->parsed())
            return cmd_panoptic(pa_sem, pa_inst, pa_records, pa_catalog, pa_out, pa_ppm);
        if (ev->parsed()) return cmd_eval(ev_pred, ev_gt, ev_catalog, ev_report);
        if (sy->parsed()) return cmd_synth(sy_spec, sy_out, sy_count, sy_catalog);
        if (pi->parsed()) {
            PipelineConfig cfg;
            if (!pi_config.empty()) cfg = parse_pipeline_config(read_json_file(pi_config));
            if (pi_no_refine) cfg.params.refine_enabled = false;
            if (pi_scenes > 0) cfg.n_scenes = pi_scenes;
            if (pi_seed > 0) cfg.scene.seed = pi_seed;
            return run_pipeline_config(cfg, pi_out, pi_report);
        }
        if (ab->parsed()) return cmd_ablate(ab_axis, ab_grid, ab_config, ab_prefix);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
