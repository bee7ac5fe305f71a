// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Runs the full synthetic-scene battery plus the CLI determinism
// check (needs PANSEG_CLI pointing at the built binary).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "panseg/losses.hpp"
#include "panseg/parallel.hpp"
#include "panseg/pipeline.hpp"
#include "panseg/reference.hpp"
#include "panseg/rng.hpp"

using namespace panseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const ClassCatalog kCat = ClassCatalog::default_synthetic();
int g_failures = 0;

void report(int index, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "A" << index << " " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!pass) ++g_failures;
}

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

double fd_grad(const std::function<double()>& eval, float& x, double h = 1e-4) {
    float orig = x;
    float xp = static_cast<float>(orig + h), xm = static_cast<float>(orig - h);
    x = xp;
    double fp = eval();
    x = xm;
    double fm = eval();
    x = orig;
    return (fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm));
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// ---- A1: perfect-reconstruction identity -----------------------------------

void criterion_identity() {
    double t0 = now_ms();
    bool pass = true;
    std::string detail;
    for (uint64_t seed = 1; seed <= 50 && pass; ++seed) {
        SceneSpec spec;
        spec.seed = seed;
        SceneRun run = run_synthetic_scene(spec, kCat, PipelineParams{});
        const auto& s = run.scores;
        if (s.panoptic.pq != 1.0 || s.panoptic.sq != 1.0 || s.panoptic.rq != 1.0 ||
            s.miou.miou != 1.0 || s.ap.map != 1.0) {
            pass = false;
            std::ostringstream os;
            os << "seed " << seed << ": PQ=" << s.panoptic.pq << " SQ=" << s.panoptic.sq
               << " RQ=" << s.panoptic.rq << " mIoU=" << s.miou.miou << " AP=" << s.ap.map;
            detail = os.str();
        }
    }
    double elapsed = (now_ms() - t0) / 1000.0;
    if (pass && elapsed >= 10.0) {
        pass = false;
        detail = "too slow";
    }
    std::ostringstream os;
    os << "50 scenes, " << elapsed << " s";
    report(1, "perfect-reconstruction identity: PQ=SQ=RQ=mIoU=AP=1.0 exactly", pass,
           detail.empty() ? os.str() : detail);
}

// ---- A2: gradient correctness ----------------------------------------------

void criterion_gradients() {
    Rng rng(4242);
    double worst_ce = 0, worst_wbce = 0, worst_huber = 0, worst_nms = 0;

    for (int trial = 0; trial < 20; ++trial) {
        {  // semantic cross entropy on 4x4x3 tensors
            SemanticProbMap probs = SemanticProbMap::zeros(4, 4, 3);
            SemanticLabelMap gt = SemanticLabelMap::zeros(4, 4);
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) {
                    for (int k = 0; k < 3; ++k)
                        probs.at(r, c, k) = static_cast<float>(rng.uniform(0.05, 0.95));
                    gt.at(r, c) = static_cast<uint16_t>(rng.uniform_int(0, 2));
                }
            LossValue v = semantic_ce(probs, gt);
            auto eval = [&] { return semantic_ce(probs, gt, false).value; };
            for (size_t i = 0; i < probs.probs.size(); ++i)
                worst_ce = std::max(worst_ce, rel_err(v.grad[i], fd_grad(eval, probs.probs[i])));
        }
        {  // weighted bce on 5x5 maps
            ContourProbMap probs = ContourProbMap::zeros(5, 5);
            for (auto& p : probs.probs) p = static_cast<float>(rng.uniform(0.05, 0.95));
            ContourMask gt = ContourMask::zeros(5, 5);
            for (auto& m : gt.mask) m = rng.uniform() < 0.4 ? 1 : 0;
            LossValue v = weighted_bce(probs, gt);
            auto eval = [&] { return weighted_bce(probs, gt, false).value; };
            for (size_t i = 0; i < probs.probs.size(); ++i)
                worst_wbce =
                    std::max(worst_wbce, rel_err(v.grad[i], fd_grad(eval, probs.probs[i])));
        }
        for (double delta : {0.3, 1.0}) {  // huber away from the kink
            std::vector<float> pred(16), gt(16);
            for (size_t i = 0; i < pred.size(); ++i) {
                double r;
                do {
                    r = rng.uniform(-2.0, 2.0);
                } while (std::abs(std::abs(r) - delta) < 1e-2 || std::abs(r) < 1e-2);
                gt[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
                pred[i] = static_cast<float>(gt[i] + r);
            }
            LossValue v = huber(std::span<const float>(pred), std::span<const float>(gt), delta);
            auto eval = [&] {
                return huber(std::span<const float>(pred), std::span<const float>(gt), delta,
                             false)
                    .value;
            };
            for (size_t i = 0; i < pred.size(); ++i)
                worst_huber = std::max(worst_huber, rel_err(v.grad[i], fd_grad(eval, pred[i])));
        }
        {  // nms on a 9x9 diagonal contour
            ContourMask gt = ContourMask::zeros(9, 9);
            for (int i = 0; i < 9; ++i) gt.set(i, i, true);
            ContourProbMap probs = ContourProbMap::zeros(9, 9);
            for (auto& p : probs.probs) p = static_cast<float>(rng.uniform(0.2, 0.8));
            LossValue v = nms_loss(probs, gt, 5);
            auto eval = [&] { return nms_loss(probs, gt, 5, false).value; };
            for (size_t i = 0; i < probs.probs.size(); ++i)
                worst_nms = std::max(worst_nms, rel_err(v.grad[i], fd_grad(eval, probs.probs[i])));
        }
    }
    bool pass = worst_ce < 1e-5 && worst_wbce < 1e-5 && worst_huber < 1e-5 && worst_nms < 1e-4;
    std::ostringstream os;
    os << "max rel err: ce " << worst_ce << ", wbce " << worst_wbce << ", huber " << worst_huber
       << ", nms " << worst_nms;
    report(2, "analytic gradients match central finite differences", pass, os.str());
}

// ---- A3: oracle equivalence --------------------------------------------------

void criterion_oracles() {
    Rng rng(777);
    bool ccl_ok = true;
    for (int trial = 0; trial < 1000 && ccl_ok; ++trial) {
        BinaryMask m = BinaryMask::zeros(32, 32);
        double density = rng.uniform(0.15, 0.8);
        for (auto& v : m.mask) v = rng.uniform() < density ? 1 : 0;
        for (int connectivity : {4, 8})
            if (connected_components(m, connectivity).ids !=
                reference::connected_components_floodfill(m, connectivity).ids)
                ccl_ok = false;
    }

    bool dbscan_ok = true;
    for (int trial = 0; trial < 500 && dbscan_ok; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_int(0, 199));
        std::vector<Point2d> pts(n);
        double spread = rng.uniform(5.0, 150.0);
        for (auto& p : pts) p = {rng.uniform(0, spread), rng.uniform(0, spread)};
        if (trial % 4 == 0)
            for (int i = n / 2; i < n; ++i) pts[i] = pts[i % (n / 2 + 1)];
        double eps = rng.uniform(1.0, 30.0);
        int min_samples = 1 + static_cast<int>(rng.uniform_int(0, 11));
        if (dbscan(pts, eps, min_samples) != reference::dbscan_brute(pts, eps, min_samples))
            dbscan_ok = false;
    }

    bool pq_ok = true;
    auto paint = [](PanopticMap& m, int r0, int c0, int h, int w, int cls, int inst) {
        for (int r = r0; r < r0 + h; ++r)
            for (int c = c0; c < c0 + w; ++c) {
                m.class_ids[m.idx(r, c)] = static_cast<uint16_t>(cls);
                m.instance_ids[m.idx(r, c)] = static_cast<uint16_t>(inst);
            }
    };
    auto random_pan = [&](int h, int w) {
        PanopticMap m = PanopticMap::zeros(h, w);
        int n = static_cast<int>(rng.uniform_int(0, 5));
        std::map<int, int> next_inst;
        for (int i = 0; i < n; ++i) {
            int bh = static_cast<int>(rng.uniform_int(2, h / 2)), bw = static_cast<int>(rng.uniform_int(2, w / 2));
            int r0 = static_cast<int>(rng.uniform_int(0, h - bh)), c0 = static_cast<int>(rng.uniform_int(0, w - bw));
            bool thing = rng.uniform() < 0.6;
            bool make_void = !thing && rng.uniform() < 0.2;
            int cls = make_void ? kCat.void_id()
                      : thing  ? 3 + static_cast<int>(rng.uniform_int(0, 2))
                               : static_cast<int>(rng.uniform_int(0, 2));
            paint(m, r0, c0, bh, bw, cls, thing ? ++next_inst[cls] : 0);
        }
        return m;
    };
    for (int trial = 0; trial < 500 && pq_ok; ++trial) {
        int h = 8 + static_cast<int>(rng.uniform_int(0, 16)), w = 8 + static_cast<int>(rng.uniform_int(0, 16));
        PanopticMap gt = random_pan(h, w);
        PanopticMap pred = random_pan(h, w);
        if (trial % 2) {  // near-copy with dropout
            pred = gt;
            for (size_t i = 0; i < pred.class_ids.size(); ++i)
                if (rng.uniform() < 0.3) {
                    pred.class_ids[i] = 0;
                    pred.instance_ids[i] = 0;
                }
        }
        for (size_t i = 0; i < pred.class_ids.size(); ++i)  // pred never carries void
            if (pred.class_ids[i] == kCat.void_id()) pred.class_ids[i] = 0;
        auto fast = panoptic_stats(pred, gt, kCat);
        auto brute = reference::panoptic_stats_brute(pred, gt, kCat);
        if (fast.size() != brute.size()) pq_ok = false;
        for (const auto& [cls, s] : fast) {
            auto it = brute.find(cls);
            if (it == brute.end() || s.tp != it->second.tp || s.fp != it->second.fp ||
                s.fn != it->second.fn || std::abs(s.iou_sum - it->second.iou_sum) > 1e-9)
                pq_ok = false;
        }
    }

    bool pass = ccl_ok && dbscan_ok && pq_ok;
    std::ostringstream os;
    os << "ccl(1000x2) " << (ccl_ok ? "ok" : "MISMATCH") << ", dbscan(500) "
       << (dbscan_ok ? "ok" : "MISMATCH") << ", pq-match(500) " << (pq_ok ? "ok" : "MISMATCH");
    report(3, "labeling/clustering/matching equal brute-force oracles", pass, os.str());
}

// ---- A4: loss-value pins -----------------------------------------------------

void criterion_loss_pins() {
    ContourProbMap probs = ContourProbMap::zeros(1, 2);
    probs.at(0, 0) = 0.8f;
    probs.at(0, 1) = 0.2f;
    ContourMask gt = ContourMask::zeros(1, 2);
    gt.set(0, 0, true);
    double wbce = weighted_bce(probs, gt, false).value;
    bool wbce_ok = std::abs(wbce - 0.22314) < 1e-5;

    std::vector<float> one = {1.f}, zero = {0.f};
    double hub = huber(std::span<const float>(one), std::span<const float>(zero), 0.3, false).value;
    bool huber_ok = hub == 0.255;

    double composed = total_loss(1.0, 1.0, 0.0, 0.0, 1.0, {}).total;
    bool total_ok = composed == 51.1;

    LossWeights twice{1.0, 100.0, 0.1};
    double base_contour = total_loss(0, 0.3, 0.2, 0.1, 0, {}).total;
    double twice_contour = total_loss(0, 0.3, 0.2, 0.1, 0, twice).total;
    bool linear_ok = rel_err(twice_contour, 2.0 * base_contour) < 1e-12;

    bool pass = wbce_ok && huber_ok && total_ok && linear_ok;
    std::ostringstream os;
    os << "wbce=" << wbce << ", huber=" << hub << ", total=" << composed << ", linearity "
       << (linear_ok ? "ok" : "BROKEN");
    report(4, "loss pins: wbce 0.22314, huber 0.255, weights (1,50,0.1) -> 51.1", pass, os.str());
}

// ---- A5/A6/A7: trend suites --------------------------------------------------

double mean_pq(const SceneSpec& base, int n_scenes, const PipelineParams& params) {
    std::vector<double> pq(n_scenes);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_scenes; ++i) {
        SceneSpec spec = base;
        spec.seed = base.seed + static_cast<uint64_t>(i);
        SceneRun run = run_synthetic_scene(spec, kCat, params);
        pq[i] = run.scores.panoptic.pq;
    }
    double sum = 0;
    for (double v : pq) sum += v;
    return sum / n_scenes;
}

void criterion_refinement_trend() {
    double t0 = now_ms();
    SceneSpec base;
    base.seed = 9000;
    base.noise.contour_break_prob = 0.15;
    base.noise.occluder_prob = 0.3;

    PipelineParams off;
    off.refine_enabled = false;
    PipelineParams on;  // split+merge+filter

    double pq_off = mean_pq(base, 100, off);
    double pq_on = mean_pq(base, 100, on);
    double elapsed = (now_ms() - t0) / 1000.0;
    bool pass = pq_on >= pq_off && (pq_on - pq_off) >= 0.01 && elapsed < 60.0;
    std::ostringstream os;
    os << "mean PQ: refined " << pq_on << " vs raw " << pq_off << ", delta " << pq_on - pq_off
       << ", " << elapsed << " s";
    report(5, "split+merge refinement lifts mean PQ by >= 0.01", pass, os.str());
}

void criterion_min_area_trend() {
    SceneSpec base;
    base.seed = 17000;
    base.noise.contour_false_positive_prob = 0.2;

    // split/merge held off so the min-area axis acts alone
    PipelineParams keep_all;
    keep_all.refine.enable_split = false;
    keep_all.refine.enable_merge = false;
    keep_all.refine.min_area = 1;
    PipelineParams filter300 = keep_all;
    filter300.refine.min_area = 300;

    double pq_1 = mean_pq(base, 100, keep_all);
    double pq_300 = mean_pq(base, 100, filter300);
    bool pass = pq_300 >= pq_1;
    std::ostringstream os;
    os << "mean PQ: min_area 300 -> " << pq_300 << ", min_area 1 -> " << pq_1;
    report(6, "min-area filtering at 300 beats no filtering under speckle noise", pass, os.str());
}

void criterion_noise_monotonicity() {
    SceneSpec base;
    base.seed = 23000;
    PipelineParams params;
    params.refine_enabled = false;

    std::vector<double> sweep = {0.0, 0.1, 0.25, 0.5};
    std::vector<double> means;
    for (double p : sweep) {
        SceneSpec spec = base;
        spec.noise.contour_break_prob = p;
        means.push_back(mean_pq(spec, 50, params));
    }
    bool pass = true;
    for (size_t i = 1; i < means.size(); ++i)
        if (means[i] > means[i - 1] + 0.005) pass = false;
    std::ostringstream os;
    os << "mean PQ sweep:";
    for (double m : means) os << " " << m;
    report(7, "mean PQ non-increasing in contour breakage", pass, os.str());
}

// ---- A8: CLI determinism across thread counts --------------------------------

json strip_volatile(json j) {
    if (j.is_object()) {
        j.erase("timings");
        if (j.contains("config") && j["config"].is_object()) j["config"].erase("threads");
        for (auto& [key, value] : j.items()) {
            (void)key;
            value = strip_volatile(value);
        }
    } else if (j.is_array()) {
        for (auto& value : j) value = strip_volatile(value);
    }
    return j;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void criterion_determinism() {
    const char* cli = std::getenv("PANSEG_CLI");
    if (!cli) {
        report(8, "pipeline outputs byte-identical for --threads 1 and 8", false,
               "PANSEG_CLI not set");
        return;
    }
    fs::path dir = fs::temp_directory_path() / "panseg_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);

    json cfg;
    cfg["scene"] = {{"seed", 31000},
                    {"noise",
                     {{"contour_break_prob", 0.1},
                      {"offset_noise_sigma", 1.0},
                      {"occluder_prob", 0.3}}}};
    cfg["n_scenes"] = 10;
    {
        std::ofstream os(dir / "config.json");
        os << cfg.dump(2);
    }

    bool pass = true;
    std::string detail = "10 scenes, all files identical";
    for (int threads : {1, 8}) {
        std::ostringstream cmd;
        cmd << "\"" << cli << "\" pipeline --threads " << threads << " --config "
            << (dir / "config.json") << " --out-dir " << (dir / ("run" + std::to_string(threads)))
            << " --report " << (dir / ("report" + std::to_string(threads) + ".json"))
            << " > /dev/null";
        if (std::system(cmd.str().c_str()) != 0) {
            pass = false;
            detail = "pipeline invocation failed";
        }
    }
    if (pass) {
        for (const auto& entry : fs::recursive_directory_iterator(dir / "run1")) {
            if (!entry.is_regular_file()) continue;
            fs::path rel = fs::relative(entry.path(), dir / "run1");
            fs::path other = dir / "run8" / rel;
            if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
                pass = false;
                detail = "mismatch at " + rel.string();
                break;
            }
        }
        json r1 = strip_volatile(json::parse(slurp(dir / "report1.json")));
        json r8 = strip_volatile(json::parse(slurp(dir / "report8.json")));
        if (r1 != r8) {
            pass = false;
            detail = "reports differ after stripping timings";
        }
    }
    report(8, "pipeline outputs byte-identical for --threads 1 and 8", pass, detail);
}

// ---- A9: single-thread post-processing speed ---------------------------------

void criterion_performance() {
    SceneSpec spec;
    spec.height = 1024;
    spec.width = 2048;
    spec.n_instances = 50;
    spec.seed = 5150;
    GroundTruth gt = generate_scene(spec, kCat);
    Predictions preds = simulate_predictions(gt, spec, kCat);

    int saved = max_threads();
    set_max_threads(1);
    double t0 = now_ms();
    PipelineArtifacts art = run_post_processing(preds.semantic_probs, preds.contour_probs,
                                                &preds.offsets, kCat, PipelineParams{});
    double elapsed = now_ms() - t0;
    set_max_threads(saved);

    bool pass = elapsed < 500.0 && art.instances.records.size() == 50;
    std::ostringstream os;
    os << elapsed << " ms single-threaded (derive " << art.timings.derive_ms << ", refine "
       << art.timings.refine_ms << ", panoptic " << art.timings.panoptic_ms << "), "
       << art.instances.records.size() << " instances";
    report(9, "1024x2048 / 50-instance post-processing under 500 ms", pass, os.str());
}

}  // namespace

int main() {
    criterion_identity();
    criterion_gradients();
    criterion_oracles();
    criterion_loss_pins();
    criterion_refinement_trend();
    criterion_min_area_trend();
    criterion_noise_monotonicity();
    criterion_determinism();
    criterion_performance();
    if (g_failures) {
        std::cout << g_failures << " criterion(s) failed" << std::endl;
        return 1;
    }
    std::cout << "all acceptance criteria passed" << std::endl;
    return 0;
}
