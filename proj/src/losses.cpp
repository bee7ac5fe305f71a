#include "panseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace panseg {

namespace {

void check_same_shape(int h1, int w1, int h2, int w2, const char* what) {
    if (h1 != h2 || w1 != w2)
        throw ValidationError(std::string(what) + ": dimension mismatch " + std::to_string(h1) +
                              "x" + std::to_string(w1) + " vs " + std::to_string(h2) + "x" +
                              std::to_string(w2));
}

double clamped_log(double v) { return std::log(std::max(v, kLogEps)); }

// Large finite stand-in for "no source"; squared image distances stay far
// below it, so the parabola arithmetic never sees infinities.
constexpr double kDtHuge = 1e18;

// 1-d squared distance transform, lower envelope of parabolas
// (Felzenszwalb & Huttenlocher).
void dt_1d(const double* f, int n, double* out, int* v, double* z) {
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double d = q - v[k];
        out[q] = d * d + f[v[k]];
    }
}

}  // namespace

std::vector<double> distance_transform(const BinaryMask& mask) {
    const int h = mask.height, w = mask.width;
    std::vector<double> d(static_cast<size_t>(h) * w);
    for (size_t i = 0; i < d.size(); ++i) d[i] = mask.mask[i] ? 0.0 : kDtHuge;

    // columns
#pragma omp parallel for schedule(static)
    for (int c = 0; c < w; ++c) {
        std::vector<double> f(h), out(h), z(h + 1);
        std::vector<int> v(h);
        for (int r = 0; r < h; ++r) f[r] = d[static_cast<size_t>(r) * w + c];
        dt_1d(f.data(), h, out.data(), v.data(), z.data());
        for (int r = 0; r < h; ++r) d[static_cast<size_t>(r) * w + c] = out[r];
    }
    // rows
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r) {
        std::vector<double> f(w), out(w), z(w + 1);
        std::vector<int> v(w);
        for (int c = 0; c < w; ++c) f[c] = d[static_cast<size_t>(r) * w + c];
        dt_1d(f.data(), w, out.data(), v.data(), z.data());
        for (int c = 0; c < w; ++c) d[static_cast<size_t>(r) * w + c] = out[c];
    }
    for (auto& x : d)
        x = x >= kDtHuge ? std::numeric_limits<double>::infinity() : std::sqrt(x);
    return d;
}

LossValue semantic_ce(const SemanticProbMap& probs, const SemanticLabelMap& gt, bool with_grad) {
    check_same_shape(probs.height, probs.width, gt.height, gt.width, "semantic_ce");
    const int h = probs.height, w = probs.width, k = probs.channels;
    const double n = static_cast<double>(h) * w;

    for (uint16_t cls : gt.labels)
        if (cls >= k) throw ValidationError("semantic_ce: gt label out of range");

    LossValue out;
    if (with_grad) out.grad.assign(probs.probs.size(), 0.0);
    std::vector<double> row_sum(h, 0.0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r) {
        double acc = 0.0;
        for (int c = 0; c < w; ++c) {
            int cls = gt.at(r, c);
            double p = std::max(static_cast<double>(probs.at(r, c, cls)), kLogEps);
            acc += -std::log(p);
            if (with_grad) out.grad[probs.idx(r, c, cls)] = -1.0 / (n * p);
        }
        row_sum[r] = acc;
    }
    double total = 0.0;
    for (double s : row_sum) total += s;
    out.value = total / n;
    return out;
}

LossValue weighted_bce(const ContourProbMap& probs, const ContourMask& gt, bool with_grad) {
    check_same_shape(probs.height, probs.width, gt.height, gt.width, "weighted_bce");
    const int h = probs.height, w = probs.width;
    const double n = static_cast<double>(h) * w;

    double edges = static_cast<double>(gt.count());
    double beta = (n - edges) / n;  // fraction of non-edge pixels

    LossValue out;
    if (with_grad) out.grad.assign(probs.probs.size(), 0.0);
    std::vector<double> row_sum(h, 0.0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r) {
        double acc = 0.0;
        for (int c = 0; c < w; ++c) {
            double p = probs.at(r, c);
            if (gt.at(r, c)) {
                acc -= beta * clamped_log(p);
                if (with_grad) out.grad[probs.idx(r, c)] = -beta / std::max(p, kLogEps);
            } else {
                acc -= (1.0 - beta) * clamped_log(1.0 - p);
                if (with_grad)
                    out.grad[probs.idx(r, c)] = (1.0 - beta) / std::max(1.0 - p, kLogEps);
            }
        }
        row_sum[r] = acc;
    }
    for (double s : row_sum) out.value += s;
    return out;
}

LossValue huber(std::span<const float> pred, std::span<const float> gt, double delta,
                bool with_grad) {
    if (pred.size() != gt.size()) throw ValidationError("huber: shape mismatch");
    if (!(delta > 0)) throw ValidationError("huber: delta must be positive");
    const size_t n = pred.size();

    LossValue out;
    if (with_grad) out.grad.assign(n, 0.0);
    // fixed-size chunks keep the serial combine independent of thread count
    const size_t chunk = 4096;
    const size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<double> partial(n_chunks, 0.0);
#pragma omp parallel for schedule(static)
    for (long long ci = 0; ci < static_cast<long long>(n_chunks); ++ci) {
        size_t lo = ci * chunk, hi = std::min(n, lo + chunk);
        double acc = 0.0;
        for (size_t i = lo; i < hi; ++i) {
            double r = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
            if (std::abs(r) <= delta) {
                acc += 0.5 * r * r;
                if (with_grad) out.grad[i] = r;
            } else {
                acc += delta * std::abs(r) - 0.5 * delta * delta;
                if (with_grad) out.grad[i] = r > 0 ? delta : -delta;
            }
        }
        partial[ci] = acc;
    }
    for (double s : partial) out.value += s;
    return out;
}

LossValue huber(const ContourProbMap& pred, const ContourMask& gt, double delta, bool with_grad) {
    check_same_shape(pred.height, pred.width, gt.height, gt.width, "huber");
    std::vector<float> gt_f(gt.mask.size());
    for (size_t i = 0; i < gt_f.size(); ++i) gt_f[i] = gt.mask[i] ? 1.f : 0.f;
    return huber(std::span<const float>(pred.probs), std::span<const float>(gt_f), delta,
                 with_grad);
}

LossValue huber(const OffsetField& pred, const OffsetField& gt, double delta, bool with_grad) {
    check_same_shape(pred.height, pred.width, gt.height, gt.width, "huber");
    return huber(std::span<const float>(pred.offsets), std::span<const float>(gt.offsets), delta,
                 with_grad);
}

namespace {

struct BilinearStencil {
    int idx[4];
    double w[4];
};

// Clamp-to-edge bilinear sampling; returns the value and fills the 4-corner
// stencil used for the backward pass.
double sample_bilinear(const ContourProbMap& m, double r, double c, BilinearStencil* st) {
    r = std::clamp(r, 0.0, static_cast<double>(m.height - 1));
    c = std::clamp(c, 0.0, static_cast<double>(m.width - 1));
    int r0 = static_cast<int>(std::floor(r)), c0 = static_cast<int>(std::floor(c));
    int r1 = std::min(r0 + 1, m.height - 1), c1 = std::min(c0 + 1, m.width - 1);
    double fr = r - r0, fc = c - c0;
    double w00 = (1 - fr) * (1 - fc), w01 = (1 - fr) * fc, w10 = fr * (1 - fc), w11 = fr * fc;
    if (st) {
        st->idx[0] = static_cast<int>(m.idx(r0, c0));
        st->idx[1] = static_cast<int>(m.idx(r0, c1));
        st->idx[2] = static_cast<int>(m.idx(r1, c0));
        st->idx[3] = static_cast<int>(m.idx(r1, c1));
        st->w[0] = w00;
        st->w[1] = w01;
        st->w[2] = w10;
        st->w[3] = w11;
    }
    return w00 * m.at(r0, c0) + w01 * m.at(r0, c1) + w10 * m.at(r1, c0) + w11 * m.at(r1, c1);
}

// Boundary normal from the distance-transform gradient field. The gradient
// vanishes at the contour ridge itself, so the direction is taken from the
// dominant eigenvector of the 3x3 structure tensor of central-difference
// gradients (sign-free, which is all the symmetric sampling window needs).
// Returns false when every gradient in the neighborhood is zero.
bool boundary_normal(const std::vector<double>& dist, int h, int w, int r, int c, double* nr,
                     double* nc) {
    auto dval = [&](int rr, int cc) {
        rr = std::clamp(rr, 0, h - 1);
        cc = std::clamp(cc, 0, w - 1);
        double v = dist[static_cast<size_t>(rr) * w + cc];
        return v;
    };
    double a = 0, b = 0, d = 0;  // tensor [[a,b],[b,d]]
    for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
            double gr = 0.5 * (dval(r + dr + 1, c + dc) - dval(r + dr - 1, c + dc));
            double gc = 0.5 * (dval(r + dr, c + dc + 1) - dval(r + dr, c + dc - 1));
            a += gr * gr;
            b += gr * gc;
            d += gc * gc;
        }
    }
    double trace = a + d;
    if (trace < 1e-12) return false;
    double half = 0.5 * (a - d);
    double root = std::sqrt(half * half + b * b);
    double lam = 0.5 * (a + d) + root;
    double vr, vc;
    if (std::abs(b) > 1e-15) {
        vr = lam - d;
        vc = b;
    } else if (a >= d) {
        vr = 1;
        vc = 0;
    } else {
        vr = 0;
        vc = 1;
    }
    double norm = std::hypot(vr, vc);
    if (norm < 1e-15) return false;
    *nr = vr / norm;
    *nc = vc / norm;
    return true;
}

}  // namespace

LossValue nms_loss(const ContourProbMap& probs, const ContourMask& gt_contours, int window,
                   bool with_grad) {
    check_same_shape(probs.height, probs.width, gt_contours.height, gt_contours.width, "nms_loss");
    if (window < 3 || window % 2 == 0)
        throw ValidationError("nms_loss: window must be odd and >= 3");
    const int h = probs.height, w = probs.width;
    const int half = (window - 1) / 2;

    std::vector<int> contour_pixels;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (gt_contours.at(r, c)) contour_pixels.push_back(r * w + c);

    LossValue out;
    if (with_grad) out.grad.assign(probs.probs.size(), 0.0);
    if (contour_pixels.empty()) return out;

    std::vector<double> dist = distance_transform(gt_contours);

    const int m = static_cast<int>(contour_pixels.size());
    std::vector<double> contrib(m, 0.0);
    std::vector<uint8_t> skipped(m, 0);
    // per-pixel gradient stencils; scattered serially afterwards so overlap
    // between neighboring windows cannot race
    std::vector<std::vector<BilinearStencil>> stencils(with_grad ? m : 0);
    std::vector<std::vector<double>> sample_grads(with_grad ? m : 0);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        int r = contour_pixels[i] / w, c = contour_pixels[i] % w;
        double nr, nc;
        if (!boundary_normal(dist, h, w, r, c, &nr, &nc)) {
            skipped[i] = 1;
            continue;
        }
        std::vector<double> samples(window);
        std::vector<BilinearStencil> st(window);
        for (int k = -half; k <= half; ++k)
            samples[k + half] =
                sample_bilinear(probs, r + k * nr, c + k * nc, with_grad ? &st[k + half] : nullptr);

        double mx = *std::max_element(samples.begin(), samples.end());
        double denom = 0.0;
        for (double s : samples) denom += std::exp(s - mx);
        double q_center = std::exp(samples[half] - mx) / denom;
        contrib[i] = -std::log(q_center + kLogEps);

        if (with_grad) {
            // d(-log(q0+eps))/ds_k = q0/(q0+eps) * (q_k - [k==center])
            double factor = q_center / (q_center + kLogEps);
            std::vector<double> g(window);
            for (int k = 0; k < window; ++k) {
                double qk = std::exp(samples[k] - mx) / denom;
                g[k] = factor * (qk - (k == half ? 1.0 : 0.0));
            }
            stencils[i] = std::move(st);
            sample_grads[i] = std::move(g);
        }
    }

    for (int i = 0; i < m; ++i) {
        out.value += contrib[i];
        out.skipped += skipped[i];
        if (with_grad && !skipped[i])
            for (int k = 0; k < window; ++k)
                for (int j = 0; j < 4; ++j)
                    out.grad[stencils[i][k].idx[j]] += sample_grads[i][k] * stencils[i][k].w[j];
    }
    return out;
}

LossReport total_loss(double semantic, double wbce, double huber_contour, double nms,
                      double center, const LossWeights& weights) {
    for (double v : {semantic, wbce, huber_contour, nms, center})
        if (!std::isfinite(v)) throw ValidationError("total_loss: non-finite component");
    LossReport rep;
    rep.semantic = semantic;
    rep.wbce = wbce;
    rep.huber_contour = huber_contour;
    rep.nms = nms;
    rep.center = center;
    rep.weights = weights;
    rep.total = weights.lambda_semantic * semantic +
                weights.lambda_contour * (wbce + huber_contour + nms) +
                weights.lambda_center * center;
    return rep;
}

}  // namespace panseg
