#include "mulcon/losses.hpp"

#include <stdexcept>

#include "mulcon/ops.hpp"

namespace mulcon {

AnchorIndex build_anchor_sets(const std::vector<uint8_t>& y, int batch, int labels) {
    if (static_cast<int>(y.size()) != batch * labels)
        throw std::invalid_argument("build_anchor_sets: label matrix size mismatch");
    AnchorIndex idx;
    idx.batch = batch;
    idx.labels = labels;
    for (int i = 0; i < batch; ++i)
        for (int j = 0; j < labels; ++j)
            if (y[static_cast<size_t>(i) * labels + j]) idx.anchors.emplace_back(i, j);
    idx.positives.resize(idx.anchors.size());
    for (size_t a = 0; a < idx.anchors.size(); ++a) {
        const auto [i, j] = idx.anchors[a];
        for (size_t b = 0; b < idx.anchors.size(); ++b) {
            if (b == a) continue;
            const auto [k, jb] = idx.anchors[b];
            if (jb == j && k != i) idx.positives[a].push_back(static_cast<int>(b));
        }
    }
    return idx;
}

LossReport combined_loss(double bce, double con, double gamma, int anchors_total,
                         int anchors_skipped) {
    if (gamma < 0.0) throw std::invalid_argument("combined_loss: gamma must be >= 0");
    LossReport r;
    r.bce = bce;
    r.con = con;
    r.combined = bce + gamma * con;
    r.anchors_total = anchors_total;
    r.anchors_skipped = anchors_skipped;
    return r;
}

TensorPtr bce_loss(const TensorPtr& s, const std::vector<uint8_t>& y) {
    if (s->rank() != 2) throw std::invalid_argument("bce_loss: scores must be [N,L]");
    const int n = s->dim(0), l = s->dim(1);
    if (static_cast<int>(y.size()) != n * l)
        throw std::invalid_argument("bce_loss: label matrix size mismatch, scores " +
                                    shape_str(s->shape));
    auto yt = Tensor::create({n, l});
    auto ytc = Tensor::create({n, l});
    for (size_t i = 0; i < y.size(); ++i) {
        yt->data[i] = y[i] ? 1.0 : 0.0;
        ytc->data[i] = y[i] ? 0.0 : 1.0;
    }
    auto sc = clamp(s, 1e-7, 1.0 - 1e-7);
    auto ll = add(mul(yt, mulcon::log(sc)), mul(ytc, mulcon::log(affine(sc, -1.0, 1.0))));
    return scale(sum_all(ll), -1.0 / static_cast<double>(n));
}

namespace {

// Shared core of both contrastive losses: zi holds one unit-norm embedding
// per anchor, positives index into zi's rows. Per contributing anchor m the
// term is log(sum_{a != m} exp(S_ma)) - mean_{p in P_m} S_mp with
// S = zi zi^T / tau; the result is the mean over contributing anchors.
ConLossResult supcon_core(const TensorPtr& zi, const std::vector<std::vector<int>>& positives,
                          double tau) {
    const int m = zi->dim(0);
    ConLossResult res;
    res.total = m;
    int contributing = 0;
    for (const auto& p : positives)
        if (!p.empty()) ++contributing;
    res.skipped = m - contributing;
    if (m < 2 || contributing == 0) {
        res.skipped = m;
        res.loss = Tensor::from({1}, {0.0});
        return res;
    }

    auto st = scale(matmul(zi, transpose(zi)), 1.0 / tau);
    auto e = mulcon::exp(st);
    auto denom = add(row_sum(e), scale(take_diag(e), -1.0));  // excludes the anchor itself
    auto logd = mulcon::log(denom);

    auto posw = Tensor::create({m, m});
    auto cmask = Tensor::create({m, 1});
    for (int a = 0; a < m; ++a) {
        if (positives[static_cast<size_t>(a)].empty()) continue;
        cmask->data[static_cast<size_t>(a)] = 1.0;
        double w = 1.0 / static_cast<double>(positives[static_cast<size_t>(a)].size());
        for (int p : positives[static_cast<size_t>(a)])
            posw->data[static_cast<size_t>(a) * m + p] = w;
    }

    auto pos_term = sum_all(mul(st, posw));
    auto denom_term = sum_all(mul(logd, cmask));
    res.loss = scale(add(denom_term, scale(pos_term, -1.0)), 1.0 / static_cast<double>(contributing));
    return res;
}

}  // namespace

ConLossResult mulcon_con_loss(const TensorPtr& z, const AnchorIndex& idx, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("mulcon_con_loss: tau must be positive");
    if (z->rank() != 3) throw std::invalid_argument("mulcon_con_loss: embeddings must be [N,L,d]");
    const int n = z->dim(0), l = z->dim(1), d = z->dim(2);
    if (n != idx.batch || l != idx.labels)
        throw std::invalid_argument("mulcon_con_loss: anchor index built for a different batch");

    const int m = static_cast<int>(idx.anchors.size());
    if (m < 2) {
        ConLossResult res;
        res.total = m;
        res.skipped = m;
        res.loss = Tensor::from({1}, {0.0});
        return res;
    }

    std::vector<int> rows;
    rows.reserve(static_cast<size_t>(m));
    for (const auto& [i, j] : idx.anchors) rows.push_back(i * l + j);
    auto zi = gather_rows(reshape(z, {n * l, d}), rows);
    auto res = supcon_core(zi, idx.positives, tau);
    res.total = m;
    return res;
}

ConLossResult supcon_image_loss(const TensorPtr& z_img, const std::vector<uint8_t>& y, int labels,
                                double tau) {
    if (tau <= 0.0) throw std::invalid_argument("supcon_image_loss: tau must be positive");
    if (z_img->rank() != 2) throw std::invalid_argument("supcon_image_loss: embeddings must be [N,d]");
    const int n = z_img->dim(0);
    if (static_cast<int>(y.size()) != n * labels)
        throw std::invalid_argument("supcon_image_loss: label matrix size mismatch");

    std::vector<std::vector<int>> positives(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            if (k == i) continue;
            bool shared = false;
            for (int j = 0; j < labels; ++j)
                if (y[static_cast<size_t>(i) * labels + j] && y[static_cast<size_t>(k) * labels + j]) {
                    shared = true;
                    break;
                }
            if (shared) positives[static_cast<size_t>(i)].push_back(k);
        }
    return supcon_core(z_img, positives, tau);
}

}  // namespace mulcon
