#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mulcon/tensor.hpp"

namespace mulcon {

// Anchor bookkeeping over the active (image, label) pairs of a batch.
// anchors lists every pair with y_ij = 1 in row-major (i, j) order;
// positives[a] indexes the anchors that share label j with anchor a
// (other images only). The candidate set A(i,j) is implicit: every anchor
// except a itself.
struct AnchorIndex {
    int batch = 0;
    int labels = 0;
    std::vector<std::pair<int, int>> anchors;
    std::vector<std::vector<int>> positives;
};

AnchorIndex build_anchor_sets(const std::vector<uint8_t>& y, int batch, int labels);

struct LossReport {
    double bce = 0.0;
    double con = 0.0;
    double combined = 0.0;
    int anchors_total = 0;
    int anchors_skipped = 0;
};

LossReport combined_loss(double bce, double con, double gamma, int anchors_total = 0,
                         int anchors_skipped = 0);

// mean over images of the summed per-label negative log likelihood;
// probabilities are clamped to [1e-7, 1-1e-7] first
TensorPtr bce_loss(const TensorPtr& s, const std::vector<uint8_t>& y);

struct ConLossResult {
    TensorPtr loss;   // scalar; constant zero when nothing contributes
    int total = 0;    // |I| (mulcon) or batch size (image-level)
    int skipped = 0;  // anchors with an empty positive set
};

// Multi-label contrastive loss over projected embeddings z [N,L,d_z] with
// unit-norm rows; mean over anchors with a nonempty positive set.
ConLossResult mulcon_con_loss(const TensorPtr& z, const AnchorIndex& idx, double tau);

// Image-level supervised contrastive baseline: every image is an anchor and
// its positives are the other images sharing at least one active label.
ConLossResult supcon_image_loss(const TensorPtr& z_img, const std::vector<uint8_t>& y, int labels,
                                double tau);

}  // namespace mulcon
