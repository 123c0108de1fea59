#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mulcon/tensor.hpp"

namespace mulcon {

// Parameters of one multi-head attention block mapping queries of width
// in_width to outputs of width out_width. Per-head projections are
// in_width x (out_width/heads); the output and residual projections are
// out_width x out_width.
struct MultiHeadParams {
    int heads = 1;
    bool scaled = true;  // divide logits by sqrt(per-head query width)
    std::vector<TensorPtr> wq, wk, wv;
    TensorPtr wo;
    TensorPtr wqr;  // residual projection applied to Q' in the block

    int in_width() const { return wq.empty() ? 0 : wq[0]->dim(0); }
    int out_width() const { return wo ? wo->dim(0) : 0; }
    void validate() const;
};

MultiHeadParams init_multi_head(int in_width, int out_width, int heads, uint64_t seed,
                                bool scaled = true);

std::vector<std::pair<std::string, TensorPtr>> named_params(const MultiHeadParams& p,
                                                            const std::string& prefix);

// Per-head softmax weight matrices, filled when a capture target is supplied.
struct AttCapture {
    std::vector<TensorPtr> head_weights;  // each n_q x n_v, rows sum to 1
};

// softmax(Q K^T [ / sqrt(d_q) ]) V
TensorPtr att(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v, bool scaled,
              TensorPtr* weights_out = nullptr);

// concat of per-head attentions, then the output projection
TensorPtr multi_att(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                    const MultiHeadParams& p, AttCapture* capture = nullptr);

// Q' = concat(Q Wq_1.. Q Wq_h) + MultiAtt(Q,K,V); output = Q' + Q' Wqr
TensorPtr multi_att_block(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                          const MultiHeadParams& p, AttCapture* capture = nullptr);

}  // namespace mulcon
