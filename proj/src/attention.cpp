#include "mulcon/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "mulcon/ops.hpp"
#include "mulcon/rng.hpp"

namespace mulcon {

void MultiHeadParams::validate() const {
    if (heads < 1) throw std::invalid_argument("attention: head count must be >= 1");
    if (wq.size() != static_cast<size_t>(heads) || wk.size() != wq.size() || wv.size() != wq.size())
        throw std::invalid_argument("attention: projection list does not match head count");
    if (!wo || !wqr) throw std::invalid_argument("attention: missing output/residual projection");
    int c = in_width(), d = out_width();
    if (d % heads != 0) throw std::invalid_argument("attention: output width not divisible by heads");
    int dh = d / heads;
    for (int i = 0; i < heads; ++i) {
        for (const auto& w : {wq[static_cast<size_t>(i)], wk[static_cast<size_t>(i)], wv[static_cast<size_t>(i)]}) {
            if (w->rank() != 2 || w->dim(0) != c || w->dim(1) != dh)
                throw std::invalid_argument("attention: head projection has shape " + shape_str(w->shape) +
                                            ", expected [" + std::to_string(c) + "x" + std::to_string(dh) + "]");
        }
    }
    if (wo->dim(0) != d || wo->dim(1) != d || wqr->dim(0) != d || wqr->dim(1) != d)
        throw std::invalid_argument("attention: output projections must be square of the output width");
}

namespace {
TensorPtr xavier(int rows, int cols, uint64_t seed) {
    Rng rng(seed);
    double bound = std::sqrt(6.0 / (rows + cols));
    auto t = Tensor::create({rows, cols}, true);
    for (double& v : t->data) v = rng.uniform(-bound, bound);
    return t;
}
}  // namespace

MultiHeadParams init_multi_head(int in_width, int out_width, int heads, uint64_t seed, bool scaled) {
    if (heads < 1 || out_width % heads != 0)
        throw std::invalid_argument("init_multi_head: output width " + std::to_string(out_width) +
                                    " not divisible by " + std::to_string(heads) + " heads");
    MultiHeadParams p;
    p.heads = heads;
    p.scaled = scaled;
    int dh = out_width / heads;
    for (int i = 0; i < heads; ++i) {
        p.wq.push_back(xavier(in_width, dh, derive_seed(seed, name_hash("wq"), static_cast<uint64_t>(i))));
        p.wk.push_back(xavier(in_width, dh, derive_seed(seed, name_hash("wk"), static_cast<uint64_t>(i))));
        p.wv.push_back(xavier(in_width, dh, derive_seed(seed, name_hash("wv"), static_cast<uint64_t>(i))));
    }
    p.wo = xavier(out_width, out_width, derive_seed(seed, name_hash("wo")));
    p.wqr = xavier(out_width, out_width, derive_seed(seed, name_hash("wqr")));
    return p;
}

std::vector<std::pair<std::string, TensorPtr>> named_params(const MultiHeadParams& p,
                                                            const std::string& prefix) {
    std::vector<std::pair<std::string, TensorPtr>> out;
    for (int i = 0; i < p.heads; ++i) {
        std::string h = prefix + ".head" + std::to_string(i);
        out.emplace_back(h + ".wq", p.wq[static_cast<size_t>(i)]);
        out.emplace_back(h + ".wk", p.wk[static_cast<size_t>(i)]);
        out.emplace_back(h + ".wv", p.wv[static_cast<size_t>(i)]);
    }
    out.emplace_back(prefix + ".wo", p.wo);
    out.emplace_back(prefix + ".wqr", p.wqr);
    return out;
}

TensorPtr att(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v, bool scaled,
              TensorPtr* weights_out) {
    if (q->rank() != 2 || k->rank() != 2 || v->rank() != 2)
        throw std::invalid_argument("att: rank-2 inputs required");
    if (q->dim(1) != k->dim(1))
        throw std::invalid_argument("att: query/key widths differ, " + shape_str(q->shape) + " vs " +
                                    shape_str(k->shape));
    if (k->dim(0) != v->dim(0))
        throw std::invalid_argument("att: key/value row counts differ, " + shape_str(k->shape) + " vs " +
                                    shape_str(v->shape));
    TensorPtr logits = matmul(q, transpose(k));
    if (scaled) logits = scale(logits, 1.0 / std::sqrt(static_cast<double>(q->dim(1))));
    TensorPtr weights = softmax_rows(logits);
    if (weights_out) *weights_out = weights;
    return matmul(weights, v);
}

TensorPtr multi_att(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                    const MultiHeadParams& p, AttCapture* capture) {
    p.validate();
    if (q->dim(1) != p.in_width())
        throw std::invalid_argument("multi_att: query width " + shape_str(q->shape) +
                                    " does not match projections");
    if (capture) capture->head_weights.assign(static_cast<size_t>(p.heads), nullptr);
    std::vector<TensorPtr> heads;
    heads.reserve(static_cast<size_t>(p.heads));
    for (int i = 0; i < p.heads; ++i) {
        auto qi = matmul(q, p.wq[static_cast<size_t>(i)]);
        auto ki = matmul(k, p.wk[static_cast<size_t>(i)]);
        auto vi = matmul(v, p.wv[static_cast<size_t>(i)]);
        heads.push_back(att(qi, ki, vi, p.scaled, capture ? &capture->head_weights[static_cast<size_t>(i)] : nullptr));
    }
    return matmul(concat_cols(heads), p.wo);
}

TensorPtr multi_att_block(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                          const MultiHeadParams& p, AttCapture* capture) {
    p.validate();
    if (q->dim(1) != p.in_width())
        throw std::invalid_argument("multi_att_block: query width " + shape_str(q->shape) +
                                    " does not match projections");
    if (capture) capture->head_weights.assign(static_cast<size_t>(p.heads), nullptr);
    std::vector<TensorPtr> qproj, heads;
    qproj.reserve(static_cast<size_t>(p.heads));
    heads.reserve(static_cast<size_t>(p.heads));
    for (int i = 0; i < p.heads; ++i) {
        auto qi = matmul(q, p.wq[static_cast<size_t>(i)]);
        auto ki = matmul(k, p.wk[static_cast<size_t>(i)]);
        auto vi = matmul(v, p.wv[static_cast<size_t>(i)]);
        qproj.push_back(qi);
        heads.push_back(att(qi, ki, vi, p.scaled, capture ? &capture->head_weights[static_cast<size_t>(i)] : nullptr));
    }
    auto mattn = matmul(concat_cols(heads), p.wo);
    auto qprime = add(concat_cols(qproj), mattn);
    return add(qprime, matmul(qprime, p.wqr));
}

}  // namespace mulcon
