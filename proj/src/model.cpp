#include "mulcon/model.hpp"

#include <cmath>
#include <stdexcept>

#include "mulcon/ops.hpp"
#include "mulcon/rng.hpp"

namespace mulcon {

void ModelDims::validate() const {
    if (image_size <= 0 || image_size % 16 != 0)
        throw std::invalid_argument("model: image size must be a positive multiple of 16");
    if (conv_channels.size() != 4)
        throw std::invalid_argument("model: encoder expects exactly four conv widths");
    for (int c : conv_channels)
        if (c <= 0) throw std::invalid_argument("model: conv widths must be positive");
    if (num_labels < 2) throw std::invalid_argument("model: at least two labels required");
    if (embed_dim <= 0 || heads <= 0 || embed_dim % heads != 0)
        throw std::invalid_argument("model: embed_dim must be divisible by heads");
    if (proj_dim <= 0) throw std::invalid_argument("model: proj_dim must be positive");
}

namespace {

TensorPtr xavier(Shape s, int fan_in, int fan_out, uint64_t seed) {
    Rng rng(seed);
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    auto t = Tensor::create(std::move(s), true);
    for (double& v : t->data) v = rng.uniform(-bound, bound);
    return t;
}

EncoderParams init_encoder(const ModelDims& dims, uint64_t seed) {
    EncoderParams enc;
    int cin = 3;
    for (size_t k = 0; k < dims.conv_channels.size(); ++k) {
        int cout = dims.conv_channels[k];
        ConvLayer layer;
        layer.w = xavier({cout, cin, 3, 3}, cin * 9, cout * 9,
                         derive_seed(seed, name_hash("enc.conv.w"), k));
        layer.b = Tensor::create({cout}, true);
        enc.conv.push_back(std::move(layer));
        cin = cout;
    }
    return enc;
}

void round_all(const std::vector<std::pair<std::string, TensorPtr>>& params) {
    for (const auto& [name, t] : params) {
        (void)name;
        t->round_to_f32();
    }
}

}  // namespace

MulConModel init_model(const ModelDims& dims, uint64_t seed) {
    dims.validate();
    MulConModel m;
    m.dims = dims;
    m.enc = init_encoder(dims, seed);

    const int L = dims.num_labels, C = dims.channels(), D = dims.embed_dim, dz = dims.proj_dim;

    // U ~ Normal(0, 0.02^2)
    m.class_embeddings = Tensor::create({L, C}, true);
    Rng urng(derive_seed(seed, name_hash("U")));
    for (double& v : m.class_embeddings->data) v = urng.normal(0.0, 0.02);

    m.attn = init_multi_head(C, D, dims.heads, derive_seed(seed, name_hash("attn")),
                             dims.scaled_attention);

    m.proj_w0 = xavier({D, D}, D, D, derive_seed(seed, name_hash("proj.0.w")));
    m.proj_b0 = Tensor::create({D}, true);
    m.proj_w1 = xavier({D, dz}, D, dz, derive_seed(seed, name_hash("proj.1.w")));
    m.proj_b1 = Tensor::create({dz}, true);

    for (int j = 0; j < L; ++j) {
        m.cls_w.push_back(xavier({D, 1}, D, 1, derive_seed(seed, name_hash("cls.w"), static_cast<uint64_t>(j))));
        m.cls_b.push_back(Tensor::create({1}, true));
    }

    // persistent state lives on the f32 grid; see tensor.hpp
    round_all(named_parameters(m));
    return m;
}

BackboneModel init_backbone(const ModelDims& dims, uint64_t seed) {
    dims.validate();
    BackboneModel m;
    m.dims = dims;
    m.enc = init_encoder(dims, seed);
    const int C = dims.channels(), L = dims.num_labels;
    m.head_w = xavier({C, L}, C, L, derive_seed(seed, name_hash("head.w")));
    m.head_b = Tensor::create({L}, true);
    round_all(named_parameters(m));
    return m;
}

std::vector<std::pair<std::string, TensorPtr>> named_parameters(const MulConModel& m) {
    std::vector<std::pair<std::string, TensorPtr>> out;
    for (size_t k = 0; k < m.enc.conv.size(); ++k) {
        out.emplace_back("enc.conv" + std::to_string(k) + ".w", m.enc.conv[k].w);
        out.emplace_back("enc.conv" + std::to_string(k) + ".b", m.enc.conv[k].b);
    }
    out.emplace_back("U", m.class_embeddings);
    for (auto& p : named_params(m.attn, "attn")) out.push_back(std::move(p));
    out.emplace_back("proj.0.w", m.proj_w0);
    out.emplace_back("proj.0.b", m.proj_b0);
    out.emplace_back("proj.1.w", m.proj_w1);
    out.emplace_back("proj.1.b", m.proj_b1);
    for (size_t j = 0; j < m.cls_w.size(); ++j) {
        out.emplace_back("cls." + std::to_string(j) + ".w", m.cls_w[j]);
        out.emplace_back("cls." + std::to_string(j) + ".b", m.cls_b[j]);
    }
    return out;
}

std::vector<std::pair<std::string, TensorPtr>> named_parameters(const BackboneModel& m) {
    std::vector<std::pair<std::string, TensorPtr>> out;
    for (size_t k = 0; k < m.enc.conv.size(); ++k) {
        out.emplace_back("enc.conv" + std::to_string(k) + ".w", m.enc.conv[k].w);
        out.emplace_back("enc.conv" + std::to_string(k) + ".b", m.enc.conv[k].b);
    }
    out.emplace_back("head.w", m.head_w);
    out.emplace_back("head.b", m.head_b);
    return out;
}

TensorPtr encode(const EncoderParams& enc, const TensorPtr& images_nhwc, const ModelDims& dims) {
    if (images_nhwc->rank() != 4 || images_nhwc->dim(3) != 3 ||
        images_nhwc->dim(1) != dims.image_size || images_nhwc->dim(2) != dims.image_size)
        throw std::invalid_argument("encode: images must be [N," + std::to_string(dims.image_size) +
                                    "," + std::to_string(dims.image_size) + ",3], got " +
                                    shape_str(images_nhwc->shape));
    TensorPtr x = nhwc_to_nchw(images_nhwc);
    for (const auto& layer : enc.conv) x = relu(add_channel_bias(conv2d(x, layer.w, 2, 1), layer.b));

    const int n = x->dim(0), c = x->dim(1), wh = x->dim(2) * x->dim(3);
    std::vector<TensorPtr> rows;
    rows.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        rows.push_back(transpose(reshape(select0(x, i), {c, wh})));  // WH x C
    return stack0(rows);                                             // N x WH x C
}

TensorPtr label_embeddings(const TensorPtr& r, const TensorPtr& class_embeddings,
                           const MultiHeadParams& attn, std::vector<AttCapture>* captures) {
    if (r->rank() != 3) throw std::invalid_argument("label_embeddings: features must be [N,WH,C]");
    if (class_embeddings->dim(1) != r->dim(2))
        throw std::invalid_argument("label_embeddings: channel widths differ, U " +
                                    shape_str(class_embeddings->shape) + " vs features " +
                                    shape_str(r->shape));
    const int n = r->dim(0);
    if (captures) captures->assign(static_cast<size_t>(n), AttCapture{});
    std::vector<TensorPtr> gs;
    gs.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        TensorPtr ri = select0(r, i);
        gs.push_back(multi_att_block(class_embeddings, ri, ri, attn,
                                     captures ? &(*captures)[static_cast<size_t>(i)] : nullptr));
    }
    return stack0(gs);  // N x L x D
}

TensorPtr project(const MulConModel& m, const TensorPtr& g) {
    if (g->rank() != 3) throw std::invalid_argument("project: input must be [N,L,D]");
    const int n = g->dim(0), l = g->dim(1), d = g->dim(2);
    auto flat = reshape(g, {n * l, d});
    auto h = relu(add_rowvec(matmul(flat, m.proj_w0), m.proj_b0));
    auto z = add_rowvec(matmul(h, m.proj_w1), m.proj_b1);
    z = l2_normalize_rows(z, 1e-12);
    return reshape(z, {n, l, m.dims.proj_dim});
}

TensorPtr classify(const MulConModel& m, const TensorPtr& g) {
    if (g->rank() != 3) throw std::invalid_argument("classify: input must be [N,L,D]");
    const int l = g->dim(1);
    if (l != static_cast<int>(m.cls_w.size()))
        throw std::invalid_argument("classify: label count mismatch");
    std::vector<TensorPtr> cols;
    cols.reserve(static_cast<size_t>(l));
    for (int j = 0; j < l; ++j) {
        auto gj = select1(g, j);  // N x D
        cols.push_back(add_rowvec(matmul(gj, m.cls_w[static_cast<size_t>(j)]),
                                  m.cls_b[static_cast<size_t>(j)]));
    }
    return sigmoid(concat_cols(cols));
}

TensorPtr global_pool(const TensorPtr& r) {
    if (r->rank() != 3) throw std::invalid_argument("global_pool: input must be [N,WH,C]");
    const int n = r->dim(0), c = r->dim(2);
    std::vector<TensorPtr> rows;
    rows.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) rows.push_back(mean_rows(select0(r, i)));  // 1 x C
    return reshape(stack0(rows), {n, c});
}

TensorPtr backbone_scores(const BackboneModel& m, const TensorPtr& r) {
    auto pooled = global_pool(r);
    return sigmoid(add_rowvec(matmul(pooled, m.head_w), m.head_b));
}

}  // namespace mulcon
