#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mulcon/attention.hpp"
#include "mulcon/tensor.hpp"

namespace mulcon {

// Four stride-2 3x3 conv layers with relu, so the spatial grid is
// image_size/16 on each side. conv_channels holds the four output widths;
// the last one is the attention channel count C.
struct ModelDims {
    int image_size = 64;
    std::vector<int> conv_channels{16, 32, 64, 64};
    int num_labels = 8;   // L
    int embed_dim = 64;   // D
    int heads = 4;
    int proj_dim = 32;    // d_z
    bool scaled_attention = true;

    int channels() const { return conv_channels.back(); }  // C
    int grid() const { return image_size / 16; }
    int spatial_cells() const { return grid() * grid(); }  // WH
    void validate() const;
};

struct ConvLayer {
    TensorPtr w;  // [Cout,Cin,3,3]
    TensorPtr b;  // [Cout]
};

struct EncoderParams {
    std::vector<ConvLayer> conv;
};

// Label-level embedding network plus projection and classification heads.
struct MulConModel {
    ModelDims dims;
    EncoderParams enc;
    TensorPtr class_embeddings;  // U: L x C
    MultiHeadParams attn;        // C -> D
    TensorPtr proj_w0, proj_b0;  // D -> D
    TensorPtr proj_w1, proj_b1;  // D -> d_z
    std::vector<TensorPtr> cls_w;  // per label, D x 1
    std::vector<TensorPtr> cls_b;  // per label, [1]
};

// Image-level baseline: encoder, global average pool, one L-way sigmoid head.
struct BackboneModel {
    ModelDims dims;
    EncoderParams enc;
    TensorPtr head_w;  // C x L
    TensorPtr head_b;  // [L]
};

MulConModel init_model(const ModelDims& dims, uint64_t seed);
BackboneModel init_backbone(const ModelDims& dims, uint64_t seed);

std::vector<std::pair<std::string, TensorPtr>> named_parameters(const MulConModel& m);
std::vector<std::pair<std::string, TensorPtr>> named_parameters(const BackboneModel& m);

// images [N,H,W,3] in [0,1] -> spatial features [N,WH,C]
TensorPtr encode(const EncoderParams& enc, const TensorPtr& images_nhwc, const ModelDims& dims);

// g_i = multi_att_block(U, r_i, r_i), stacked -> [N,L,D]. Captures, when
// requested, hold the per-head attention weights of every image.
TensorPtr label_embeddings(const TensorPtr& r, const TensorPtr& class_embeddings,
                           const MultiHeadParams& attn, std::vector<AttCapture>* captures = nullptr);

// two linear layers with relu, rows L2-normalized -> [N,L,d_z]
TensorPtr project(const MulConModel& m, const TensorPtr& g);

// s_ij = sigmoid(w_j . g_ij + b_j) -> [N,L]
TensorPtr classify(const MulConModel& m, const TensorPtr& g);

// mean over spatial cells -> [N,C]
TensorPtr global_pool(const TensorPtr& r);

// sigmoid(pool(r) W + b) -> [N,L]
TensorPtr backbone_scores(const BackboneModel& m, const TensorPtr& r);

}  // namespace mulcon
