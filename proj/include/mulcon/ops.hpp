#pragma once

#include <vector>

#include "mulcon/tensor.hpp"

namespace mulcon {

// ---- elementwise ----
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double c);
TensorPtr affine(const TensorPtr& a, double mul_c, double add_c);  // mul_c*x + add_c
TensorPtr sigmoid(const TensorPtr& a);
TensorPtr relu(const TensorPtr& a);
TensorPtr exp(const TensorPtr& a);
TensorPtr log(const TensorPtr& a);  // throws std::domain_error on x <= 0
TensorPtr clamp(const TensorPtr& a, double lo, double hi);

// ---- reductions ----
TensorPtr sum_all(const TensorPtr& a);    // -> [1]
TensorPtr mean_all(const TensorPtr& a);   // -> [1]
TensorPtr row_sum(const TensorPtr& a);    // [m,n] -> [m,1]
TensorPtr mean_rows(const TensorPtr& a);  // [m,n] -> [1,n], mean over rows

// ---- linear algebra / structure ----
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);  // [m,k]x[k,n] -> [m,n]
TensorPtr transpose(const TensorPtr& a);                   // [m,n] -> [n,m]
TensorPtr reshape(const TensorPtr& a, Shape s);
TensorPtr softmax_rows(const TensorPtr& a);  // [m,n], max-subtracted per row
TensorPtr take_diag(const TensorPtr& a);     // [m,m] -> [m,1]
// rows rescaled to unit Euclidean norm; eps added to the norm before dividing
TensorPtr l2_normalize_rows(const TensorPtr& a, double eps = 1e-12);
TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& b);  // [m,n] + [n]

TensorPtr concat_cols(const std::vector<TensorPtr>& parts);  // same rows
TensorPtr concat_rows(const std::vector<TensorPtr>& parts);  // same cols
TensorPtr stack0(const std::vector<TensorPtr>& parts);       // k identical shapes -> [k,...]
TensorPtr select0(const TensorPtr& a, int i);                // [d0,...] -> [...]
TensorPtr select1(const TensorPtr& a, int j);                // [a,b,c] -> [a,c]
TensorPtr gather_rows(const TensorPtr& a, const std::vector<int>& rows);  // [m,n] -> [k,n]

// ---- image ops ----
// x [N,Cin,H,W], w [Cout,Cin,kh,kw]; cross-correlation, zero padding
TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, int stride, int padding);
TensorPtr add_channel_bias(const TensorPtr& x, const TensorPtr& b);  // [N,C,H,W] + [C]
TensorPtr max_pool2d(const TensorPtr& x, int k, int stride);
TensorPtr nhwc_to_nchw(const TensorPtr& x);  // [N,H,W,C] -> [N,C,H,W]

}  // namespace mulcon
