#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mulcon/ops.hpp"

namespace mulcon {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

TensorPtr node2(Shape s, std::initializer_list<TensorPtr> parents) {
    bool req = false;
    if (grad_enabled()) {
        for (const auto& p : parents)
            if (p && p->requires_grad) {
                req = true;
                break;
            }
    }
    auto t = Tensor::create(std::move(s), req);
    if (req) t->parents.assign(parents);
    return t;
}

void mm_accum(const double* a, const double* b, double* c, int m, int k, int n) {
    // c += a*b, p ascending per output element
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double ap = arow[p];
            const double* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += ap * brow[j];
        }
    }
}

// col[(oy*wo+ox), (ci*kh*kw + r*kw + s)]; zero outside the padded frame
void im2col(const double* x, int cin, int h, int w, int kh, int kw, int stride, int pad, int ho,
            int wo, double* col) {
    const int patch = cin * kh * kw;
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            double* dst = col + (static_cast<size_t>(oy) * wo + ox) * patch;
            for (int ci = 0; ci < cin; ++ci) {
                const double* plane = x + static_cast<size_t>(ci) * h * w;
                for (int r = 0; r < kh; ++r) {
                    int iy = oy * stride + r - pad;
                    for (int s = 0; s < kw; ++s) {
                        int ix = ox * stride + s - pad;
                        double v = 0.0;
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                            v = plane[static_cast<size_t>(iy) * w + ix];
                        dst[ci * kh * kw + r * kw + s] = v;
                    }
                }
            }
        }
    }
}

void col2im_accum(const double* col, int cin, int h, int w, int kh, int kw, int stride, int pad,
                  int ho, int wo, double* dx) {
    const int patch = cin * kh * kw;
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            const double* src = col + (static_cast<size_t>(oy) * wo + ox) * patch;
            for (int ci = 0; ci < cin; ++ci) {
                double* plane = dx + static_cast<size_t>(ci) * h * w;
                for (int r = 0; r < kh; ++r) {
                    int iy = oy * stride + r - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int s = 0; s < kw; ++s) {
                        int ix = ox * stride + s - pad;
                        if (ix < 0 || ix >= w) continue;
                        plane[static_cast<size_t>(iy) * w + ix] += src[ci * kh * kw + r * kw + s];
                    }
                }
            }
        }
    }
}

}  // namespace

TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, int stride, int padding) {
    require(x->rank() == 4, "conv2d: input must be [N,C,H,W], got " + shape_str(x->shape));
    require(w->rank() == 4, "conv2d: weight must be [Cout,Cin,kh,kw], got " + shape_str(w->shape));
    require(stride >= 1 && padding >= 0, "conv2d: invalid stride/padding");
    int n = x->dim(0), cin = x->dim(1), h = x->dim(2), ww = x->dim(3);
    int cout = w->dim(0), kh = w->dim(2), kw = w->dim(3);
    require(w->dim(1) == cin, "conv2d: channel mismatch, input " + shape_str(x->shape) + " weight " +
                                  shape_str(w->shape));
    require(h + 2 * padding >= kh && ww + 2 * padding >= kw,
            "conv2d: kernel larger than padded input");
    int ho = (h + 2 * padding - kh) / stride + 1;
    int wo = (ww + 2 * padding - kw) / stride + 1;
    const int patch = cin * kh * kw;

    auto out = node2({n, cout, ho, wo}, {x, w});

    // wmat = w^T laid out (patch x cout)
    std::vector<double> wmat(static_cast<size_t>(patch) * cout);
    for (int co = 0; co < cout; ++co)
        for (int p = 0; p < patch; ++p)
            wmat[static_cast<size_t>(p) * cout + co] = w->data[static_cast<size_t>(co) * patch + p];

    std::vector<double> col(static_cast<size_t>(ho) * wo * patch);
    std::vector<double> outim(static_cast<size_t>(ho) * wo * cout);
    for (int img = 0; img < n; ++img) {
        im2col(x->data.data() + static_cast<size_t>(img) * cin * h * ww, cin, h, ww, kh, kw, stride,
               padding, ho, wo, col.data());
        std::fill(outim.begin(), outim.end(), 0.0);
        mm_accum(col.data(), wmat.data(), outim.data(), ho * wo, patch, cout);
        double* dst = out->data.data() + static_cast<size_t>(img) * cout * ho * wo;
        for (int co = 0; co < cout; ++co)
            for (int pix = 0; pix < ho * wo; ++pix)
                dst[static_cast<size_t>(co) * ho * wo + pix] = outim[static_cast<size_t>(pix) * cout + co];
    }

    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x, pw = w;
        out->backward_fn = [o, px, pw, n, cin, h, ww, cout, kh, kw, stride, padding, ho, wo, patch] {
            std::vector<double> col(static_cast<size_t>(ho) * wo * patch);
            std::vector<double> gim(static_cast<size_t>(ho) * wo * cout);
            std::vector<double> dwmat;
            if (pw->requires_grad) dwmat.assign(static_cast<size_t>(patch) * cout, 0.0);
            std::vector<double> colT;
            std::vector<double> dcol;
            for (int img = 0; img < n; ++img) {
                // grad rearranged to (pixels x cout)
                const double* g = o->grad.data() + static_cast<size_t>(img) * cout * ho * wo;
                for (int co = 0; co < cout; ++co)
                    for (int pix = 0; pix < ho * wo; ++pix)
                        gim[static_cast<size_t>(pix) * cout + co] = g[static_cast<size_t>(co) * ho * wo + pix];
                im2col(px->data.data() + static_cast<size_t>(img) * cin * h * ww, cin, h, ww, kh, kw,
                       stride, padding, ho, wo, col.data());
                if (pw->requires_grad) {
                    // dwmat += col^T * gim
                    colT.assign(static_cast<size_t>(patch) * ho * wo, 0.0);
                    for (int pix = 0; pix < ho * wo; ++pix)
                        for (int p = 0; p < patch; ++p)
                            colT[static_cast<size_t>(p) * ho * wo + pix] =
                                col[static_cast<size_t>(pix) * patch + p];
                    mm_accum(colT.data(), gim.data(), dwmat.data(), patch, ho * wo, cout);
                }
                if (px->requires_grad) {
                    // dcol = gim * w (cout x patch natural layout)
                    dcol.assign(static_cast<size_t>(ho) * wo * patch, 0.0);
                    mm_accum(gim.data(), pw->data.data(), dcol.data(), ho * wo, cout, patch);
                    col2im_accum(dcol.data(), cin, h, ww, kh, kw, stride, padding, ho, wo,
                                 px->grad.data() + static_cast<size_t>(img) * cin * h * ww);
                }
            }
            if (pw->requires_grad) {
                for (int co = 0; co < cout; ++co)
                    for (int p = 0; p < patch; ++p)
                        pw->grad[static_cast<size_t>(co) * patch + p] +=
                            dwmat[static_cast<size_t>(p) * cout + co];
            }
        };
    }
    return out;
}

TensorPtr add_channel_bias(const TensorPtr& x, const TensorPtr& b) {
    require(x->rank() == 4, "add_channel_bias: input must be [N,C,H,W], got " + shape_str(x->shape));
    int n = x->dim(0), c = x->dim(1), hw = x->dim(2) * x->dim(3);
    require(b->numel() == c, "add_channel_bias: bias length " + std::to_string(b->numel()) +
                                 " for input " + shape_str(x->shape));
    auto out = node2(x->shape, {x, b});
    for (int img = 0; img < n; ++img)
        for (int ch = 0; ch < c; ++ch) {
            const double bias = b->data[static_cast<size_t>(ch)];
            const double* src = x->data.data() + (static_cast<size_t>(img) * c + ch) * hw;
            double* dst = out->data.data() + (static_cast<size_t>(img) * c + ch) * hw;
            for (int i = 0; i < hw; ++i) dst[i] = src[i] + bias;
        }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x, pb = b;
        out->backward_fn = [o, px, pb, n, c, hw] {
            if (px->requires_grad)
                for (size_t i = 0; i < o->grad.size(); ++i) px->grad[i] += o->grad[i];
            if (pb->requires_grad) {
                for (int img = 0; img < n; ++img)
                    for (int ch = 0; ch < c; ++ch) {
                        const double* g = o->grad.data() + (static_cast<size_t>(img) * c + ch) * hw;
                        double s = 0.0;
                        for (int i = 0; i < hw; ++i) s += g[i];
                        pb->grad[static_cast<size_t>(ch)] += s;
                    }
            }
        };
    }
    return out;
}

TensorPtr max_pool2d(const TensorPtr& x, int k, int stride) {
    require(x->rank() == 4, "max_pool2d: input must be [N,C,H,W], got " + shape_str(x->shape));
    require(k >= 1 && stride >= 1, "max_pool2d: invalid window/stride");
    int n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    require(h >= k && w >= k, "max_pool2d: window larger than input");
    int ho = (h - k) / stride + 1;
    int wo = (w - k) / stride + 1;
    auto out = node2({n, c, ho, wo}, {x});
    std::vector<int> arg(out->data.size());
    size_t oi = 0;
    for (int img = 0; img < n; ++img)
        for (int ch = 0; ch < c; ++ch) {
            const double* plane = x->data.data() + (static_cast<size_t>(img) * c + ch) * h * w;
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox, ++oi) {
                    double best = -HUGE_VAL;
                    int bi = 0;
                    for (int r = 0; r < k; ++r)
                        for (int s = 0; s < k; ++s) {
                            int idx = (oy * stride + r) * w + ox * stride + s;
                            if (plane[idx] > best) {
                                best = plane[idx];
                                bi = idx;
                            }
                        }
                    out->data[oi] = best;
                    arg[oi] = static_cast<int>((static_cast<size_t>(img) * c + ch) * h * w) + bi;
                }
        }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px, arg] {
            for (size_t i = 0; i < o->grad.size(); ++i) px->grad[static_cast<size_t>(arg[i])] += o->grad[i];
        };
    }
    return out;
}

TensorPtr nhwc_to_nchw(const TensorPtr& x) {
    require(x->rank() == 4, "nhwc_to_nchw: rank-4 tensor required, got " + shape_str(x->shape));
    int n = x->dim(0), h = x->dim(1), w = x->dim(2), c = x->dim(3);
    auto out = node2({n, c, h, w}, {x});
    for (int img = 0; img < n; ++img)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                for (int ch = 0; ch < c; ++ch)
                    out->data[((static_cast<size_t>(img) * c + ch) * h + y) * w + xx] =
                        x->data[((static_cast<size_t>(img) * h + y) * w + xx) * c + ch];
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px, n, h, w, c] {
            for (int img = 0; img < n; ++img)
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx)
                        for (int ch = 0; ch < c; ++ch)
                            px->grad[((static_cast<size_t>(img) * h + y) * w + xx) * c + ch] +=
                                o->grad[((static_cast<size_t>(img) * c + ch) * h + y) * w + xx];
        };
    }
    return out;
}

}  // namespace mulcon
