#include "mulcon/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mulcon {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// node with tape wiring; requires_grad only while the tape is enabled
TensorPtr node(Shape s, std::initializer_list<TensorPtr> parents) {
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

TensorPtr node(Shape s, const std::vector<TensorPtr>& parents) {
    bool req = false;
    if (grad_enabled()) {
        for (const auto& p : parents)
            if (p && p->requires_grad) {
                req = true;
                break;
            }
    }
    auto t = Tensor::create(std::move(s), req);
    if (req) t->parents = parents;
    return t;
}

void axpy(std::vector<double>& dst, const std::vector<double>& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// C = A(m x k) * B(k x n), C preset to zero. Inner accumulation runs over p in
// ascending order for every output element, so results do not depend on the
// vector width the compiler picks.
void mm_kernel(const double* a, const double* b, double* c, int m, int k, int n) {
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

std::vector<double> transpose_copy(const double* a, int m, int n) {
    std::vector<double> t(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) t[static_cast<size_t>(j) * m + i] = a[static_cast<size_t>(i) * n + j];
    return t;
}

}  // namespace

// ---- elementwise ----

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    require(a->shape == b->shape, "add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = node(a->shape, {a, b});
    for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a, pb = b;
        out->backward_fn = [o, pa, pb] {
            if (pa->requires_grad) axpy(pa->grad, o->grad);
            if (pb->requires_grad) axpy(pb->grad, o->grad);
        };
    }
    return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) { return add(a, scale(b, -1.0)); }

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    require(a->shape == b->shape, "mul: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = node(a->shape, {a, b});
    for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a, pb = b;
        out->backward_fn = [o, pa, pb] {
            if (pa->requires_grad)
                for (size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i] * pb->data[i];
            if (pb->requires_grad)
                for (size_t i = 0; i < o->grad.size(); ++i) pb->grad[i] += o->grad[i] * pa->data[i];
        };
    }
    return out;
}

TensorPtr scale(const TensorPtr& a, double c) { return affine(a, c, 0.0); }

TensorPtr affine(const TensorPtr& a, double mul_c, double add_c) {
    auto out = node(a->shape, {a});
    for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = mul_c * a->data[i] + add_c;
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa, mul_c] {
            for (size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += mul_c * o->grad[i];
        };
    }
    return out;
}

TensorPtr sigmoid(const TensorPtr& a) {
    auto out = node(a->shape, {a});
    for (size_t i = 0; i < a->data.size(); ++i) {
        double x = a->data[i];
        if (x >= 0.0) {
            out->data[i] = 1.0 / (1.0 + std::exp(-x));
        } else {
            double e = std::exp(x);
            out->data[i] = e / (1.0 + e);
        }
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa] {
            for (size_t i = 0; i < o->grad.size(); ++i) {
                double y = o->data[i];
                pa->grad[i] += o->grad[i] * y * (1.0 - y);
            }
        };
    }
    return out;
}

TensorPtr relu(const TensorPtr& a) {
    auto out = node(a->shape, {a});
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa] {
            for (size_t i = 0; i < o->grad.size(); ++i)
                if (pa->data[i] > 0.0) pa->grad[i] += o->grad[i];
        };
    }
    return out;
}

TensorPtr exp(const TensorPtr& a) {
    auto out = node(a->shape, {a});
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = std::exp(a->data[i]);
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa] {
            for (size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i] * o->data[i];
        };
    }
    return out;
}

TensorPtr log(const TensorPtr& a) {
    for (double v : a->data)
        if (!(v > 0.0)) throw std::domain_error("log: non-positive input " + std::to_string(v));
    auto out = node(a->shape, {a});
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = std::log(a->data[i]);
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa] {
            for (size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i] / pa->data[i];
        };
    }
    return out;
}

TensorPtr clamp(const TensorPtr& a, double lo, double hi) {
    require(lo < hi, "clamp: lo must be < hi");
    auto out = node(a->shape, {a});
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = std::min(hi, std::max(lo, a->data[i]));
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa, lo, hi] {
            for (size_t i = 0; i < o->grad.size(); ++i)
                if (pa->data[i] > lo && pa->data[i] < hi) pa->grad[i] += o->grad[i];
        };
    }
    return out;
}

// ---- reductions ----

TensorPtr sum_all(const TensorPtr& a) {
    auto out = node({1}, {a});
    double s = 0.0;
    for (double v : a->data) s += v;
    out->data[0] = s;
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa] {
            double g = o->grad[0];
            for (size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g;
        };
    }
    return out;
}

TensorPtr mean_all(const TensorPtr& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a->numel())); }

TensorPtr row_sum(const TensorPtr& a) {
    require(a->rank() == 2, "row_sum: rank-2 tensor required, got " + shape_str(a->shape));
    int m = a->dim(0), n = a->dim(1);
    auto out = node({m, 1}, {a});
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        const double* row = a->data.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) s += row[j];
        out->data[static_cast<size_t>(i)] = s;
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa, m, n] {
            for (int i = 0; i < m; ++i) {
                double g = o->grad[static_cast<size_t>(i)];
                double* grow = pa->grad.data() + static_cast<size_t>(i) * n;
                for (int j = 0; j < n; ++j) grow[j] += g;
            }
        };
    }
    return out;
}

TensorPtr mean_rows(const TensorPtr& a) {
    require(a->rank() == 2, "mean_rows: rank-2 tensor required, got " + shape_str(a->shape));
    int m = a->dim(0), n = a->dim(1);
    auto out = node({1, n}, {a});
    for (int i = 0; i < m; ++i) {
        const double* row = a->data.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) out->data[static_cast<size_t>(j)] += row[j];
    }
    for (int j = 0; j < n; ++j) out->data[static_cast<size_t>(j)] /= m;
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa, m, n] {
            double inv = 1.0 / m;
            for (int i = 0; i < m; ++i) {
                double* grow = pa->grad.data() + static_cast<size_t>(i) * n;
                for (int j = 0; j < n; ++j) grow[j] += inv * o->grad[static_cast<size_t>(j)];
            }
        };
    }
    return out;
}

// ---- linear algebra / structure ----

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    require(a->rank() == 2 && b->rank() == 2,
            "matmul: rank-2 tensors required, got " + shape_str(a->shape) + " and " + shape_str(b->shape));
    int m = a->dim(0), k = a->dim(1), n = b->dim(1);
    require(b->dim(0) == k,
            "matmul: inner extents differ, " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = node({m, n}, {a, b});
    mm_kernel(a->data.data(), b->data.data(), out->data.data(), m, k, n);
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a, pb = b;
        out->backward_fn = [o, pa, pb, m, k, n] {
            // transposes are materialized so every product runs through the
            // same fixed-order kernel
            if (pa->requires_grad) {
                auto bt = transpose_copy(pb->data.data(), k, n);  // n x k
                std::vector<double> da(static_cast<size_t>(m) * k, 0.0);
                mm_kernel(o->grad.data(), bt.data(), da.data(), m, n, k);
                axpy(pa->grad, da);
            }
            if (pb->requires_grad) {
                auto at = transpose_copy(pa->data.data(), m, k);  // k x m
                std::vector<double> db(static_cast<size_t>(k) * n, 0.0);
                mm_kernel(at.data(), o->grad.data(), db.data(), k, m, n);
                axpy(pb->grad, db);
            }
        };
    }
    return out;
}

TensorPtr transpose(const TensorPtr& a) {
    require(a->rank() == 2, "transpose: rank-2 tensor required, got " + shape_str(a->shape));
    int m = a->dim(0), n = a->dim(1);
    auto out = node({n, m}, {a});
    out->data = transpose_copy(a->data.data(), m, n);
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa, m, n] {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    pa->grad[static_cast<size_t>(i) * n + j] += o->grad[static_cast<size_t>(j) * m + i];
        };
    }
    return out;
}

TensorPtr reshape(const TensorPtr& a, Shape s) {
    require(shape_numel(s) == a->numel(),
            "reshape: cannot view " + shape_str(a->shape) + " as " + shape_str(s));
    auto out = node(std::move(s), {a});
    out->data = a->data;
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa] { axpy(pa->grad, o->grad); };
    }
    return out;
}

TensorPtr softmax_rows(const TensorPtr& a) {
    require(a->rank() == 2, "softmax_rows: rank-2 tensor required, got " + shape_str(a->shape));
    int m = a->dim(0), n = a->dim(1);
    auto out = node({m, n}, {a});
    for (int i = 0; i < m; ++i) {
        const double* row = a->data.data() + static_cast<size_t>(i) * n;
        double* orow = out->data.data() + static_cast<size_t>(i) * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            s += orow[j];
        }
        for (int j = 0; j < n; ++j) orow[j] /= s;
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa, m, n] {
            for (int i = 0; i < m; ++i) {
                const double* y = o->data.data() + static_cast<size_t>(i) * n;
                const double* g = o->grad.data() + static_cast<size_t>(i) * n;
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += y[j] * g[j];
                double* pg = pa->grad.data() + static_cast<size_t>(i) * n;
                for (int j = 0; j < n; ++j) pg[j] += y[j] * (g[j] - dot);
            }
        };
    }
    return out;
}

TensorPtr take_diag(const TensorPtr& a) {
    require(a->rank() == 2 && a->dim(0) == a->dim(1),
            "take_diag: square matrix required, got " + shape_str(a->shape));
    int m = a->dim(0);
    auto out = node({m, 1}, {a});
    for (int i = 0; i < m; ++i) out->data[static_cast<size_t>(i)] = a->data[static_cast<size_t>(i) * m + i];
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa, m] {
            for (int i = 0; i < m; ++i)
                pa->grad[static_cast<size_t>(i) * m + i] += o->grad[static_cast<size_t>(i)];
        };
    }
    return out;
}

TensorPtr l2_normalize_rows(const TensorPtr& a, double eps) {
    require(a->rank() == 2, "l2_normalize_rows: rank-2 tensor required, got " + shape_str(a->shape));
    int m = a->dim(0), n = a->dim(1);
    auto out = node({m, n}, {a});
    std::vector<double> norms(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double* row = a->data.data() + static_cast<size_t>(i) * n;
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += row[j] * row[j];
        double nrm = std::sqrt(s);
        norms[static_cast<size_t>(i)] = nrm;
        double inv = 1.0 / (nrm + eps);
        double* orow = out->data.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) orow[j] = row[j] * inv;
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa, m, n, eps, norms] {
            // y = x/(|x|+eps); dx = g/(|x|+eps) - x (x.g) / (|x| (|x|+eps)^2)
            for (int i = 0; i < m; ++i) {
                const double* x = pa->data.data() + static_cast<size_t>(i) * n;
                const double* g = o->grad.data() + static_cast<size_t>(i) * n;
                double* pg = pa->grad.data() + static_cast<size_t>(i) * n;
                double nrm = norms[static_cast<size_t>(i)];
                double d = nrm + eps;
                double xg = 0.0;
                for (int j = 0; j < n; ++j) xg += x[j] * g[j];
                double c = nrm > 0.0 ? xg / (nrm * d * d) : 0.0;
                for (int j = 0; j < n; ++j) pg[j] += g[j] / d - x[j] * c;
            }
        };
    }
    return out;
}

TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& b) {
    require(a->rank() == 2, "add_rowvec: rank-2 tensor required, got " + shape_str(a->shape));
    int m = a->dim(0), n = a->dim(1);
    require(b->numel() == n, "add_rowvec: bias length " + std::to_string(b->numel()) + " for " +
                                 shape_str(a->shape));
    auto out = node({m, n}, {a, b});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out->data[static_cast<size_t>(i) * n + j] =
                a->data[static_cast<size_t>(i) * n + j] + b->data[static_cast<size_t>(j)];
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a, pb = b;
        out->backward_fn = [o, pa, pb, m, n] {
            if (pa->requires_grad) axpy(pa->grad, o->grad);
            if (pb->requires_grad) {
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j)
                        pb->grad[static_cast<size_t>(j)] += o->grad[static_cast<size_t>(i) * n + j];
            }
        };
    }
    return out;
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    int m = parts[0]->dim(0);
    int total = 0;
    for (const auto& p : parts) {
        require(p->rank() == 2 && p->dim(0) == m,
                "concat_cols: row mismatch, expected " + std::to_string(m) + " got " + shape_str(p->shape));
        total += p->dim(1);
    }
    auto out = node({m, total}, parts);
    int off = 0;
    for (const auto& p : parts) {
        int n = p->dim(1);
        for (int i = 0; i < m; ++i)
            std::copy_n(p->data.data() + static_cast<size_t>(i) * n, n,
                        out->data.data() + static_cast<size_t>(i) * total + off);
        off += n;
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        std::vector<TensorPtr> ps = parts;
        out->backward_fn = [o, ps, m, total] {
            int off2 = 0;
            for (const auto& p : ps) {
                int n = p->dim(1);
                if (p->requires_grad) {
                    for (int i = 0; i < m; ++i) {
                        const double* g = o->grad.data() + static_cast<size_t>(i) * total + off2;
                        double* pg = p->grad.data() + static_cast<size_t>(i) * n;
                        for (int j = 0; j < n; ++j) pg[j] += g[j];
                    }
                }
                off2 += n;
            }
        };
    }
    return out;
}

TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    int n = parts[0]->dim(1);
    int total = 0;
    for (const auto& p : parts) {
        require(p->rank() == 2 && p->dim(1) == n,
                "concat_rows: column mismatch, expected " + std::to_string(n) + " got " + shape_str(p->shape));
        total += p->dim(0);
    }
    auto out = node({total, n}, parts);
    size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->data.begin(), p->data.end(), out->data.begin() + static_cast<long>(off));
        off += p->data.size();
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        std::vector<TensorPtr> ps = parts;
        out->backward_fn = [o, ps] {
            size_t off2 = 0;
            for (const auto& p : ps) {
                if (p->requires_grad)
                    for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += o->grad[off2 + i];
                off2 += p->data.size();
            }
        };
    }
    return out;
}

TensorPtr stack0(const std::vector<TensorPtr>& parts) {
    require(!parts.empty(), "stack0: no inputs");
    const Shape& s0 = parts[0]->shape;
    for (const auto& p : parts)
        require(p->shape == s0, "stack0: shape mismatch " + shape_str(p->shape) + " vs " + shape_str(s0));
    Shape s;
    s.push_back(static_cast<int>(parts.size()));
    s.insert(s.end(), s0.begin(), s0.end());
    auto out = node(std::move(s), parts);
    size_t block = parts[0]->data.size();
    for (size_t i = 0; i < parts.size(); ++i)
        std::copy(parts[i]->data.begin(), parts[i]->data.end(), out->data.begin() + static_cast<long>(i * block));
    if (out->requires_grad) {
        Tensor* o = out.get();
        std::vector<TensorPtr> ps = parts;
        out->backward_fn = [o, ps, block] {
            for (size_t i = 0; i < ps.size(); ++i) {
                if (!ps[i]->requires_grad) continue;
                const double* g = o->grad.data() + i * block;
                double* pg = ps[i]->grad.data();
                for (size_t j = 0; j < block; ++j) pg[j] += g[j];
            }
        };
    }
    return out;
}

TensorPtr select0(const TensorPtr& a, int i) {
    require(a->rank() >= 2, "select0: rank >= 2 required, got " + shape_str(a->shape));
    require(i >= 0 && i < a->dim(0), "select0: index " + std::to_string(i) + " out of " + shape_str(a->shape));
    Shape s(a->shape.begin() + 1, a->shape.end());
    auto out = node(std::move(s), {a});
    size_t block = out->data.size();
    std::copy_n(a->data.data() + static_cast<size_t>(i) * block, block, out->data.data());
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa, i, block] {
            double* pg = pa->grad.data() + static_cast<size_t>(i) * block;
            for (size_t j = 0; j < block; ++j) pg[j] += o->grad[j];
        };
    }
    return out;
}

TensorPtr select1(const TensorPtr& a, int j) {
    require(a->rank() == 3, "select1: rank-3 tensor required, got " + shape_str(a->shape));
    int d0 = a->dim(0), d1 = a->dim(1), d2 = a->dim(2);
    require(j >= 0 && j < d1, "select1: index " + std::to_string(j) + " out of " + shape_str(a->shape));
    auto out = node({d0, d2}, {a});
    for (int i = 0; i < d0; ++i)
        std::copy_n(a->data.data() + (static_cast<size_t>(i) * d1 + j) * d2, d2,
                    out->data.data() + static_cast<size_t>(i) * d2);
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        out->backward_fn = [o, pa, d0, d1, d2, j] {
            for (int i = 0; i < d0; ++i) {
                double* pg = pa->grad.data() + (static_cast<size_t>(i) * d1 + j) * d2;
                const double* g = o->grad.data() + static_cast<size_t>(i) * d2;
                for (int t = 0; t < d2; ++t) pg[t] += g[t];
            }
        };
    }
    return out;
}

TensorPtr gather_rows(const TensorPtr& a, const std::vector<int>& rows) {
    require(a->rank() == 2, "gather_rows: rank-2 tensor required, got " + shape_str(a->shape));
    require(!rows.empty(), "gather_rows: empty index list");
    int m = a->dim(0), n = a->dim(1);
    for (int r : rows)
        require(r >= 0 && r < m, "gather_rows: row " + std::to_string(r) + " out of " + shape_str(a->shape));
    auto out = node({static_cast<int>(rows.size()), n}, {a});
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy_n(a->data.data() + static_cast<size_t>(rows[i]) * n, n, out->data.data() + i * n);
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a;
        std::vector<int> idx = rows;
        out->backward_fn = [o, pa, idx, n] {
            for (size_t i = 0; i < idx.size(); ++i) {
                double* pg = pa->grad.data() + static_cast<size_t>(idx[i]) * n;
                const double* g = o->grad.data() + i * n;
                for (int j = 0; j < n; ++j) pg[j] += g[j];
            }
        };
    }
    return out;
}

}  // namespace mulcon
