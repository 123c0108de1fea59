#include "mulcon/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace mulcon {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(s));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape s, bool req)
    : shape(std::move(s)),
      data(static_cast<size_t>(shape_numel(shape)), 0.0),
      requires_grad(req),
      grad(req ? data.size() : 0, 0.0) {}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item(): tensor has shape " + shape_str(shape));
    return data[0];
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::round_to_f32() {
    for (double& v : data) v = static_cast<double>(static_cast<float>(v));
}

TensorPtr Tensor::create(Shape s, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(s), requires_grad);
}

TensorPtr Tensor::from(Shape s, std::vector<double> values, bool requires_grad) {
    auto t = create(std::move(s), requires_grad);
    if (values.size() != t->data.size())
        throw std::invalid_argument("from(): " + std::to_string(values.size()) + " values for shape " +
                                    shape_str(t->shape));
    t->data = std::move(values);
    return t;
}

TensorPtr Tensor::full(Shape s, double v, bool requires_grad) {
    auto t = create(std::move(s), requires_grad);
    std::fill(t->data.begin(), t->data.end(), v);
    return t;
}

TensorPtr Tensor::zeros(Shape s, bool requires_grad) {
    return create(std::move(s), requires_grad);
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void backward(const TensorPtr& loss) {
    if (!loss) throw std::invalid_argument("backward: null tensor");
    if (loss->numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(loss->shape));
    if (!loss->requires_grad)
        throw std::invalid_argument("backward: loss is not connected to any differentiable input");

    // Post-order DFS over grad-requiring parents, visiting each node's parents
    // in their stored order. Reversed, this is a topological order independent
    // of allocation addresses.
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> seen;
    struct Frame {
        Tensor* t;
        size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({loss.get(), 0});
    seen.insert(loss.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.t->parents.size()) {
            Tensor* p = f.t->parents[f.next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.t);
            stack.pop_back();
        }
    }

    // interior nodes restart from zero; leaves keep accumulating
    for (Tensor* t : order)
        if (t->backward_fn) t->zero_grad();

    loss->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

}  // namespace mulcon
