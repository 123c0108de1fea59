#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mulcon {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major tensor participating in a define-by-run tape. Ops that see
// at least one grad-requiring input produce a node carrying the closure that
// scatters the node's adjoint into its parents; leaves carry none. The tape
// is rebuilt on every forward pass.
class Tensor {
public:
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // same length as data iff requires_grad

    std::vector<TensorPtr> parents;
    std::function<void()> backward_fn;

    Tensor(Shape s, bool req);

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    bool is_leaf() const { return !backward_fn; }

    double item() const;
    void zero_grad();
    bool all_finite() const;
    // Snap every value to the nearest 32-bit float. Persistent training state
    // is kept on this grid so checkpoints (which store f32) round-trip
    // losslessly and mid-run resume is exact.
    void round_to_f32();

    static TensorPtr create(Shape s, bool requires_grad = false);
    static TensorPtr from(Shape s, std::vector<double> values, bool requires_grad = false);
    static TensorPtr full(Shape s, double v, bool requires_grad = false);
    static TensorPtr zeros(Shape s, bool requires_grad = false);
};

// Thread-local tape switch; ops skip recording while disabled (inference).
bool grad_enabled();
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Reverse sweep from a scalar loss. Interior grads restart from zero each
// call; leaf grads accumulate until explicitly zeroed. Node order is the
// reverse of a deterministic DFS post-order, so repeated sweeps are
// bit-identical.
void backward(const TensorPtr& loss);

}  // namespace mulcon
