#include "mulcon/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mulcon/ops.hpp"
#include "mulcon/rng.hpp"

namespace mulcon {

double max_rel_grad_error(const std::function<TensorPtr()>& forward,
                          const std::vector<TensorPtr>& leaves, double h, int max_coords_per_leaf,
                          uint64_t seed) {
    for (const auto& l : leaves)
        if (!l->requires_grad) throw std::invalid_argument("max_rel_grad_error: leaf without grad");

    TensorPtr out = forward();
    Rng wrng(derive_seed(seed, 0xabcd));
    std::vector<double> weights(static_cast<size_t>(out->numel()));
    for (double& w : weights) w = wrng.uniform(-1.0, 1.0);

    auto weighted = [&](const TensorPtr& t) {
        double s = 0.0;
        for (size_t i = 0; i < t->data.size(); ++i) s += t->data[i] * weights[i];
        return s;
    };

    // analytic side: loss = sum(out .* w)
    TensorPtr wt = Tensor::from(out->shape, weights);
    TensorPtr loss = sum_all(mul(out, wt));
    for (const auto& l : leaves) l->zero_grad();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const auto& l : leaves) analytic.push_back(l->grad);

    double worst = 0.0;
    Rng crng(derive_seed(seed, 0xc0de));
    for (size_t li = 0; li < leaves.size(); ++li) {
        Tensor& leaf = *leaves[li];
        std::vector<int64_t> coords;
        int64_t n = leaf.numel();
        if (max_coords_per_leaf < 0 || max_coords_per_leaf >= n) {
            coords.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        } else {
            for (int i = 0; i < max_coords_per_leaf; ++i)
                coords.push_back(static_cast<int64_t>(crng.next_u64() % static_cast<uint64_t>(n)));
        }
        for (int64_t ci : coords) {
            size_t c = static_cast<size_t>(ci);
            double saved = leaf.data[c];
            double fp, fm;
            {
                NoGradGuard ng;
                leaf.data[c] = saved + h;
                fp = weighted(forward());
                leaf.data[c] = saved - h;
                fm = weighted(forward());
            }
            leaf.data[c] = saved;
            double numeric = (fp - fm) / (2.0 * h);
            double err = std::abs(analytic[li][c] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace mulcon
