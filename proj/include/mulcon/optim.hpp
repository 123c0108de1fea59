#pragma once

#include <vector>

#include "mulcon/tensor.hpp"

namespace mulcon {

enum class OptKind { Sgd, Adam };

struct OptimizerConfig {
    OptKind kind = OptKind::Sgd;
    double lr = 0.01;
    double momentum = 0.0;      // SGD
    double weight_decay = 0.0;  // L2 term added to the gradient before momentum/moments
    double beta1 = 0.9;         // Adam
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moment buffers are parallel to the parameter list the state was built for.
struct OptimizerState {
    OptimizerConfig cfg;
    long step = 0;
    std::vector<std::vector<double>> m1;  // Adam first moment / SGD velocity
    std::vector<std::vector<double>> m2;  // Adam second moment
    void round_to_f32();
};

OptimizerState init_optimizer(const OptimizerConfig& cfg, const std::vector<TensorPtr>& params);

void sgd_step(std::vector<TensorPtr>& params, OptimizerState& state);
void adam_step(std::vector<TensorPtr>& params, OptimizerState& state);
void optimizer_step(std::vector<TensorPtr>& params, OptimizerState& state);

// ---- learning-rate schedules ----

enum class LrPolicy { OneCycle, StepDecay, Constant };

// One-cycle: cosine ramp from max/div_start to max over the first warmup_frac
// of the run, then cosine anneal down to max/div_final. Step decay:
// lr0 * factor^(epoch / period).
struct LrSchedule {
    LrPolicy policy = LrPolicy::Constant;
    double max_lr = 0.01;  // peak (one-cycle) or initial (others)
    long total_steps = 1;
    double warmup_frac = 0.3;
    double div_start = 25.0;
    double div_final = 1e4;
    double decay_factor = 0.1;
    long decay_period_epochs = 20;
    long steps_per_epoch = 1;
};

LrSchedule one_cycle(double max_lr, long total_steps);
LrSchedule step_decay(double lr0, double factor, long period_epochs, long steps_per_epoch,
                      long total_steps);
LrSchedule constant_lr(double lr, long total_steps);

double lr_at(const LrSchedule& sched, long step);  // throws if step outside [0, total)

}  // namespace mulcon
