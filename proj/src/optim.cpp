#include "mulcon/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mulcon {

void OptimizerState::round_to_f32() {
    for (auto& buf : m1)
        for (double& v : buf) v = static_cast<double>(static_cast<float>(v));
    for (auto& buf : m2)
        for (double& v : buf) v = static_cast<double>(static_cast<float>(v));
}

OptimizerState init_optimizer(const OptimizerConfig& cfg, const std::vector<TensorPtr>& params) {
    OptimizerState st;
    st.cfg = cfg;
    st.m1.reserve(params.size());
    for (const auto& p : params) st.m1.emplace_back(p->data.size(), 0.0);
    if (cfg.kind == OptKind::Adam) {
        st.m2.reserve(params.size());
        for (const auto& p : params) st.m2.emplace_back(p->data.size(), 0.0);
    }
    return st;
}

namespace {
void check_params(const std::vector<TensorPtr>& params, const OptimizerState& st) {
    if (params.size() != st.m1.size())
        throw std::invalid_argument("optimizer: parameter list does not match state");
    for (const auto& p : params) {
        if (!p->requires_grad || p->grad.size() != p->data.size())
            throw std::invalid_argument("optimizer: parameter is missing gradients");
    }
}
}  // namespace

void sgd_step(std::vector<TensorPtr>& params, OptimizerState& st) {
    check_params(params, st);
    st.step += 1;
    const double lr = st.cfg.lr, mu = st.cfg.momentum, wd = st.cfg.weight_decay;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        std::vector<double>& vel = st.m1[pi];
        for (size_t i = 0; i < p.data.size(); ++i) {
            double g = p.grad[i] + wd * p.data[i];
            vel[i] = mu * vel[i] + g;
            p.data[i] -= lr * vel[i];
        }
    }
}

void adam_step(std::vector<TensorPtr>& params, OptimizerState& st) {
    check_params(params, st);
    if (st.m2.size() != st.m1.size()) throw std::invalid_argument("adam_step: state built for SGD");
    st.step += 1;
    const double lr = st.cfg.lr, b1 = st.cfg.beta1, b2 = st.cfg.beta2, eps = st.cfg.eps,
                 wd = st.cfg.weight_decay;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        std::vector<double>& m = st.m1[pi];
        std::vector<double>& v = st.m2[pi];
        for (size_t i = 0; i < p.data.size(); ++i) {
            double g = p.grad[i] + wd * p.data[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            double mh = m[i] / bc1;
            double vh = v[i] / bc2;
            p.data[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

void optimizer_step(std::vector<TensorPtr>& params, OptimizerState& st) {
    if (st.cfg.kind == OptKind::Adam)
        adam_step(params, st);
    else
        sgd_step(params, st);
}

LrSchedule one_cycle(double max_lr, long total_steps) {
    LrSchedule s;
    s.policy = LrPolicy::OneCycle;
    s.max_lr = max_lr;
    s.total_steps = total_steps;
    return s;
}

LrSchedule step_decay(double lr0, double factor, long period_epochs, long steps_per_epoch,
                      long total_steps) {
    LrSchedule s;
    s.policy = LrPolicy::StepDecay;
    s.max_lr = lr0;
    s.decay_factor = factor;
    s.decay_period_epochs = period_epochs;
    s.steps_per_epoch = steps_per_epoch;
    s.total_steps = total_steps;
    return s;
}

LrSchedule constant_lr(double lr, long total_steps) {
    LrSchedule s;
    s.policy = LrPolicy::Constant;
    s.max_lr = lr;
    s.total_steps = total_steps;
    return s;
}

double lr_at(const LrSchedule& sched, long step) {
    if (step < 0 || step >= sched.total_steps)
        throw std::out_of_range("lr_at: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(sched.total_steps) + ")");
    switch (sched.policy) {
        case LrPolicy::Constant:
            return sched.max_lr;
        case LrPolicy::StepDecay: {
            long epoch = step / sched.steps_per_epoch;
            long k = epoch / sched.decay_period_epochs;
            return sched.max_lr * std::pow(sched.decay_factor, static_cast<double>(k));
        }
        case LrPolicy::OneCycle: {
            const double start = sched.max_lr / sched.div_start;
            const double final_lr = sched.max_lr / sched.div_final;
            const long warm = static_cast<long>(sched.warmup_frac * static_cast<double>(sched.total_steps));
            if (step < warm) {
                double u = static_cast<double>(step) / static_cast<double>(warm);
                return start + (sched.max_lr - start) * 0.5 * (1.0 - std::cos(M_PI * u));
            }
            long span = sched.total_steps - 1 - warm;
            double v = span > 0 ? static_cast<double>(step - warm) / static_cast<double>(span) : 0.0;
            return final_lr + (sched.max_lr - final_lr) * 0.5 * (1.0 + std::cos(M_PI * v));
        }
    }
    throw std::logic_error("lr_at: unknown policy");
}

}  // namespace mulcon
