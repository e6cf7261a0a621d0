#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "vser/tensor.hpp"

namespace vser {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class S>
struct AdamState {
    int64_t step = 0;
    std::vector<S> m, v;  // first/second moment, parameter-shaped
};

// One bias-corrected update. A parameter whose gradient was never touched
// this step is treated as having zero gradient.
template <class S>
void adam_step(Tensor<S>& param, AdamState<S>& state, double lr,
               const AdamConfig& cfg = {}) {
    auto& p = param.value();
    if (state.m.empty()) {
        state.m.assign(p.size(), S(0));
        state.v.assign(p.size(), S(0));
    }
    if (state.m.size() != p.size())
        throw ShapeError("adam_step: state/parameter size mismatch");

    const auto* g = param.has_grad() ? param.grad().data() : nullptr;
    state.step += 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (size_t i = 0; i < p.size(); ++i) {
        const double gi = g ? static_cast<double>(g[i]) : 0.0;
        const double m = b1 * state.m[i] + (1.0 - b1) * gi;
        const double v = b2 * state.v[i] + (1.0 - b2) * gi * gi;
        state.m[i] = static_cast<S>(m);
        state.v[i] = static_cast<S>(v);
        const double mhat = m / c1;
        const double vhat = v / c2;
        p[i] -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
}

template <class S>
class Adam {
  public:
    explicit Adam(std::vector<Tensor<S>> params, AdamConfig cfg = {})
        : params_(std::move(params)), states_(params_.size()), cfg_(cfg) {}

    void step(double lr) {
        for (size_t i = 0; i < params_.size(); ++i)
            adam_step(params_[i], states_[i], lr, cfg_);
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    const std::vector<Tensor<S>>& params() const { return params_; }

  private:
    std::vector<Tensor<S>> params_;
    std::vector<AdamState<S>> states_;
    AdamConfig cfg_;
};

}  // namespace vser
