#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nsforge/tensor.hpp"

namespace nsforge {

// Adam with bias correction. One state per parameter list, moments keyed by
// position.
template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    int64_t t = 0;
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
};

template <typename T>
void adam_step(std::vector<Tensor<T>*> params, AdamState<T>& state, T lr) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i]->size(), T(0));
            state.v[i].assign(params[i]->size(), T(0));
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: parameter count changed under state");
    state.t += 1;
    const T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.t));
    const T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& p = *params[i];
        if (static_cast<int64_t>(state.m[i].size()) != p.size())
            throw std::invalid_argument("adam_step: gradient/state shape mismatch");
        if (static_cast<int64_t>(p.grad_values().size()) != p.size())
            throw std::invalid_argument("adam_step: parameter has no gradient");
        T* w = p.data();
        const T* g = p.grad_values().data();
        T* m = state.m[i].data();
        T* v = state.v[i].data();
        const int64_t n = p.size();
        for (int64_t j = 0; j < n; ++j) {
            m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * g[j] * g[j];
            T mhat = m[j] / bc1;
            T vhat = v[j] / bc2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

// Piecewise-constant learning-rate schedule.
struct LrSchedule {
    std::vector<std::pair<int64_t, double>> breakpoints;  // (iteration, rate)
};

inline void validate(const LrSchedule& s) {
    if (s.breakpoints.empty())
        throw std::invalid_argument("LrSchedule: need at least one breakpoint");
    for (size_t i = 0; i < s.breakpoints.size(); ++i) {
        if (s.breakpoints[i].second <= 0.0)
            throw std::invalid_argument("LrSchedule: rates must be positive");
        if (i > 0 && s.breakpoints[i].first <= s.breakpoints[i - 1].first)
            throw std::invalid_argument("LrSchedule: iterations must be strictly increasing");
    }
}

inline double lr_at(const LrSchedule& s, int64_t iteration) {
    validate(s);
    double rate = s.breakpoints.front().second;
    for (const auto& [it, r] : s.breakpoints) {
        if (iteration >= it) rate = r;
        else break;
    }
    return rate;
}

// 2e-4 descending to 6e-5 / 2e-5 / 6e-6 at 120k / 180k / 240k iterations.
inline LrSchedule wavenet_lr_schedule() {
    return {{{0, 2e-4}, {120000, 6e-5}, {180000, 2e-5}, {240000, 6e-6}}};
}

constexpr double kBaselineLearningRate = 1e-4;

// Fan-in-scaled uniform init.
template <typename T>
Tensor<T> rand_uniform_init(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    Tensor<T> t = Tensor<T>::zeros(std::move(shape), true);
    const double s = 1.0 / std::sqrt(static_cast<double>(std::max<int64_t>(1, fan_in)));
    T* d = t.data();
    for (int64_t i = 0; i < t.size(); ++i)
        d[i] = static_cast<T>(rng.uniform(-s, s));
    return t;
}

}  // namespace nsforge
