#pragma once

// Finite-difference gradient oracle shared by the op/model test suites and
// the acceptance runner. Central differences at double precision against the
// recorded reverse-mode gradients.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nsforge/tensor.hpp"

namespace nsforge::testing {

struct GradCheckResult {
    int probes = 0;
    double max_rel_err = 0.0;
    std::string worst;  // where the max occurred
};

// params must be the leaves the loss closure reads; loss_fn rebuilds the
// graph from their current values on every call.
inline GradCheckResult check_gradients(std::vector<Tensor<double>*> params,
                                       const std::function<Tensor<double>()>& loss_fn,
                                       int probes, Rng& rng) {
    for (auto* p : params) p->zero_grad();
    {
        Tensor<double> loss = loss_fn();
        backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    for (auto* p : params)
        analytic.emplace_back(p->grad_values().begin(), p->grad_values().end());

    int64_t total = 0;
    for (auto* p : params) total += p->size();

    GradCheckResult res;
    res.probes = probes;
    for (int probe = 0; probe < probes; ++probe) {
        int64_t flat = static_cast<int64_t>(rng.uniform_int(total));
        size_t pi = 0;
        while (flat >= params[pi]->size()) flat -= params[pi++]->size();
        Tensor<double>& p = *params[pi];

        const double old = p.data()[flat];
        const double h = 1e-5 * std::max(1.0, std::abs(old));
        double lp, lm;
        {
            NoGradScope ng;
            p.data()[flat] = old + h;
            lp = loss_fn().item();
            p.data()[flat] = old - h;
            lm = loss_fn().item();
            p.data()[flat] = old;
        }
        const double numeric = (lp - lm) / (2.0 * h);
        const double ana = analytic[pi].empty() ? 0.0 : analytic[pi][flat];
        const double rel =
            std::abs(numeric - ana) / std::max({std::abs(numeric), std::abs(ana), 1e-5});
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst = "param " + std::to_string(pi) + " index " + std::to_string(flat);
        }
    }
    return res;
}

inline Tensor<double> random_tensor(std::vector<int64_t> shape, Rng& rng,
                                    double lo = -1.0, double hi = 1.0,
                                    bool requires_grad = true) {
    Tensor<double> t = Tensor<double>::zeros(std::move(shape), requires_grad);
    for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

}  // namespace nsforge::testing
