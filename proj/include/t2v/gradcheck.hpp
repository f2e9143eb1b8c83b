#pragma once

// Central-difference gradient oracle shared by the autodiff test suites and
// the gradcheck command. Everything runs in f64: with h=1e-5 the truncation
// error is ~1e-10, well under the 1e-4 acceptance band.

#include <cmath>
#include <functional>
#include <vector>

#include "t2v/tensor.hpp"

namespace gradcheck {

using t2v::Tensor;

inline double rel_err(double a, double b) {
    double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
    return std::fabs(a - b) / denom;
}

// Runs f once under a tape to get analytic grads of a scalar output w.r.t.
// every tensor in `inputs`, then perturbs each input element by ±h and
// re-evaluates. Returns the worst relative error seen.
inline double max_grad_rel_err(std::vector<Tensor<double>>& inputs,
                               const std::function<Tensor<double>()>& f,
                               double h = 1e-5) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    std::vector<std::vector<double>> analytic;
    {
        t2v::Tape<double> tape;
        Tensor<double> y = f();
        tape.backward(y);
    }
    for (auto& t : inputs) analytic.push_back(t.grad_vec());

    double worst = 0.0;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& t = inputs[ti];
        for (size_t i = 0; i < t.numel(); ++i) {
            double saved = t.data()[i];
            t.data()[i] = saved + h;
            double yp = f().item();
            t.data()[i] = saved - h;
            double ym = f().item();
            t.data()[i] = saved;
            double numeric = (yp - ym) / (2.0 * h);
            worst = std::max(worst, rel_err(analytic[ti][i], numeric));
        }
    }
    return worst;
}

}  // namespace gradcheck
