#pragma once

#include <cmath>
#include <vector>

#include "immnet/errors.hpp"

namespace immnet {

struct FixedPointOptions {
    double x0 = 0.0;
    double damping = 0.5;  // weight kept on the previous iterate
    double tol = 1e-3;     // stop when |x_{k+1} - x_k| < tol
    int max_iter = 100;
};

struct FixedPointResult {
    double value = 0.0;
    std::vector<double> trace;  // x_0, x_1, ..., final
    int iterations = 0;
};

/// x_{k+1} = damping * x_k + (1 - damping) * f(x_k). Throws
/// ConvergenceError carrying the iterates when max_iter is exhausted.
template <class F>
FixedPointResult damped_fixed_point(F&& f, const FixedPointOptions& opt = {}) {
    FixedPointResult r;
    double x = opt.x0;
    r.trace.push_back(x);
    for (int k = 1; k <= opt.max_iter; ++k) {
        const double next = opt.damping * x + (1.0 - opt.damping) * f(x);
        r.trace.push_back(next);
        const double step = std::abs(next - x);
        x = next;
        if (step < opt.tol) {
            r.value = x;
            r.iterations = k;
            return r;
        }
    }
    const double last_step = std::abs(r.trace.back() - r.trace[r.trace.size() - 2]);
    throw ConvergenceError("fixed point: no convergence within iteration limit", x, last_step, r.trace);
}

}  // namespace immnet
