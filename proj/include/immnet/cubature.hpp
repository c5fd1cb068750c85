#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace immnet {

template <std::size_t Dim>
struct Box {
    std::array<double, Dim> lo{};
    std::array<double, Dim> hi{};

    double volume() const {
        double v = 1.0;
        for (std::size_t d = 0; d < Dim; ++d) v *= hi[d] - lo[d];
        return v;
    }
};

struct CubatureResult {
    double value = 0.0;
    double error = 0.0;  // sum of per-cell |fine - coarse| estimates
    std::size_t cells = 0;
    bool converged = false;
};

namespace detail {

// Full Gauss-Legendre rule on [-1, 1]; Boost stores only the non-negative half.
template <unsigned N>
struct GaussRule {
    std::array<double, N> nodes{};
    std::array<double, N> weights{};

    GaussRule() {
        using Table = boost::math::quadrature::gauss<double, N>;
        const auto& x = Table::abscissa();
        const auto& w = Table::weights();
        std::size_t k = 0;
        for (std::size_t i = x.size(); i-- > 0;) {
            if (x[i] == 0.0) continue;
            nodes[k] = -x[i];
            weights[k++] = w[i];
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            nodes[k] = x[i];
            weights[k++] = w[i];
        }
    }
};

template <unsigned N>
const GaussRule<N>& gauss_rule() {
    static const GaussRule<N> rule;
    return rule;
}

// Tensor-product rule over `box`.
template <unsigned N, std::size_t Dim, class F>
double tensor_gauss(const F& f, const Box<Dim>& box) {
    const auto& rule = gauss_rule<N>();
    std::array<std::array<double, N>, Dim> x{};
    std::array<double, Dim> half{};
    for (std::size_t d = 0; d < Dim; ++d) {
        half[d] = 0.5 * (box.hi[d] - box.lo[d]);
        const double mid = 0.5 * (box.hi[d] + box.lo[d]);
        for (unsigned i = 0; i < N; ++i) x[d][i] = mid + half[d] * rule.nodes[i];
    }

    std::array<unsigned, Dim> idx{};
    std::array<double, Dim> point{};
    double sum = 0.0;
    for (;;) {
        double w = 1.0;
        for (std::size_t d = 0; d < Dim; ++d) {
            point[d] = x[d][idx[d]];
            w *= rule.weights[idx[d]];
        }
        sum += w * f(point);

        std::size_t d = 0;
        while (d < Dim && ++idx[d] == N) idx[d++] = 0;
        if (d == Dim) break;
    }

    double scale = 1.0;
    for (std::size_t d = 0; d < Dim; ++d) scale *= half[d];
    return sum * scale;
}

}  // namespace detail

/// Globally adaptive cubature of f over a Dim-dimensional box.
///
/// Each cell is integrated with tensor-product Gauss-Legendre rules of order
/// 4 and 5; their difference is the cell's error estimate. The cell with the
/// largest estimate is bisected along its widest side until the summed
/// estimate drops below `abs_tol` or `max_cells` cells exist. The returned
/// value uses the order-5 rule. `converged` reports whether the tolerance
/// was met; the caller decides whether that is fatal.
template <std::size_t Dim, class F>
CubatureResult adaptive_gauss(const F& f, const Box<Dim>& box, double abs_tol,
                              std::size_t max_cells) {
    struct Cell {
        Box<Dim> box;
        double value;
        double error;
        bool operator<(const Cell& other) const { return error < other.error; }
    };

    auto evaluate = [&f](const Box<Dim>& b) {
        const double fine = detail::tensor_gauss<5>(f, b);
        const double coarse = detail::tensor_gauss<4>(f, b);
        return Cell{b, fine, std::abs(fine - coarse)};
    };

    std::priority_queue<Cell> heap;
    Cell root = evaluate(box);
    double value = root.value;
    double error = root.error;
    heap.push(root);

    while (error > abs_tol && heap.size() < max_cells) {
        Cell worst = heap.top();
        heap.pop();

        std::size_t axis = 0;
        for (std::size_t d = 1; d < Dim; ++d) {
            if (worst.box.hi[d] - worst.box.lo[d] > worst.box.hi[axis] - worst.box.lo[axis]) axis = d;
        }
        const double mid = 0.5 * (worst.box.lo[axis] + worst.box.hi[axis]);
        Box<Dim> left = worst.box;
        Box<Dim> right = worst.box;
        left.hi[axis] = mid;
        right.lo[axis] = mid;

        Cell a = evaluate(left);
        Cell b = evaluate(right);
        value += a.value + b.value - worst.value;
        error += a.error + b.error - worst.error;
        heap.push(a);
        heap.push(b);
    }

    // Re-sum to shed the drift of the running updates.
    CubatureResult result;
    result.cells = heap.size();
    while (!heap.empty()) {
        result.value += heap.top().value;
        result.error += heap.top().error;
        heap.pop();
    }
    result.converged = result.error <= abs_tol;
    return result;
}

}  // namespace immnet
