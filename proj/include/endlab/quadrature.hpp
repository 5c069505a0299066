#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <vector>

#include "endlab/error.hpp"

namespace endlab {

struct QuadratureOptions {
    double rel_tol = 1e-8;
    double abs_tol = 0.0;
    std::size_t max_intervals = 4000;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t intervals = 0;
};

namespace detail {

struct GkSegment {
    double a, b, value, error;
    bool operator<(const GkSegment& o) const { return error < o.error; }
};

// 7-point Gauss / 15-point Kronrod pair on [a, b]. The error estimate is the
// raw |K15 - G7| difference, which overestimates for smooth integrands.
template <class F>
GkSegment gauss_kronrod_15(F& f, double a, double b) {
    static constexpr double xk[8] = {
        0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
    static constexpr double wk[8] = {
        0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
    static constexpr double wg[4] = {
        0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
        0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = wk[7] * fc;
    double gauss = wg[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const double dx = half * xk[j];
        const double pair = f(center - dx) + f(center + dx);
        kronrod += wk[j] * pair;
        if (j % 2 == 1) gauss += wg[j / 2] * pair;
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod quadrature: the segment with the largest
/// error estimate is bisected until the summed estimate meets the tolerance.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
    if (a == b) return {};
    if (b < a) {
        auto r = integrate(f, b, a, opts);
        r.value = -r.value;
        return r;
    }
    std::priority_queue<detail::GkSegment> heap;
    auto first = detail::gauss_kronrod_15(f, a, b);
    double total = first.value;
    double total_err = first.error;
    heap.push(first);
    while (total_err > std::max(opts.abs_tol, opts.rel_tol * std::abs(total))) {
        if (heap.size() >= opts.max_intervals) {
            throw Error(Errc::quadrature_fail,
                        "tolerance not met on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
        }
        auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            throw Error(Errc::quadrature_fail, "interval collapsed near " + std::to_string(mid));
        }
        auto left = detail::gauss_kronrod_15(f, worst.a, mid);
        auto right = detail::gauss_kronrod_15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to avoid drift from the incremental updates.
    double sum = 0.0, err = 0.0;
    std::size_t n = heap.size();
    while (!heap.empty()) {
        sum += heap.top().value;
        err += heap.top().error;
        heap.pop();
    }
    return {sum, err, n};
}

/// Integrates over [a, b] split at every cut strictly inside the interval.
/// `cuts` must be sorted ascending.
template <class F>
double integrate_piecewise(F&& f, std::span<const double> cuts, double a, double b,
                           const QuadratureOptions& opts = {}) {
    double sum = 0.0;
    double lo = a;
    auto it = std::upper_bound(cuts.begin(), cuts.end(), a);
    for (; it != cuts.end() && *it < b; ++it) {
        sum += integrate(f, lo, *it, opts).value;
        lo = *it;
    }
    sum += integrate(f, lo, b, opts).value;
    return sum;
}

}  // namespace endlab
