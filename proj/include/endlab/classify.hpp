#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "endlab/volume.hpp"

namespace endlab {

enum class Verdict { no, yes, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::no: return "no";
        case Verdict::yes: return "yes";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

/// Grid and thresholds for classify_end. Radii are handled as u = log r so
/// that very large r_max (e.g. e^10000) stay representable.
struct ClassifyOptions {
    double log_r_max = 1e4;
    double fine_step = 0.05;        // u-step on [1, fine_until]
    double fine_until = 64.0;
    double coarse_ratio = 1.01;     // u_{j+1} / u_j beyond fine_until
    double ratio_constant = 100.0;  // admissible c^{-1}, C in the regular-volume test
    double divergence_threshold = 10.0;
};

struct EndClassification {
    Verdict parabolic = Verdict::inconclusive;
    Verdict subcritical = Verdict::inconclusive;
    Verdict regular = Verdict::inconclusive;
    double h_at_max = 0.0;
    double loglog_slope = 0.0;     // dh / d(log log r) over the last half-decade of log r
    double loglog_slope_ratio = 0.0;
    double sub_constant = 0.0;     // sup h V / r^2
    double sub_delta = 0.0;        // fitted from V(r) <= C r^{2 - delta}
    double gamma1 = std::numeric_limits<double>::quiet_NaN();
    double gamma2 = std::numeric_limits<double>::quiet_NaN();
};

/// Geometric radius grid from r = e^{u_min} to e^{u_max}: uniform steps in u up to
/// `fine_until`, then u grows geometrically.
inline std::vector<double> classification_grid(double u_min, double u_max, const ClassifyOptions& o = {}) {
    std::vector<double> g;
    double u = u_min;
    while (u < u_max) {
        g.push_back(u);
        u = u < o.fine_until ? u + o.fine_step : u * o.coarse_ratio;
    }
    g.push_back(u_max);
    return g;
}

namespace detail {

// Lattice {0.1, 0.2, ..., 1.9} used for every fitted exponent.
inline std::vector<double> exponent_lattice() {
    std::vector<double> l;
    for (int i = 1; i <= 19; ++i) l.push_back(0.1 * i);
    return l;
}

// max over pairs u_i <= u_j of g(u_j) - g(u_i).
inline double max_forward_increase(std::span<const double> g) {
    double best = -INFINITY, run_min = INFINITY;
    for (double x : g) {
        run_min = std::min(run_min, x);
        best = std::max(best, x - run_min);
    }
    return best;
}

// min over pairs u_i <= u_j of g(u_j) - g(u_i).
inline double min_forward_increase(std::span<const double> g) {
    double best = INFINITY, run_max = -INFINITY;
    for (double x : g) {
        run_max = std::max(run_max, x);
        best = std::min(best, x - run_max);
    }
    return best;
}

inline std::size_t index_at_or_after(std::span<const double> grid, double u) {
    return static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), u) - grid.begin());
}

}  // namespace detail

/// Smallest lattice gamma with log V(R) - log V(r) <= log K + (2 + gamma) log(R / r)
/// over all grid pairs (upper = true), or >= -log K + (2 - gamma) log(R / r)
/// (upper = false). NaN if none fits.
inline double fit_regular_exponent(std::span<const double> grid, std::span<const double> log_v, double log_k,
                                   bool upper) {
    std::vector<double> g(grid.size());
    for (double gamma : detail::exponent_lattice()) {
        const double slope = upper ? 2.0 + gamma : 2.0 - gamma;
        for (std::size_t i = 0; i < grid.size(); ++i) g[i] = log_v[i] - slope * grid[i];
        const bool ok = upper ? detail::max_forward_increase(g) <= log_k : detail::min_forward_increase(g) >= -log_k;
        if (ok) return gamma;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// Parabolicity, subcriticality and regularity of one end, judged on a grid
/// r in [e, r_max]. Mixed evidence is reported as Verdict::inconclusive.
inline EndClassification classify_end(const VolumeProfile& p, const ClassifyOptions& o = {}) {
    require(o.log_r_max >= 2.0, Errc::invalid_argument, "classify_end needs r_max >= e^2");
    auto grid = classification_grid(1.0, o.log_r_max, o);
    auto h = h_on_log_grid(p, grid);
    // h overflows for slowly growing volumes; it is past any divergence
    // threshold by then, so the grid ends at the last finite value.
    const auto finite_end = std::find_if(h.begin(), h.end(), [](double x) { return !std::isfinite(x); });
    if (finite_end != h.end()) {
        const auto n = static_cast<std::size_t>(finite_end - h.begin());
        require(n >= 8, Errc::quadrature_fail, "h overflows too early on the classification grid");
        h.resize(n);
        grid.resize(n);
    }
    std::vector<double> log_v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) log_v[i] = p.log_volume(grid[i]);

    EndClassification c;
    const double u_max = grid.back();
    c.h_at_max = h.back();

    // Parabolicity: slope of h against log u on the last two half-decades of u.
    {
        const double u1 = u_max / 10.0, u2 = u_max / std::sqrt(10.0);
        const std::size_t i1 = detail::index_at_or_after(grid, u1);
        const std::size_t i2 = detail::index_at_or_after(grid, u2);
        const double half_decade = 0.5 * std::log(10.0);
        const double s_early = (h[i2] - h[i1]) / half_decade;
        const double s_late = (h.back() - h[i2]) / half_decade;
        c.loglog_slope = s_late;
        c.loglog_slope_ratio = s_early > 0.0 ? s_late / s_early : 0.0;
        if (!(s_late > 1e-12 * c.h_at_max) || c.loglog_slope_ratio <= 0.75) {
            c.parabolic = Verdict::no;
        } else if (c.loglog_slope_ratio >= 0.95 || c.h_at_max > o.divergence_threshold) {
            c.parabolic = Verdict::yes;
        } else {
            c.parabolic = Verdict::inconclusive;
        }
    }

    // Subcriticality: q = h V / r^2 must stay bounded; delta from the tail slope of V.
    {
        std::vector<double> log_q(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) log_q[i] = std::log(h[i]) + log_v[i] - 2.0 * grid[i];
        const std::size_t mid = detail::index_at_or_after(grid, 0.5 * u_max);
        const double lower = *std::max_element(log_q.begin(), log_q.begin() + mid);
        const double upper = *std::max_element(log_q.begin() + mid, log_q.end());
        const double growth = upper - lower;
        c.sub_constant = std::exp(std::max(lower, upper));
        c.sub_delta = 2.0 - (log_v.back() - log_v[mid]) / (u_max - grid[mid]);
        if (growth > std::log(1.5)) {
            c.subcritical = Verdict::no;
        } else if (c.sub_delta > 1e-3) {
            c.subcritical = Verdict::yes;
        } else {
            c.subcritical = Verdict::inconclusive;
        }
    }

    // Regularity: lattice search for (gamma1, gamma2), 2 gamma1 + gamma2 < 2.
    {
        const double log_k = std::log(o.ratio_constant);
        c.gamma1 = fit_regular_exponent(grid, log_v, log_k, true);
        c.gamma2 = fit_regular_exponent(grid, log_v, log_k, false);
        const bool found = !std::isnan(c.gamma1) && !std::isnan(c.gamma2);
        c.regular = found && 2.0 * c.gamma1 + c.gamma2 < 2.0 - 1e-12 ? Verdict::yes : Verdict::no;
    }
    return c;
}

inline EndClassification classify_end(const VolumeProfile& p, double log_r_max) {
    ClassifyOptions o;
    o.log_r_max = log_r_max;
    return classify_end(p, o);
}

/// sup over the grid of V(2r) / V(r), r in [1, r_max].
inline double check_doubling(const VolumeProfile& p, double log_r_max, const ClassifyOptions& o = {}) {
    const double l2 = std::log(2.0);
    double worst = 0.0;
    auto probe = [&](double u) { worst = std::max(worst, p.log_volume(u + l2) - p.log_volume(u)); };
    for (double u : classification_grid(0.0, log_r_max, o)) probe(u);
    for (double b : p.log_breakpoints()) {
        if (b - l2 >= 0.0 && b <= log_r_max) probe(b - l2);
    }
    return std::exp(worst);
}

/// sup over the grid of r V'(r) / V(r), skipping breakpoints.
inline double check_rv_prime(const VolumeProfile& p, double log_r_max, const ClassifyOptions& o = {}) {
    double worst = 0.0;
    for (double u : classification_grid(0.0, log_r_max, o)) {
        const double x = p.near_breakpoint(u) ? u + 1e-9 * std::max(1.0, u) : u;
        worst = std::max(worst, p.local_exponent(x));
    }
    return worst;
}

struct WeightConditions {
    bool h1_ok = false;
    double h1_constant = 0.0;  // sup over [r, 2r] of W divided by inf over [r, 2r]
    bool h2_ok = false;
    double h2_constant = 0.0;  // sup of int_0^r W^2 s ds / (W^2(r) r^2)
};

namespace detail {

// Sliding dyadic window over samples of log W; returns the worst sup/inf ratio
// restricted to window starts in [u_lo, u_hi).
inline double dyadic_oscillation(std::span<const double> u, std::span<const double> log_w, double u_lo, double u_hi) {
    const double l2 = std::log(2.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] < u_lo || u[i] >= u_hi) continue;
        double hi = log_w[i], lo = log_w[i];
        for (std::size_t k = i; k < u.size() && u[k] <= u[i] + l2; ++k) {
            hi = std::max(hi, log_w[k]);
            lo = std::min(lo, log_w[k]);
        }
        worst = std::max(worst, hi - lo);
    }
    return std::exp(worst);
}

inline std::vector<double> weight_grid(double u_min, double u_max, std::span<const double> breakpoints, double step) {
    std::vector<double> g;
    for (double u = u_min; u < u_max; u += step) g.push_back(u);
    g.push_back(u_max);
    for (double b : breakpoints) {
        if (b > u_min && b < u_max) {
            g.push_back(b - 1e-9 * std::max(1.0, b));
            g.push_back(b + 1e-9 * std::max(1.0, b));
        }
    }
    std::sort(g.begin(), g.end());
    return g;
}

}  // namespace detail

/// Dyadic comparability of W (h1) and the growth bound int_0^r W^2 s ds <= C W^2 r^2
/// (h2) for the weight W with W^2 = V' / (2 pi r), checked on
/// r in [1, r_max]. A condition is reported as holding when its worst constant
/// on the upper half of the log-grid does not exceed twice the lower-half value.
inline WeightConditions check_h1_h2(const VolumeProfile& p, double log_r_max, double step = 0.01) {
    const auto grid = detail::weight_grid(0.0, log_r_max, p.log_breakpoints(), step);
    std::vector<double> log_w(grid.size()), inv_exp(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        log_w[i] = 0.5 * (p.log_density(grid[i]) - std::log(2.0 * std::numbers::pi) - grid[i]);
        // int_0^r W^2 s ds = V / (2 pi), so the growth ratio is V / (r V').
        inv_exp[i] = 1.0 / p.local_exponent(grid[i]);
    }
    const double mid = 0.5 * log_r_max;
    WeightConditions w;
    const double h1_lower = detail::dyadic_oscillation(grid, log_w, 0.0, mid);
    const double h1_upper = detail::dyadic_oscillation(grid, log_w, mid, log_r_max);
    w.h1_constant = std::max(h1_lower, h1_upper);
    w.h1_ok = std::isfinite(w.h1_constant) && h1_upper <= 2.0 * h1_lower;

    const std::size_t imid = detail::index_at_or_after(grid, mid);
    const double h2_lower = *std::max_element(inv_exp.begin(), inv_exp.begin() + imid);
    const double h2_upper = *std::max_element(inv_exp.begin() + imid, inv_exp.end());
    w.h2_constant = std::max(h2_lower, h2_upper);
    w.h2_ok = std::isfinite(w.h2_constant) && h2_upper <= 2.0 * h2_lower;
    return w;
}

/// Same check for an arbitrary weight given as u -> log W(e^u); the growth
/// integral is evaluated by quadrature from r = e^{u_min}.
inline WeightConditions check_h1_h2(const std::function<double(double)>& log_w_of_u, double log_r_max,
                                    double step = 0.01, double u_min = -30.0) {
    const std::vector<double> none;
    const auto grid = detail::weight_grid(0.0, log_r_max, none, step);
    std::vector<double> log_w(grid.size()), ratio(grid.size());
    auto integrand = [&](double s) { return std::exp(2.0 * log_w_of_u(s) + 2.0 * s); };
    double acc = integrate(integrand, u_min, 0.0, {1e-10, 0.0, 4000}).value;
    double prev = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        log_w[i] = log_w_of_u(grid[i]);
        if (grid[i] > prev) acc += integrate(integrand, prev, grid[i], {1e-10, 0.0, 4000}).value;
        prev = grid[i];
        ratio[i] = acc / std::exp(2.0 * log_w[i] + 2.0 * grid[i]);
    }
    const double mid = 0.5 * log_r_max;
    WeightConditions w;
    const double h1_lower = detail::dyadic_oscillation(grid, log_w, 0.0, mid);
    const double h1_upper = detail::dyadic_oscillation(grid, log_w, mid, log_r_max);
    w.h1_constant = std::max(h1_lower, h1_upper);
    w.h1_ok = std::isfinite(w.h1_constant) && h1_upper <= 2.0 * h1_lower;
    const std::size_t imid = detail::index_at_or_after(grid, mid);
    const double h2_lower = *std::max_element(ratio.begin(), ratio.begin() + imid);
    const double h2_upper = *std::max_element(ratio.begin() + imid, ratio.end());
    w.h2_constant = std::max(h2_lower, h2_upper);
    w.h2_ok = std::isfinite(w.h2_constant) && h2_upper <= 2.0 * h2_lower;
    return w;
}

}  // namespace endlab
