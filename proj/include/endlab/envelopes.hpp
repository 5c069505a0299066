#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "endlab/classify.hpp"
#include "endlab/volume.hpp"

namespace endlab {

/// Admissible size of the "c" and "C" constants when a uniform comparison
/// V_i >= c V_j is judged on a finite grid.
inline constexpr double comparison_constant = 4.0;

struct DominanceReport {
    bool holds = false;
    std::size_t m = 0;             // candidate end (lowest index on ties)
    double volume_constant = 0.0;  // sup_i V_i / V_m
    double vh2_constant = 0.0;     // sup_i V_m h_m^2 / (V_i h_i^2)
    double violating_log_r = std::numeric_limits<double>::quiet_NaN();
};

struct COEDecomposition {
    std::vector<std::size_t> I_super, I_middle, I_sub;
    double epsilon = 0.0, delta = 0.0, gamma1 = 0.0, gamma2 = 0.0;
};

/// k glued ends with the center vertex o. Every end is classified on construction.
class ManifoldSpec {
public:
    static ManifoldSpec make(std::vector<EndSpec> ends, double log_r_max = 1e4) {
        require(!ends.empty(), Errc::invalid_argument, "a manifold needs at least one end");
        std::set<std::string> labels;
        for (const auto& e : ends) {
            require(labels.insert(e.label).second, Errc::invalid_argument, "duplicate end label: " + e.label);
        }
        ManifoldSpec s;
        s.ends_ = std::move(ends);
        s.log_r_max_ = log_r_max;
        for (const auto& e : s.ends_) s.classes_.push_back(classify_end(e.profile, log_r_max));
        return s;
    }

    const std::vector<EndSpec>& ends() const { return ends_; }
    const EndSpec& end(std::size_t i) const { return ends_.at(i); }
    const EndClassification& classification(std::size_t i) const { return classes_.at(i); }
    std::size_t size() const { return ends_.size(); }
    double log_r_max() const { return log_r_max_; }

    bool all_parabolic() const {
        return std::all_of(classes_.begin(), classes_.end(),
                           [](const auto& c) { return c.parabolic == Verdict::yes; });
    }
    bool any_nonparabolic() const {
        return std::any_of(classes_.begin(), classes_.end(), [](const auto& c) { return c.parabolic == Verdict::no; });
    }
    bool all_subcritical() const {
        return std::all_of(classes_.begin(), classes_.end(),
                           [](const auto& c) { return c.subcritical == Verdict::yes; });
    }

private:
    std::vector<EndSpec> ends_;
    std::vector<EndClassification> classes_;
    double log_r_max_ = 1e4;
};

namespace detail {

struct EndLogs {
    double log_v;
    double log_h;
};

inline std::vector<EndLogs> end_logs(const ManifoldSpec& s, double u) {
    std::vector<EndLogs> out;
    for (const auto& e : s.ends()) out.push_back({e.profile.log_volume(u), std::log(compute_h_log(e.profile, u))});
    return out;
}

// Lowest index attaining the maximum of key(i) over i != skip.
template <class F>
std::size_t argmax_index(std::size_t n, F key, std::size_t skip = static_cast<std::size_t>(-1)) {
    std::size_t best = static_cast<std::size_t>(-1);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == skip) continue;
        if (best == static_cast<std::size_t>(-1) || key(i) > key(best)) best = i;
    }
    return best;
}

inline double half_log_t(double t) {
    require(t > 1.0, Errc::invalid_argument, "envelopes are defined for t > 1");
    return 0.5 * std::log(t);
}

inline double gaussian(double d, double t, double b) { return std::exp(-b * d * d / t); }

}  // namespace detail

/// p(t,o,o) ~ 1 / min_i V_i(sqrt t) h_i^2(sqrt t).
inline double smallest_end_envelope(const ManifoldSpec& s, double t) {
    if (!s.any_nonparabolic()) throw Error(Errc::not_applicable, "all ends are parabolic");
    const double u = detail::half_log_t(t);
    double lo = INFINITY;
    for (const auto& e : detail::end_logs(s, u)) lo = std::min(lo, e.log_v + 2.0 * e.log_h);
    return std::exp(-lo);
}

/// Dominating end on a grid of u = log r: finds m with V_m >= c V_i and
/// V_m h_m^2 <= C V_i h_i^2, both constants bounded by comparison_constant.
inline DominanceReport check_dominating(const ManifoldSpec& s, std::span<const double> log_grid) {
    const std::size_t k = s.size();
    std::vector<std::vector<double>> lv(k), lvh(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& p = s.end(i).profile;
        const auto h = h_on_log_grid(p, log_grid);
        for (std::size_t j = 0; j < log_grid.size(); ++j) {
            lv[i].push_back(p.log_volume(log_grid[j]));
            lvh[i].push_back(lv[i].back() + 2.0 * std::log(h[j]));
        }
    }
    const double log_k = std::log(comparison_constant);
    DominanceReport best;
    double best_score = INFINITY;
    for (std::size_t m = 0; m < k; ++m) {
        DominanceReport r;
        r.m = m;
        double wv = 0.0, wh = 0.0;
        for (std::size_t j = 0; j < log_grid.size(); ++j) {
            double v = 0.0, h = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                v = std::max(v, lv[i][j] - lv[m][j]);
                h = std::max(h, lvh[m][j] - lvh[i][j]);
            }
            if ((v > log_k || h > log_k) && std::isnan(r.violating_log_r)) r.violating_log_r = log_grid[j];
            wv = std::max(wv, v);
            wh = std::max(wh, h);
        }
        r.volume_constant = std::exp(wv);
        r.vh2_constant = std::exp(wh);
        r.holds = std::isnan(r.violating_log_r);
        const double score = std::max(wv, wh);
        if (r.holds) return r;
        if (score < best_score) {
            best_score = score;
            best = r;
        }
    }
    return best;
}

/// Default dominance grid: u in [0, log_r_max] of the manifold.
inline DominanceReport check_dominating(const ManifoldSpec& s) {
    const auto grid = classification_grid(0.0, s.log_r_max());
    return check_dominating(s, grid);
}

/// p(t,o,o) ~ 1 / V_m(sqrt t) with m = argmax_i V_i(sqrt t).
inline double largest_end_envelope(const ManifoldSpec& s, double t, const DominanceReport& dom) {
    require(s.all_parabolic(), Errc::not_applicable, "largest-end envelope needs all ends parabolic");
    if (!dom.holds) throw Error(Errc::no_dominating_end, "no dominating end on the grid");
    const double u = detail::half_log_t(t);
    double hi = -INFINITY;
    for (const auto& e : s.ends()) hi = std::max(hi, e.profile.log_volume(u));
    return std::exp(-hi);
}

inline double largest_end_envelope(const ManifoldSpec& s, double t) {
    return largest_end_envelope(s, t, check_dominating(s));
}

/// min_i h_i^2(sqrt t) / min_i V_i(sqrt t) h_i^2(sqrt t).
inline double min_min_upper(const ManifoldSpec& s, double t) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& c = s.classification(i);
        if (c.regular != Verdict::yes && c.subcritical != Verdict::yes)
            throw Error(Errc::not_applicable, "end " + s.end(i).label + " is neither regular nor subcritical");
    }
    const double u = detail::half_log_t(t);
    double min_h = INFINITY, min_vh = INFINITY;
    for (const auto& e : detail::end_logs(s, u)) {
        min_h = std::min(min_h, 2.0 * e.log_h);
        min_vh = std::min(min_vh, e.log_v + 2.0 * e.log_h);
    }
    return std::exp(min_h - min_vh);
}

inline double offdiag_assemble(double pD, double p_oo, double int_p_oo, double Px, double Py, double dPx,
                               double dPy) {
    for (double v : {pD, p_oo, int_p_oo, Px, Py, dPx, dPy}) {
        require(v >= 0.0, Errc::invalid_argument, "offdiag_assemble inputs must be nonnegative");
    }
    return pD + p_oo * Px * Py + int_p_oo * (dPx * Py + Px * dPy);
}

struct RegimeValue {
    double value;
    std::string label;
};

/// Three-regime value for x on the (2,0)-end and y on the (1,0)-end.
inline RegimeValue offdiag_regimes_2_1(double x_abs, double y_abs, double t, double b) {
    require(t > 1.0 && b > 0.0 && x_abs > 0.0 && y_abs >= 0.0, Errc::invalid_argument, "bad regime arguments");
    const double st = std::sqrt(t);
    const double d = x_abs + y_abs;
    if (x_abs > st) return {detail::gaussian(d, t, b) / t, "x_far"};
    const double lg = std::log(std::numbers::e * st / x_abs);
    if (y_abs <= st) return {(1.0 + y_abs / st * lg) / t, "both_near"};
    return {lg * detail::gaussian(d, t, b) / t, "x_near_y_far"};
}

/// (1 / V_m(sqrt t)) exp(-b d^2 / t) for x, y on different ends, all ends subcritical.
inline double subcritical_all_envelope(const ManifoldSpec& s, double t, double x_abs, double y_abs, double b) {
    if (s.size() < 2 || !s.all_subcritical())
        throw Error(Errc::not_applicable, "needs at least two ends, all subcritical");
    const double u = detail::half_log_t(t);
    double hi = -INFINITY;
    for (const auto& e : s.ends()) hi = std::max(hi, e.profile.log_volume(u));
    return std::exp(-hi) * detail::gaussian(x_abs + y_abs, t, b);
}

/// Li-Yau envelope on a single end, d = |x - y| along the ray.
inline double ly_envelope(const EndSpec& end, double t, double x_abs, double y_abs, double b) {
    const double u = detail::half_log_t(t);
    return std::exp(-end.profile.log_volume(u)) * detail::gaussian(x_abs - y_abs, t, b);
}

/// Permutation sorting (alpha, beta) pairs in descending lexicographic order; stable.
inline std::vector<std::size_t> lex_order(std::span<const std::pair<double, double>> pairs) {
    std::vector<std::size_t> idx(pairs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pairs[a] > pairs[b]; });
    return idx;
}

namespace detail {

// Largest lattice exponent e with log V(u) >= -log K + (2 + e) u on the grid.
inline double fit_super_exponent(const VolumeProfile& p, std::span<const double> grid, double log_k) {
    double best = std::numeric_limits<double>::quiet_NaN();
    for (double e : exponent_lattice()) {
        bool ok = true;
        for (double u : grid) ok = ok && p.log_volume(u) >= -log_k + (2.0 + e) * u;
        if (ok) best = e;
    }
    return best;
}

// Largest lattice exponent d with log V(u) <= log K + (2 - d) u on the grid.
inline double fit_sub_exponent(const VolumeProfile& p, std::span<const double> grid, double log_k) {
    double best = std::numeric_limits<double>::quiet_NaN();
    for (double d : exponent_lattice()) {
        bool ok = true;
        for (double u : grid) ok = ok && p.log_volume(u) <= log_k + (2.0 - d) * u;
        if (ok) best = d;
    }
    return best;
}

}  // namespace detail

/// Critically ordered ends: splits the ends into super / middle / sub, fits
/// (epsilon, delta, gamma1, gamma2) on the exponent lattice and verifies
/// clause (c) on the grid. Throws COE_FAIL naming the violated clause.
inline COEDecomposition check_coe(const ManifoldSpec& s) {
    const auto grid = classification_grid(0.0, s.log_r_max());
    const double log_k = std::log(comparison_constant);
    COEDecomposition d;
    d.epsilon = 1.9;
    d.delta = 1.9;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& p = s.end(i).profile;
        const auto& c = s.classification(i);
        const double eps = c.parabolic == Verdict::no ? detail::fit_super_exponent(p, grid, log_k) : NAN;
        const double del = c.subcritical == Verdict::yes ? detail::fit_sub_exponent(p, grid, log_k) : NAN;
        if (!std::isnan(eps)) {
            d.I_super.push_back(i);
            d.epsilon = std::min(d.epsilon, eps);
        } else if (!std::isnan(del)) {
            d.I_sub.push_back(i);
            d.delta = std::min(d.delta, del);
        } else if (c.regular == Verdict::yes) {
            d.I_middle.push_back(i);
            d.gamma1 = std::max(d.gamma1, c.gamma1);
            d.gamma2 = std::max(d.gamma2, c.gamma2);
        } else {
            throw Error(Errc::coe_fail, "clause (a)/(b): end " + s.end(i).label +
                                            " is neither super, subcritical nor regular");
        }
    }
    if (d.I_middle.empty()) d.gamma1 = d.gamma2 = 0.1;
    const bool chain = d.gamma1 < d.epsilon && d.gamma1 + d.gamma2 < d.delta && d.delta < 2.0 &&
                       2.0 * d.gamma1 + d.gamma2 < 2.0;
    if (!chain) throw Error(Errc::coe_fail, "parameter chain gamma1 < eps, gamma1 + gamma2 < delta < 2 fails");

    // Clause (c): uniform ordering of middle ends and the h implications.
    std::vector<std::vector<double>> lv(s.size()), lh(s.size());
    for (std::size_t i : d.I_middle) {
        const auto& p = s.end(i).profile;
        const auto h = h_on_log_grid(p, grid);
        for (std::size_t j = 0; j < grid.size(); ++j) {
            lv[i].push_back(p.log_volume(grid[j]));
            lh[i].push_back(std::log(h[j]));
        }
    }
    auto sup_diff = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double w = -INFINITY;
        for (std::size_t j = 0; j < a.size(); ++j) w = std::max(w, a[j] - b[j]);
        return w;
    };
    const bool parabolic = s.all_parabolic();
    for (std::size_t x = 0; x < d.I_middle.size(); ++x) {
        for (std::size_t y = x + 1; y < d.I_middle.size(); ++y) {
            std::size_t i = d.I_middle[x], j = d.I_middle[y];
            // Orient so that V_i >= c V_j holds if either direction does.
            if (sup_diff(lv[j], lv[i]) > sup_diff(lv[i], lv[j])) std::swap(i, j);
            if (sup_diff(lv[j], lv[i]) > log_k)
                throw Error(Errc::coe_fail, "clause (c): volumes of " + s.end(i).label + " and " + s.end(j).label +
                                                " are not uniformly ordered");
            std::vector<double> vh_i(grid.size()), vh_j(grid.size());
            for (std::size_t g = 0; g < grid.size(); ++g) {
                vh_i[g] = lv[i][g] + lh[i][g];
                vh_j[g] = lv[j][g] + lh[j][g];
            }
            if (sup_diff(vh_j, vh_i) > log_k)
                throw Error(Errc::coe_fail, "clause (c): V h ordering fails between " + s.end(i).label + " and " +
                                                s.end(j).label);
            if (parabolic) {
                for (std::size_t g = 0; g < grid.size(); ++g) {
                    vh_i[g] += lh[i][g];
                    vh_j[g] += lh[j][g];
                }
                if (sup_diff(vh_i, vh_j) > log_k)
                    throw Error(Errc::coe_fail, "clause (c): V h^2 implication fails between " + s.end(i).label +
                                                    " and " + s.end(j).label);
            }
        }
    }
    return d;
}

/// Lambda(B(o,r)) envelope: V_n(r) when every end is non-parabolic, otherwise
/// V_n(r) h_n(r) when the ends are critically ordered; n is the largest end other than m(r).
inline double poincare_envelope(const ManifoldSpec& s, double r) {
    require(s.size() >= 2, Errc::not_applicable, "the Poincare envelope needs at least two ends");
    require(r > 1.0, Errc::invalid_argument, "r must exceed 1");
    const double u = std::log(r);
    bool all_np = true;
    for (std::size_t i = 0; i < s.size(); ++i) all_np = all_np && s.classification(i).parabolic == Verdict::no;
    if (!all_np) check_coe(s);
    auto lv = [&](std::size_t i) { return s.end(i).profile.log_volume(u); };
    const std::size_t m = detail::argmax_index(s.size(), lv);
    const std::size_t n = detail::argmax_index(s.size(), lv, m);
    double log_val = lv(n);
    if (!all_np) log_val += std::log(compute_h_log(s.end(n).profile, u));
    return std::exp(log_val);
}

struct Regime {
    double lo, hi;
    std::string label;
};

/// A named envelope, evaluable on t (heat quantities) or r (Poincare).
struct EnvelopeCurve {
    std::string quantity;  // P_OO, P_XY or POINCARE
    std::string formula;
    std::function<double(double)> eval;
    std::vector<Regime> regimes;
};

/// The on-diagonal envelope that applies to `s`: smallest end when some end
/// is non-parabolic, largest end when one end dominates, the min-min bound otherwise.
inline EnvelopeCurve on_diagonal_curve(const ManifoldSpec& s, double t_lo, double t_hi) {
    EnvelopeCurve c;
    c.quantity = "P_OO";
    if (s.any_nonparabolic()) {
        c.formula = "smallest_end";
        c.eval = [s](double t) { return smallest_end_envelope(s, t); };
    } else if (auto dom = check_dominating(s); dom.holds && s.all_parabolic()) {
        c.formula = "largest_end";
        c.eval = [s, dom](double t) { return largest_end_envelope(s, t, dom); };
    } else {
        c.formula = "min_min";
        c.eval = [s](double t) { return min_min_upper(s, t); };
    }
    c.regimes.push_back({t_lo, t_hi, c.formula});
    return c;
}

inline EnvelopeCurve poincare_curve(const ManifoldSpec& s, double r_lo, double r_hi) {
    EnvelopeCurve c;
    c.quantity = "POINCARE";
    bool all_np = true;
    for (std::size_t i = 0; i < s.size(); ++i) all_np = all_np && s.classification(i).parabolic == Verdict::no;
    c.formula = all_np ? "V_n" : "V_n*h_n";
    c.eval = [s](double r) { return poincare_envelope(s, r); };
    c.regimes.push_back({r_lo, r_hi, c.formula});
    return c;
}

}  // namespace endlab
