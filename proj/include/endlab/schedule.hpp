#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "endlab/error.hpp"

namespace endlab {

enum class ScheduleMode { example1, example2 };

inline const char* to_string(ScheduleMode m) {
    return m == ScheduleMode::example1 ? "example1" : "example2";
}

// One oscillation period a_k <= b_k < c_k <= d_k, stored as natural logs.
// Example-2 terms exceed the double range after a few periods.
struct ScheduleTerm {
    double log_a, log_b, log_c, log_d;
};

/// Piecewise volume built from the sequences a_k <= b_k < c_k <= d_k < a_{k+1}:
///
///   r^2                          on (0, a_1) and [a_k, b_k)
///   (r / b_k)^alpha b_k^2        on [b_k, c_k)
///   r^2 log r                    on [c_k, d_k)
///   (r / d_k)^beta d_k^2 log d_k on [d_k, a_{k+1})
///
/// and r^2 again beyond a_{N+1}. Everything is evaluated in u = log r.
class OscillationSchedule {
public:
    enum class Piece { quadratic, alpha_rise, quadratic_log, beta_fall };

    struct Segment {
        double u_start;
        Piece piece;
        double anchor;  // log b_k for alpha_rise, log d_k for beta_fall
    };

    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    std::optional<double> delta() const { return delta_; }
    ScheduleMode mode() const { return mode_; }
    const std::vector<ScheduleTerm>& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }

    double gamma() const { return 1.0 / (alpha_ - 2.0) + 1.0 / (2.0 - beta_); }
    double theta() const {
        require(delta_.has_value(), Errc::invalid_argument, "theta needs delta");
        return *delta_ / (alpha_ - 2.0) + 1.0 / (2.0 - beta_);
    }

    /// log a_n for 1 <= n <= N+1 (a_{N+1} closes the last period).
    double log_a(std::size_t n) const {
        require(n >= 1 && n <= terms_.size() + 1, Errc::invalid_argument,
                "a_n index out of range: " + std::to_string(n));
        return n <= terms_.size() ? terms_[n - 1].log_a : log_a_next_;
    }

    const std::vector<Segment>& segments() const { return segments_; }

    /// Sorted, deduplicated u-coordinates where the piece changes.
    const std::vector<double>& log_breakpoints() const { return breakpoints_; }

    const Segment& segment_at(double u) const {
        auto it = std::upper_bound(segments_.begin(), segments_.end(), u,
                                   [](double x, const Segment& s) { return x < s.u_start; });
        return *(it - 1);
    }

    /// log of the printed piecewise value of the integral of W^2 s ds.
    double log_profile(double u) const {
        const auto& s = segment_at(u);
        switch (s.piece) {
            case Piece::quadratic: return 2.0 * u;
            case Piece::alpha_rise: return alpha_ * (u - s.anchor) + 2.0 * s.anchor;
            case Piece::quadratic_log: return 2.0 * u + std::log(u);
            case Piece::beta_fall: return beta_ * (u - s.anchor) + 2.0 * s.anchor + std::log(s.anchor);
        }
        return 0.0;
    }

    /// r V'(r) / V(r); right-sided at breakpoints.
    double local_exponent(double u) const {
        switch (segment_at(u).piece) {
            case Piece::quadratic: return 2.0;
            case Piece::alpha_rise: return alpha_;
            case Piece::quadratic_log: return 2.0 + 1.0 / u;
            case Piece::beta_fall: return beta_;
        }
        return 0.0;
    }

    /// Largest relative mismatch of b_k = c_k / (log c_k)^{1/(alpha-2)}.
    double bc_residual() const {
        double worst = 0.0;
        for (const auto& t : terms_) {
            const double lb = t.log_c - std::log(t.log_c) / (alpha_ - 2.0);
            worst = std::max(worst, std::abs(std::expm1(lb - t.log_b)));
        }
        return worst;
    }

    /// Largest relative mismatch of a_{k+1} = d_k (log d_k)^{1/(2-beta)}.
    double ad_residual() const {
        double worst = 0.0;
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            const double la = terms_[k].log_d + std::log(terms_[k].log_d) / (2.0 - beta_);
            worst = std::max(worst, std::abs(std::expm1(la - log_a(k + 2))));
        }
        return worst;
    }

    /// Largest relative jump of the profile across any breakpoint.
    double continuity_residual() const {
        double worst = 0.0;
        for (std::size_t i = 1; i < segments_.size(); ++i) {
            const double u = segments_[i].u_start;
            const double right = log_profile(u);
            const double left = evaluate_piece(segments_[i - 1], u);
            worst = std::max(worst, std::abs(std::expm1(right - left)));
        }
        return worst;
    }

    /// Ordering a_k <= b_k < c_k <= d_k < a_{k+1} plus the mode equalities.
    bool ordering_holds() const {
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            const auto& t = terms_[k];
            if (!(t.log_a <= t.log_b && t.log_b < t.log_c && t.log_c <= t.log_d && t.log_d < log_a(k + 2)))
                return false;
            if (t.log_a != t.log_b) return false;
            if (mode_ == ScheduleMode::example1 && t.log_c != t.log_d) return false;
            if (mode_ == ScheduleMode::example2 && std::abs(t.log_d - *delta_ * t.log_c) > 1e-12 * t.log_d)
                return false;
        }
        return true;
    }

    friend OscillationSchedule build_schedule(double alpha, double beta, double log_a1, std::size_t n_terms,
                                              ScheduleMode mode, std::optional<double> delta);

private:
    double evaluate_piece(const Segment& s, double u) const {
        switch (s.piece) {
            case Piece::quadratic: return 2.0 * u;
            case Piece::alpha_rise: return alpha_ * (u - s.anchor) + 2.0 * s.anchor;
            case Piece::quadratic_log: return 2.0 * u + std::log(u);
            case Piece::beta_fall: return beta_ * (u - s.anchor) + 2.0 * s.anchor + std::log(s.anchor);
        }
        return 0.0;
    }

    void index_segments() {
        segments_.clear();
        segments_.push_back({-INFINITY, Piece::quadratic, 0.0});
        auto push = [&](double u, Piece p, double anchor) {
            if (segments_.back().u_start == u) segments_.pop_back();
            segments_.push_back({u, p, anchor});
        };
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            const auto& t = terms_[k];
            push(t.log_a, Piece::quadratic, 0.0);
            push(t.log_b, Piece::alpha_rise, t.log_b);
            push(t.log_c, Piece::quadratic_log, 0.0);
            push(t.log_d, Piece::beta_fall, t.log_d);
        }
        push(log_a_next_, Piece::quadratic, 0.0);
        // Merge consecutive quadratic pieces (u < a_1 followed by [a_1, b_1)).
        std::vector<Segment> merged;
        for (const auto& s : segments_) {
            if (!merged.empty() && merged.back().piece == Piece::quadratic && s.piece == Piece::quadratic) continue;
            merged.push_back(s);
        }
        segments_ = std::move(merged);
        breakpoints_.clear();
        for (std::size_t i = 1; i < segments_.size(); ++i) breakpoints_.push_back(segments_[i].u_start);
    }

    double alpha_ = 4.0;
    double beta_ = 1.0;
    std::optional<double> delta_;
    ScheduleMode mode_ = ScheduleMode::example1;
    std::vector<ScheduleTerm> terms_;
    double log_a_next_ = 0.0;
    std::vector<Segment> segments_;
    std::vector<double> breakpoints_;
};

/// Builds N periods starting from a_1 = exp(log_a1). Within each period
/// a_k = b_k; c_k solves c / (log c)^{1/(alpha-2)} = b_k; d_k = c_k
/// (example1) or d_k = c_k^delta (example2); a_{k+1} = d_k (log d_k)^{1/(2-beta)}.
inline OscillationSchedule build_schedule(double alpha, double beta, double log_a1, std::size_t n_terms,
                                          ScheduleMode mode, std::optional<double> delta = std::nullopt) {
    require(alpha > 2.0, Errc::invalid_argument, "alpha must exceed 2");
    require(beta > 0.0 && beta < 2.0, Errc::invalid_argument, "beta must lie in (0, 2)");
    require(n_terms >= 1, Errc::invalid_argument, "need at least one period");
    if (mode == ScheduleMode::example2) {
        require(delta.has_value() && *delta > 1.0, Errc::invalid_argument, "example2 needs delta > 1");
    } else {
        require(!delta.has_value(), Errc::invalid_argument, "delta is only meaningful for example2");
    }
    // log log a_1 > 1, i.e. a_1 > e^e.
    if (!(log_a1 > std::numbers::e)) {
        throw Error(Errc::root_fail, "a1 too small: need log log a1 > 1, got log a1 = " + std::to_string(log_a1));
    }

    OscillationSchedule s;
    s.alpha_ = alpha;
    s.beta_ = beta;
    s.delta_ = delta;
    s.mode_ = mode;

    const double p = 1.0 / (alpha - 2.0);
    double la = log_a1;
    for (std::size_t k = 0; k < n_terms; ++k) {
        const double lb = la;
        // In logs: L - p log L = log b_k, increasing for L > p.
        auto f = [&](double L) { return L - p * std::log(L) - lb; };
        double lo = std::max(lb, p * (1.0 + 1e-12));
        double hi = lb + 1.0;
        if (!(f(lo) < 0.0)) throw Error(Errc::root_fail, "no sign change at lower bracket");
        int expand = 0;
        while (f(hi) <= 0.0) {
            hi = lb + 2.0 * (hi - lb);
            if (++expand > 200) throw Error(Errc::root_fail, "bracket expansion failed");
        }
        boost::uintmax_t max_iter = 200;
        auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 3);
        auto [r0, r1] = boost::math::tools::toms748_solve(f, lo, hi, tol, max_iter);
        if (max_iter >= 200) throw Error(Errc::root_fail, "root finder did not converge");
        const double lc = 0.5 * (r0 + r1);
        const double ld = mode == ScheduleMode::example1 ? lc : *delta * lc;
        s.terms_.push_back({la, lb, lc, ld});
        la = ld + std::log(ld) / (2.0 - beta);
    }
    s.log_a_next_ = la;
    s.index_segments();
    return s;
}

/// Exact h(a_n) for the profile V = `normalization` * (piecewise value), from
/// the closed-form integral of s ds / V(s) over each piece. Valid for
/// 1 <= n <= N+1; n = 1 gives 1 + log(a_1) / normalization.
inline double h2_partial_sums(const OscillationSchedule& s, std::size_t n,
                              double normalization = 2.0 * std::numbers::pi) {
    require(n >= 1 && n <= s.size() + 1, Errc::invalid_argument, "n out of range");
    const double am2 = s.alpha() - 2.0;
    const double tb = 2.0 - s.beta();
    double sum = s.log_a(1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const auto& t = s.terms()[k];
        sum += t.log_b - t.log_a;
        sum += -std::expm1(am2 * (t.log_b - t.log_c)) / am2;
        sum += std::log(t.log_d / t.log_c);
        sum += -std::expm1(tb * (t.log_d - s.log_a(k + 2))) / tb;
    }
    return 1.0 + sum / normalization;
}

/// Growth diagnostics for the a_n sequence.
struct ScheduleGrowth {
    // example1: min and max over n >= 2 of log a_n / (n log n); with
    // gamma' = max, c n^{gamma n} <= a_n <= C n^{gamma' n} holds on the terms.
    double example1_log_c = 0.0;       // min_n (log a_n - gamma n log n)
    double example1_gamma_prime = 0.0;  // max_n log a_n / (n log n)
    // example2: min and max of log a_{k+1} / log a_k, i.e. the exponents
    // realized in c a_k^delta <= a_{k+1} <= C a_k^eta with c = C = 1.
    double min_power = 0.0;
    double max_power = 0.0;
};

inline ScheduleGrowth schedule_growth(const OscillationSchedule& s) {
    ScheduleGrowth g;
    g.example1_log_c = INFINITY;
    g.min_power = INFINITY;
    g.max_power = -INFINITY;
    for (std::size_t n = 1; n <= s.size() + 1; ++n) {
        const double la = s.log_a(n);
        const double nn = static_cast<double>(n);
        g.example1_log_c = std::min(g.example1_log_c, la - s.gamma() * nn * std::log(nn));
        if (n >= 2) g.example1_gamma_prime = std::max(g.example1_gamma_prime, la / (nn * std::log(nn)));
        if (n >= 2) {
            const double ratio = la / s.log_a(n - 1);
            g.min_power = std::min(g.min_power, ratio);
            g.max_power = std::max(g.max_power, ratio);
        }
    }
    return g;
}

}  // namespace endlab
