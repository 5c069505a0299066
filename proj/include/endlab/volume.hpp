#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "endlab/error.hpp"
#include "endlab/quadrature.hpp"
#include "endlab/schedule.hpp"

namespace endlab {

/// V(r) = scale * r^alpha * (log r)^beta for r >= e. With beta = 0 the pure
/// power is used on all of (0, inf); otherwise V is continued below e by the
/// quadratic stub V(e) (r/e)^2.
struct PowerLogProfile {
    double alpha = 2.0;
    double beta = 0.0;
    double scale = 1.0;
};

/// Euclidean plane: V(r) = pi r^2.
struct BuiltinM1 {};

/// Plane with density Z^2, Z(r) = sqrt(1 + 2 log r) for r >= 1 and
/// Z^2(r) = 1 - 2r + 2r^2 on [0, 1] (C^1 match at r = 1). Then
/// V(r) = 2 pi / 3 + 2 pi r^2 log r for r >= 1.
struct BuiltinM3 {};

namespace detail {
inline double m3_z_squared(double r) {
    return r >= 1.0 ? 1.0 + 2.0 * std::log(r) : 1.0 - 2.0 * r + 2.0 * r * r;
}
}  // namespace detail

class VolumeProfile {
public:
    using Variant = std::variant<PowerLogProfile, OscillationSchedule, BuiltinM1, BuiltinM3>;

    /// Global normalization of the oscillating profile: V = 2 pi * (printed piecewise value).
    static constexpr double oscillating_normalization = 2.0 * std::numbers::pi;

    static VolumeProfile power_log(double alpha, double beta, double scale = 1.0) {
        require(alpha >= 0.0 && scale > 0.0, Errc::invalid_argument, "power-log needs alpha >= 0, scale > 0");
        if (beta == 0.0) {
            require(alpha > 0.0, Errc::invalid_argument, "constant volume is not a profile");
        } else {
            require(alpha + beta > 0.0, Errc::invalid_argument, "power-log must increase on r >= e");
        }
        return VolumeProfile(PowerLogProfile{alpha, beta, scale});
    }
    static VolumeProfile oscillating(OscillationSchedule s) { return VolumeProfile(std::move(s)); }
    static VolumeProfile m1() { return VolumeProfile(BuiltinM1{}); }
    static VolumeProfile m3() { return VolumeProfile(BuiltinM3{}); }

    const Variant& variant() const { return v_; }

    const OscillationSchedule* schedule() const { return std::get_if<OscillationSchedule>(&v_); }

    std::string describe() const {
        std::ostringstream os;
        std::visit(
            [&](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, PowerLogProfile>) {
                    os << "powerlog(alpha=" << p.alpha << ", beta=" << p.beta << ", scale=" << p.scale << ")";
                } else if constexpr (std::is_same_v<T, OscillationSchedule>) {
                    os << "oscillating(alpha=" << p.alpha() << ", beta=" << p.beta() << ", "
                       << to_string(p.mode()) << ", N=" << p.size() << ")";
                } else if constexpr (std::is_same_v<T, BuiltinM1>) {
                    os << "m1";
                } else {
                    os << "m3";
                }
            },
            v_);
        return os.str();
    }

    /// log V(e^u).
    double log_volume(double u) const {
        return std::visit(
            [u](const auto& p) -> double {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, PowerLogProfile>) {
                    const double ls = std::log(p.scale);
                    if (p.beta == 0.0) return ls + p.alpha * u;
                    if (u >= 1.0) return ls + p.alpha * u + p.beta * std::log(u);
                    return ls + p.alpha + 2.0 * (u - 1.0);
                } else if constexpr (std::is_same_v<T, OscillationSchedule>) {
                    return std::log(oscillating_normalization) + p.log_profile(u);
                } else if constexpr (std::is_same_v<T, BuiltinM1>) {
                    return std::log(std::numbers::pi) + 2.0 * u;
                } else {
                    if (u >= 0.0) {
                        // log(2pi/3 + 2pi r^2 u) without overflow.
                        return std::log(2.0 * std::numbers::pi) + 2.0 * u + std::log(u + std::exp(-2.0 * u) / 3.0);
                    }
                    const double r = std::exp(u);
                    return std::log(2.0 * std::numbers::pi) + 2.0 * u +
                           std::log(0.5 - 2.0 * r / 3.0 + 0.5 * r * r);
                }
            },
            v_);
    }

    /// r V'(r) / V(r) at r = e^u, right-sided at breakpoints.
    double local_exponent(double u) const {
        return std::visit(
            [u](const auto& p) -> double {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, PowerLogProfile>) {
                    if (p.beta == 0.0) return p.alpha;
                    return u >= 1.0 ? p.alpha + p.beta / u : 2.0;
                } else if constexpr (std::is_same_v<T, OscillationSchedule>) {
                    return p.local_exponent(u);
                } else if constexpr (std::is_same_v<T, BuiltinM1>) {
                    return 2.0;
                } else {
                    if (u >= 0.0) return (2.0 * u + 1.0) / (u + std::exp(-2.0 * u) / 3.0);
                    const double r = std::exp(u);
                    return detail::m3_z_squared(r) / (0.5 - 2.0 * r / 3.0 + 0.5 * r * r);
                }
            },
            v_);
    }

    /// log V'(e^u).
    double log_density(double u) const { return log_volume(u) - u + std::log(local_exponent(u)); }

    /// u-coordinates where V' jumps.
    const std::vector<double>& log_breakpoints() const { return breakpoints_; }

    bool near_breakpoint(double u, double rel = 1e-9) const {
        for (double b : breakpoints_) {
            if (std::abs(u - b) <= rel * std::max(1.0, std::abs(b))) return true;
        }
        return false;
    }

private:
    explicit VolumeProfile(Variant v) : v_(std::move(v)) {
        if (auto* p = std::get_if<PowerLogProfile>(&v_)) {
            if (p->beta != 0.0) breakpoints_ = {1.0};
        } else if (auto* s = std::get_if<OscillationSchedule>(&v_)) {
            breakpoints_ = s->log_breakpoints();
        }
    }

    Variant v_;
    std::vector<double> breakpoints_;
};

struct EndSpec {
    std::string label;
    VolumeProfile profile;
};

/// V(r); V(0) = 0. May overflow to +inf for radii far beyond the double range of V.
inline double eval_volume(const VolumeProfile& p, double r) {
    require(r >= 0.0, Errc::invalid_argument, "radius must be nonnegative");
    if (r == 0.0) return 0.0;
    return std::exp(p.log_volume(std::log(r)));
}

/// V'(r). Throws BREAKPOINT when r is a kink of V; use eval_density_one_sided there.
inline double eval_density(const VolumeProfile& p, double r) {
    require(r > 0.0, Errc::invalid_argument, "radius must be positive");
    const double u = std::log(r);
    if (p.near_breakpoint(u)) throw Error(Errc::breakpoint, "V' undefined at r = " + std::to_string(r));
    return std::exp(p.log_density(u));
}

/// One-sided V' with a relative offset of 1e-9 in r.
inline double eval_density_one_sided(const VolumeProfile& p, double r, bool from_right) {
    require(r > 0.0, Errc::invalid_argument, "radius must be positive");
    const double u = std::log(r) + (from_right ? 1e-9 : -1e-9);
    return std::exp(p.log_density(u));
}

/// Integrand of h in the variable u = log r: (s ds / V(s)) = exp(2u - log V) du.
inline double h_integrand(const VolumeProfile& p, double u) { return std::exp(2.0 * u - p.log_volume(u)); }

inline QuadratureOptions h_quadrature_options() { return {1e-8, 1e-300, 20000}; }

/// h(r) = 1 + max(0, int_1^r s ds / V(s)) at r = e^u.
inline double compute_h_log(const VolumeProfile& p, double u) {
    if (u <= 0.0) return 1.0;
    const auto& cuts = p.log_breakpoints();
    const double integral = integrate_piecewise([&](double s) { return h_integrand(p, s); },
                                                std::span<const double>(cuts), 0.0, u, h_quadrature_options());
    return 1.0 + std::max(0.0, integral);
}

inline double compute_h(const VolumeProfile& p, double r) {
    require(r >= 1.0, Errc::invalid_argument, "h is defined for r >= 1");
    return compute_h_log(p, std::log(r));
}

/// h on an ascending grid of u-values, accumulated segment by segment.
inline std::vector<double> h_on_log_grid(const VolumeProfile& p, std::span<const double> grid) {
    std::vector<double> out;
    out.reserve(grid.size());
    const auto& cuts = p.log_breakpoints();
    auto f = [&](double s) { return h_integrand(p, s); };
    double acc = 0.0;
    double prev = 0.0;
    for (double u : grid) {
        require(out.empty() || u >= prev, Errc::invalid_argument, "grid must be ascending");
        if (u > 0.0) {
            const double lo = std::max(prev, 0.0);
            if (u > lo) acc += integrate_piecewise(f, std::span<const double>(cuts), lo, u, h_quadrature_options());
        }
        prev = std::max(prev, u);
        out.push_back(1.0 + std::max(0.0, acc));
    }
    return out;
}

}  // namespace endlab
