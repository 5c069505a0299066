#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "endlab/mesh.hpp"

namespace endlab {

struct HeatField {
    double time = 0.0;
    std::vector<double> values;
    BoundaryCondition bc = BoundaryCondition::neumann;
};

/// Extrapolated backward Euler. Each macro step H is covered with
/// n = 1, 2, ..., order substeps and the results are combined by
/// Aitken-Neville extrapolation in the step size.
struct TimeOptions {
    double ratio = 1.08;        // macro step H = max(h0, (ratio - 1) t)
    int order = 5;
    double initial_step = 0.0;  // 0: (min edge length)^2 / 4
};

namespace detail {

inline std::vector<double> backward_euler(const StarMesh& m, std::span<const double> mass, std::vector<double> u,
                                          double h, int steps, BoundaryCondition bc) {
    std::vector<double> rhs(u.size());
    for (int s = 0; s < steps; ++s) {
        for (std::size_t v = 0; v < u.size(); ++v) rhs[v] = mass[v] * u[v];
        u = solve_shifted(m, 1.0, h, rhs, bc);
    }
    return u;
}

inline std::vector<double> extrapolated_step(const StarMesh& m, std::span<const double> mass,
                                             const std::vector<double>& u, double H, int order,
                                             BoundaryCondition bc) {
    // prev[k] = T_{j-1, k+1}; the error expansion is in powers of H / n.
    std::vector<std::vector<double>> prev, cur;
    for (int j = 1; j <= order; ++j) {
        cur.assign(1, backward_euler(m, mass, u, H / j, j, bc));
        for (int k = 1; k < j; ++k) {
            const double f = static_cast<double>(j) / (j - k) - 1.0;
            std::vector<double> t(u.size());
            for (std::size_t v = 0; v < u.size(); ++v)
                t[v] = cur[k - 1][v] + (cur[k - 1][v] - prev[k - 1][v]) / f;
            cur.push_back(std::move(t));
        }
        prev.swap(cur);
    }
    return prev.back();
}

}  // namespace detail

inline void apply_boundary(const StarMesh& m, std::vector<double>& u, BoundaryCondition bc) {
    if (bc == BoundaryCondition::dirichlet_at_center) u[0] = 0.0;
    if (bc == BoundaryCondition::dirichlet_at_rim) {
        for (std::size_t i = 0; i < m.ends.size(); ++i) u[m.index(i, m.ends[i].radius.size() - 1)] = 0.0;
    }
}

/// Evolves du/dt = L u from u0 and returns the field at each requested time.
inline std::vector<HeatField> heat_solve(const StarMesh& m, std::vector<double> u0, std::span<const double> t_list,
                                         BoundaryCondition bc, const TimeOptions& o = {}) {
    require(u0.size() == m.size(), Errc::length_mismatch, "initial data size does not match the mesh");
    require(o.order >= 1 && o.ratio > 1.0, Errc::invalid_argument, "bad time options");
    for (std::size_t i = 0; i < t_list.size(); ++i) {
        require(t_list[i] >= 0.0 && (i == 0 || t_list[i] > t_list[i - 1]), Errc::invalid_argument,
                "t_list must be increasing and nonnegative");
    }
    const auto mass = m.masses();
    const double h0 = o.initial_step > 0.0 ? o.initial_step : 0.25 * std::pow(m.min_edge_length(), 2);
    apply_boundary(m, u0, bc);
    std::vector<HeatField> out;
    double t = 0.0;
    auto u = std::move(u0);
    for (double target : t_list) {
        while (t < target) {
            double H = std::max(h0, (o.ratio - 1.0) * t);
            if (t + H > target || target - (t + H) < 1e-3 * H) H = target - t;
            u = detail::extrapolated_step(m, mass, u, H, o.order, bc);
            t = t + H == t ? target : t + H;
        }
        t = target;
        out.push_back({target, u, bc});
    }
    return out;
}

/// u0 = delta_x / m_x.
inline std::vector<double> delta_at(const StarMesh& m, std::size_t node) {
    std::vector<double> u(m.size(), 0.0);
    u.at(node) = 1.0 / m.masses()[node];
    return u;
}

/// p(t, x, y) for flat node indices x, y (Neumann everywhere).
inline std::vector<double> heat_kernel(const StarMesh& m, std::size_t x, std::size_t y, std::span<const double> t_list,
                                       const TimeOptions& o = {}) {
    std::vector<double> out;
    for (const auto& f : heat_solve(m, delta_at(m, x), t_list, BoundaryCondition::neumann, o))
        out.push_back(f.values.at(y));
    return out;
}

/// Evolution from delta_x with the center absorbing; x is node j on `end`.
inline std::vector<HeatField> dirichlet_solve(const StarMesh& m, std::size_t end, std::size_t j,
                                              std::span<const double> t_list, const TimeOptions& o = {}) {
    return heat_solve(m, delta_at(m, m.index(end, j)), t_list, BoundaryCondition::dirichlet_at_center, o);
}

/// Extended Dirichlet kernel p^D(t, x, y) on `end`, zero off that end.
inline std::vector<double> dirichlet_kernel(const StarMesh& m, std::size_t end, std::size_t x, std::size_t y_end,
                                            std::size_t y, std::span<const double> t_list,
                                            const TimeOptions& o = {}) {
    std::vector<double> out;
    for (const auto& f : dirichlet_solve(m, end, x, t_list, o))
        out.push_back(y_end == end ? f.values[m.index(end, y)] : 0.0);
    return out;
}

/// Mass left on `end` by a Dirichlet field.
inline double end_mass(const StarMesh& m, std::size_t end, std::span<const double> u) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.ends[end].radius.size(); ++j) s += m.ends[end].mass[j] * u[m.index(end, j)];
    return s;
}

/// P_x(tau < t) = 1 - sum_v m_v u^D_v(t).
inline std::vector<double> exit_probability(const StarMesh& m, std::size_t end, std::size_t x,
                                            std::span<const double> t_list, const TimeOptions& o = {}) {
    std::vector<double> out;
    for (const auto& f : dirichlet_solve(m, end, x, t_list, o))
        out.push_back(std::clamp(1.0 - end_mass(m, end, f.values), 0.0, 1.0));
    return out;
}

/// d/dt P_x(tau < t) as the flux kappa_{i,0} u^D_{i,1}(t) into the center.
inline std::vector<double> exit_rate(const StarMesh& m, std::size_t end, std::size_t x, std::span<const double> t_list,
                                     const TimeOptions& o = {}) {
    std::vector<double> out;
    const double k = m.ends[end].center_conductance;
    for (const auto& f : dirichlet_solve(m, end, x, t_list, o))
        out.push_back(std::max(0.0, k * f.values[m.index(end, 0)]));
    return out;
}

/// Harmonic function with prescribed values at the rim of each end. On a star
/// the rays are series resistors, so the solution follows from the cumulative
/// resistance along each ray.
inline std::vector<double> solve_harmonic(const StarMesh& m, std::span<const double> rim_values) {
    require(rim_values.size() == m.ends.size(), Errc::invalid_argument, "one rim value per end");
    std::vector<std::vector<double>> cum(m.ends.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m.ends.size(); ++i) {
        const auto& e = m.ends[i];
        double R = 1.0 / e.center_conductance;
        cum[i].push_back(R);
        for (double k : e.conductance) cum[i].push_back(R += 1.0 / k);
        if (!(R > 0.0 && std::isfinite(R))) throw Error(Errc::solve_fail, "ray resistance not finite");
        num += rim_values[i] / R;
        den += 1.0 / R;
    }
    std::vector<double> h(m.size());
    h[0] = num / den;
    for (std::size_t i = 0; i < m.ends.size(); ++i) {
        const double total = cum[i].back();
        for (std::size_t j = 0; j < cum[i].size(); ++j)
            h[m.index(i, j)] = h[0] + (rim_values[i] - h[0]) * cum[i][j] / total;
    }
    return h;
}

}  // namespace endlab
