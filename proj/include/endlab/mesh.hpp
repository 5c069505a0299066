#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "endlab/envelopes.hpp"
#include "endlab/quadrature.hpp"
#include "endlab/volume.hpp"

namespace endlab {

enum class BoundaryCondition { neumann, dirichlet_at_center, dirichlet_at_rim };

inline const char* to_string(BoundaryCondition bc) {
    switch (bc) {
        case BoundaryCondition::neumann: return "NEUMANN";
        case BoundaryCondition::dirichlet_at_center: return "DIRICHLET_AT_CENTER";
        case BoundaryCondition::dirichlet_at_rim: return "DIRICHLET_AT_RIM";
    }
    return "?";
}

struct MeshOptions {
    double r_max = 1e3;
    double nodes_per_decade = 32;
    double r_start = 1.0;               // radius of the first ray node
    std::optional<double> center_mass;  // default max_i V_i(r_start)
};

/// One ray of the star: nodes r_0 = r_start < ... < r_{N-1} = r_max.
struct MeshEnd {
    std::vector<double> radius;
    std::vector<double> mass;         // V over the dual cell
    std::vector<double> conductance;  // edge j -> j+1, size N-1
    double center_conductance = 0.0;  // center -> node 0
};

/// Weighted star graph. Flat node index: 0 is the center, then the nodes
/// of end 0, end 1, ... in increasing radius.
class StarMesh {
public:
    std::vector<MeshEnd> ends;
    std::vector<VolumeProfile> profiles;
    double center_mass = 0.0;
    double center_radius = 0.0;  // position of the center vertex on every ray

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto& e : ends) n += e.radius.size();
        return n;
    }
    std::size_t index(std::size_t end, std::size_t j) const {
        std::size_t n = 1;
        for (std::size_t i = 0; i < end; ++i) n += ends[i].radius.size();
        return n + j;
    }
    /// Node on `end` whose radius is closest to r in log scale.
    std::size_t nearest(std::size_t end, double r) const {
        const auto& rad = ends.at(end).radius;
        std::size_t best = 0;
        for (std::size_t j = 1; j < rad.size(); ++j) {
            if (std::abs(std::log(rad[j] / r)) < std::abs(std::log(rad[best] / r))) best = j;
        }
        return best;
    }
    std::vector<double> masses() const {
        std::vector<double> m{center_mass};
        for (const auto& e : ends) m.insert(m.end(), e.mass.begin(), e.mass.end());
        return m;
    }
    double min_edge_length() const {
        double h = INFINITY;
        for (const auto& e : ends) {
            h = std::min(h, e.radius[0] - center_radius);
            for (std::size_t j = 0; j + 1 < e.radius.size(); ++j) h = std::min(h, e.radius[j + 1] - e.radius[j]);
        }
        return h;
    }
};

namespace detail {

/// int_{r0}^{r1} dr / V'(r), integrated in u = log r across breakpoints.
inline double resistance(const VolumeProfile& p, double r0, double r1) {
    const double u0 = std::log(r0), u1 = std::log(r1);
    auto f = [&](double u) { return std::exp(u - p.log_density(u)); };
    const auto& cuts = p.log_breakpoints();
    return integrate_piecewise(f, std::span<const double>(cuts), u0, u1, {1e-12, 0.0, 4000});
}

inline MeshEnd build_ray(const VolumeProfile& p, double r_start, double r_max, double npd, double center_radius) {
    const auto n = static_cast<std::size_t>(std::lround(npd * std::log10(r_max / r_start))) + 1;
    MeshEnd e;
    const double lr0 = std::log(r_start), lr1 = std::log(r_max);
    for (std::size_t j = 0; j < n; ++j) {
        e.radius.push_back(j + 1 == n ? r_max : std::exp(lr0 + (lr1 - lr0) * static_cast<double>(j) / (n - 1.0)));
    }
    // Dual cells bounded by geometric midpoints; V differences taken in log form.
    std::vector<double> edge{r_start};
    for (std::size_t j = 0; j + 1 < n; ++j) edge.push_back(std::sqrt(e.radius[j] * e.radius[j + 1]));
    edge.push_back(r_max);
    for (std::size_t j = 0; j < n; ++j) {
        const double lo = p.log_volume(std::log(edge[j])), hi = p.log_volume(std::log(edge[j + 1]));
        e.mass.push_back(std::exp(hi) * -std::expm1(lo - hi));
    }
    for (std::size_t j = 0; j + 1 < n; ++j) e.conductance.push_back(1.0 / resistance(p, e.radius[j], e.radius[j + 1]));
    e.center_conductance = 1.0 / resistance(p, center_radius, r_start);
    for (double m : e.mass) require(std::isfinite(m) && m > 0.0, Errc::profile_unsupported, "mass not representable");
    for (double k : e.conductance)
        require(std::isfinite(k) && k > 0.0, Errc::profile_unsupported, "conductance not representable");
    return e;
}

}  // namespace detail

/// Discretizes the ends of `s` on geometric grids [r_start, r_max]. The center
/// vertex sits one grid ratio below r_start.
inline StarMesh build_mesh(const std::vector<VolumeProfile>& profiles, const MeshOptions& o) {
    require(!profiles.empty(), Errc::invalid_argument, "mesh needs at least one end");
    require(o.r_max >= 10.0 * o.r_start, Errc::invalid_argument, "r_max must be at least 10 r_start");
    require(o.nodes_per_decade >= 16.0, Errc::invalid_argument, "nodes_per_decade must be >= 16");
    StarMesh m;
    m.profiles = profiles;
    m.center_radius = o.r_start / std::pow(10.0, 1.0 / o.nodes_per_decade);
    double vmax = 0.0;
    for (const auto& p : profiles) {
        m.ends.push_back(detail::build_ray(p, o.r_start, o.r_max, o.nodes_per_decade, m.center_radius));
        vmax = std::max(vmax, eval_volume(p, o.r_start));
    }
    m.center_mass = o.center_mass.value_or(vmax);
    require(m.center_mass > 0.0, Errc::invalid_argument, "center mass must be positive");
    return m;
}

inline StarMesh build_mesh(const ManifoldSpec& s, double r_max, double nodes_per_decade) {
    std::vector<VolumeProfile> p;
    for (const auto& e : s.ends()) p.push_back(e.profile);
    MeshOptions o;
    o.r_max = r_max;
    o.nodes_per_decade = nodes_per_decade;
    return build_mesh(p, o);
}

/// Restriction to the ball {r <= radii[i]} on end i with a reflecting rim.
/// The last kept node absorbs the measure up to radii[i].
inline StarMesh truncate(const StarMesh& m, std::span<const double> radii) {
    require(radii.size() == m.ends.size(), Errc::invalid_argument, "one radius per end");
    StarMesh t;
    t.profiles = m.profiles;
    t.center_mass = m.center_mass;
    t.center_radius = m.center_radius;
    for (std::size_t i = 0; i < m.ends.size(); ++i) {
        const auto& e = m.ends[i];
        const double R = radii[i];
        require(R >= e.radius.front() && R <= e.radius.back() * (1 + 1e-12), Errc::invalid_argument,
                "truncation radius outside the mesh");
        std::size_t J = 0;
        while (J + 1 < e.radius.size() && e.radius[J + 1] <= R * (1 + 1e-12)) ++J;
        MeshEnd c;
        c.radius.assign(e.radius.begin(), e.radius.begin() + J + 1);
        c.mass.assign(e.mass.begin(), e.mass.begin() + J + 1);
        c.conductance.assign(e.conductance.begin(), e.conductance.begin() + J);
        c.center_conductance = e.center_conductance;
        const double lower = J == 0 ? e.radius[0] : std::sqrt(e.radius[J - 1] * e.radius[J]);
        const auto& p = m.profiles[i];
        const double hi = p.log_volume(std::log(std::min(R, e.radius.back())));
        c.mass[J] = std::exp(hi) * -std::expm1(p.log_volume(std::log(lower)) - hi);
        if (!(c.mass[J] > 0.0)) c.mass[J] = e.mass[J];
        t.ends.push_back(std::move(c));
    }
    return t;
}

/// (L u)(v) = (1 / m_v) sum_w kappa_vw (u_w - u_v).
inline std::vector<double> apply_laplacian(const StarMesh& m, std::span<const double> u) {
    std::vector<double> out(u.size(), 0.0);
    std::size_t base = 1;
    for (const auto& e : m.ends) {
        const double fc = e.center_conductance * (u[base] - u[0]);
        out[0] += fc;
        out[base] -= fc;
        for (std::size_t j = 0; j + 1 < e.radius.size(); ++j) {
            const double f = e.conductance[j] * (u[base + j + 1] - u[base + j]);
            out[base + j] += f;
            out[base + j + 1] -= f;
        }
        base += e.radius.size();
    }
    out[0] /= m.center_mass;
    base = 1;
    for (const auto& e : m.ends) {
        for (std::size_t j = 0; j < e.radius.size(); ++j) out[base + j] /= e.mass[j];
        base += e.radius.size();
    }
    return out;
}

/// sum over edges kappa (u_w - u_v)^2.
inline double dirichlet_energy(const StarMesh& m, std::span<const double> u) {
    double en = 0.0;
    std::size_t base = 1;
    for (const auto& e : m.ends) {
        en += e.center_conductance * std::pow(u[base] - u[0], 2);
        for (std::size_t j = 0; j + 1 < e.radius.size(); ++j)
            en += e.conductance[j] * std::pow(u[base + j + 1] - u[base + j], 2);
        base += e.radius.size();
    }
    return en;
}

/// Solves (alpha M + beta K) x = b on the star, where K is the graph Laplacian
/// (stiffness) and nodes fixed by `bc` are held at 0. Elimination runs from
/// each rim toward the center in series-conductance form, which keeps every
/// pivot a sum of positive terms.
inline std::vector<double> solve_shifted(const StarMesh& m, double alpha, double beta, std::span<const double> b,
                                         BoundaryCondition bc) {
    const std::size_t n = m.size();
    require(b.size() == n, Errc::length_mismatch, "rhs size does not match the mesh");
    const bool center_fixed = bc == BoundaryCondition::dirichlet_at_center;
    const bool rim_fixed = bc == BoundaryCondition::dirichlet_at_rim;
    std::vector<double> x(n, 0.0);
    // Per node: s = conductance to ground of the eliminated subtree, e = reduced rhs.
    std::vector<double> s(n), e(n);
    double center_diag = alpha * m.center_mass, center_rhs = b[0];
    std::size_t base = 1;
    for (const auto& end : m.ends) {
        const std::size_t N = end.radius.size();
        const std::size_t L = rim_fixed ? N - 2 : N - 1;
        require(!rim_fixed || N >= 2, Errc::solve_fail, "ray too short for a rim condition");
        for (std::size_t jj = L + 1; jj-- > 0;) {
            const std::size_t v = base + jj;
            double sv = alpha * end.mass[jj];
            double ev = b[v];
            if (jj == L && rim_fixed) sv += beta * end.conductance[jj];
            if (jj < L) {
                const double k = beta * end.conductance[jj];
                const double d = k + s[v + 1];
                sv += k * s[v + 1] / d;
                ev += k * e[v + 1] / d;
            }
            s[v] = sv;
            e[v] = ev;
        }
        const double kc = beta * end.center_conductance;
        const double d0 = kc + s[base];
        center_diag += kc * s[base] / d0;
        center_rhs += kc * e[base] / d0;
        base += N;
    }
    if (!center_fixed) {
        if (!(center_diag > 0.0)) throw Error(Errc::solve_fail, "singular system at the center");
        x[0] = center_rhs / center_diag;
    }
    base = 1;
    for (const auto& end : m.ends) {
        const std::size_t N = end.radius.size();
        const std::size_t L = rim_fixed ? N - 2 : N - 1;
        double prev = x[0];
        double k = beta * end.center_conductance;
        for (std::size_t jj = 0; jj <= L; ++jj) {
            const std::size_t v = base + jj;
            x[v] = (e[v] + k * prev) / (k + s[v]);
            prev = x[v];
            if (jj < L) k = beta * end.conductance[jj];
        }
        base += N;
    }
    for (double v : x) {
        if (!std::isfinite(v)) throw Error(Errc::step_fail, "non-finite value in linear solve");
    }
    return x;
}

/// Solves K x = g for the Neumann Laplacian (sum g = 0 required) by summing
/// flows along each ray; returns the solution with zero mass-weighted mean.
inline std::vector<double> solve_neumann_poisson(const StarMesh& m, std::span<const double> g) {
    const std::size_t n = m.size();
    require(g.size() == n, Errc::length_mismatch, "rhs size does not match the mesh");
    std::vector<double> x(n, 0.0);
    std::size_t base = 1;
    for (const auto& end : m.ends) {
        const std::size_t N = end.radius.size();
        std::vector<double> G(N);
        double acc = 0.0;
        for (std::size_t jj = N; jj-- > 0;) {
            acc += g[base + jj];
            G[jj] = acc;
        }
        double prev = 0.0;
        for (std::size_t jj = 0; jj < N; ++jj) {
            const double k = jj == 0 ? end.center_conductance : end.conductance[jj - 1];
            x[base + jj] = prev + G[jj] / k;
            prev = x[base + jj];
        }
        base += N;
    }
    const auto mass = m.masses();
    double num = 0.0, den = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        num += mass[v] * x[v];
        den += mass[v];
    }
    for (double& v : x) v -= num / den;
    return x;
}

}  // namespace endlab
