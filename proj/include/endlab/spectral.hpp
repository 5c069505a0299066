#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "endlab/mesh.hpp"

namespace endlab {

struct SpectralResult {
    double radius = 0.0;
    double lambda1 = 0.0;
    double poincare = 0.0;  // 1 / lambda1
    std::vector<double> eigenvector;  // on the truncated mesh
    int iterations = 0;
    double residual = 0.0;  // ||L f + lambda1 f||_m with ||f||_m = 1
};

namespace detail {

inline double mass_dot(std::span<const double> m, std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t v = 0; v < m.size(); ++v) s += m[v] * a[v] * b[v];
    return s;
}

inline void remove_mean(std::span<const double> m, std::vector<double>& f) {
    double num = 0.0, den = 0.0;
    for (std::size_t v = 0; v < m.size(); ++v) {
        num += m[v] * f[v];
        den += m[v];
    }
    for (double& x : f) x -= num / den;
}

}  // namespace detail

/// Smallest nonzero eigenvalue of -L with reflecting rim on an already
/// truncated mesh, by inverse iteration on the mean-zero subspace.
inline SpectralResult neumann_gap(const StarMesh& t, double radius = 0.0, int max_iter = 500) {
    const auto mass = t.masses();
    const std::size_t n = mass.size();
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> f(n);
    for (double& x : f) x = U(rng);
    detail::remove_mean(mass, f);
    SpectralResult r;
    r.radius = radius;
    double lambda = INFINITY;
    std::vector<double> g(n), prev = f;
    for (int it = 1; it <= max_iter; ++it) {
        for (std::size_t v = 0; v < n; ++v) g[v] = mass[v] * f[v];
        f = solve_neumann_poisson(t, g);
        detail::remove_mean(mass, f);
        const double nrm = std::sqrt(detail::mass_dot(mass, f, f));
        if (!(nrm > 0.0)) throw Error(Errc::eigen_fail, "iterate collapsed to a constant");
        const double sign = detail::mass_dot(mass, f, prev) < 0.0 ? -1.0 : 1.0;
        for (double& x : f) x *= sign / nrm;
        double change = 0.0;
        for (std::size_t v = 0; v < n; ++v) change += mass[v] * std::pow(f[v] - prev[v], 2);
        prev = f;
        const double next = dirichlet_energy(t, f);
        const bool settled = std::abs(next - lambda) <= 1e-10 * next && std::sqrt(change) <= 1e-9;
        lambda = next;
        if (settled) {
            const auto Lf = apply_laplacian(t, f);
            std::vector<double> res(n);
            for (std::size_t v = 0; v < n; ++v) res[v] = Lf[v] + lambda * f[v];
            r.residual = std::sqrt(detail::mass_dot(mass, res, res));
            r.iterations = it;
            r.lambda1 = lambda;
            r.poincare = 1.0 / lambda;
            r.eigenvector = f;
            return r;
        }
    }
    throw Error(Errc::eigen_fail, "inverse iteration did not converge in " + std::to_string(max_iter) + " steps");
}

/// Lambda(B(o, r)) with per-end truncation radii.
inline SpectralResult poincare_constant(const StarMesh& m, std::span<const double> radii) {
    return neumann_gap(truncate(m, radii), *std::max_element(radii.begin(), radii.end()));
}

inline SpectralResult poincare_constant(const StarMesh& m, double r) {
    const std::vector<double> radii(m.ends.size(), r);
    return poincare_constant(m, radii);
}

/// Variance of f over the ball B(o, r) divided by its Dirichlet energy there.
/// f is given on the full mesh.
inline double rayleigh_quotient(const StarMesh& m, std::span<const double> f, double r) {
    require(f.size() == m.size(), Errc::length_mismatch, "f does not match the mesh");
    const std::vector<double> radii(m.ends.size(), r);
    const auto t = truncate(m, radii);
    std::vector<double> g{f[0]};
    for (std::size_t i = 0; i < t.ends.size(); ++i) {
        for (std::size_t j = 0; j < t.ends[i].radius.size(); ++j) g.push_back(f[m.index(i, j)]);
    }
    const auto mass = t.masses();
    detail::remove_mean(mass, g);
    const double energy = dirichlet_energy(t, g);
    if (!(energy > 0.0)) throw Error(Errc::constant_input, "f is constant on the ball");
    return detail::mass_dot(mass, g, g) / energy;
}

/// +1 on end 0, -1 on end 1, 0 at the center and on other ends; linear
/// across the two center edges.
inline std::vector<double> signed_indicator(const StarMesh& m) {
    require(m.ends.size() >= 2, Errc::not_applicable, "needs two ends");
    std::vector<double> f(m.size(), 0.0);
    for (std::size_t j = 0; j < m.ends[0].radius.size(); ++j) f[m.index(0, j)] = 1.0;
    for (std::size_t j = 0; j < m.ends[1].radius.size(); ++j) f[m.index(1, j)] = -1.0;
    return f;
}

/// Lambda(B(x, r)) / Lambda(B(o, r)) for x at radius x_abs on `end`. The ball
/// around x reaches x_abs + r along its own end and r - x_abs on the others.
inline double whitney_shift_check(const StarMesh& m, std::size_t end, double x_abs, double r) {
    require(end < m.ends.size(), Errc::invalid_argument, "end index out of range");
    require(r > 2.0 * x_abs, Errc::invalid_argument, "needs r > 2|x|");
    std::vector<double> radii(m.ends.size(), r - x_abs);
    radii[end] = x_abs + r;
    const double shifted = poincare_constant(m, radii).poincare;
    return shifted / poincare_constant(m, r).poincare;
}

}  // namespace endlab
