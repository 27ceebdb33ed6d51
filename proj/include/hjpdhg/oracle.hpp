#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hjpdhg/grid.hpp"
#include "hjpdhg/problem.hpp"

namespace hjpdhg {

struct ComparisonReport {
    double l_inf = 0.0;
    double l2 = 0.0;  // grid-weighted (cell-volume) L2 norm
    int worst_time_index = 0;
};

namespace detail {

// One-sided difference of a single spatial slice, same ghost rules as
// diff_space.
inline void slice_diffs(const std::vector<double>& s, const Grid& g, int axis,
                        std::vector<double>& dp, std::vector<double>& dm) {
    const int nx = g.n_space[0], ny = g.ny();
    const int n = g.n_space[axis];
    const double h = g.dx(axis);
    const Bc bc = g.bc[axis];
    auto at = [&](int i, int j) { return s[static_cast<std::size_t>(i) * ny + j]; };
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * ny + j;
            const int c = axis == 0 ? i : j;
            const int p = shift_first(c, +1, n, bc);
            const int m = shift_first(c, -1, n, bc);
            const double fp = p < 0 ? at(i, j) : (axis == 0 ? at(p, j) : at(i, p));
            const double fm = m < 0 ? at(i, j) : (axis == 0 ? at(m, j) : at(i, m));
            dp[idx] = (fp - at(i, j)) / h;
            dm[idx] = (at(i, j) - fm) / h;
        }
}

// Largest sum over axes of |dH/dp| across the slice's own gradient values,
// probed by central finite differences; the CFL speed estimate.
inline double slice_speed(const ControlProblem& pb, const std::vector<double>& s,
                          double t) {
    const Grid& g = pb.grid;
    const int nx = g.n_space[0], ny = g.ny();
    std::array<std::vector<double>, 2> dp, dm;
    for (int d = 0; d < g.dims; ++d) {
        dp[d].resize(s.size());
        dm[d].resize(s.size());
        slice_diffs(s, g, d, dp[d], dm[d]);
    }
    const double h = 1e-4;
    double speed = 0.0;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * ny + j;
            const std::array<double, 2> x{g.x(0, i), g.x(1, j)};
            const std::span<const double> xs(x.data(), g.dims);
            std::array<double, 2> pu{}, pd{};
            for (int d = 0; d < g.dims; ++d) {
                pu[d] = dp[d][idx];
                pd[d] = dm[d][idx];
            }
            const std::span<const double> pus(pu.data(), g.dims),
                pds(pd.data(), g.dims);
            double v = 0.0;
            for (int d = 0; d < g.dims; ++d) {
                auto bump = [&](std::array<double, 2> q, int a, double e) {
                    q[a] += e;
                    return q;
                };
                const auto pup = bump(pu, d, h), pum = bump(pu, d, -h);
                const auto pdp = bump(pd, d, h), pdm = bump(pd, d, -h);
                v += std::abs(numerical_hamiltonian(
                         pb, xs, t, {pup.data(), static_cast<std::size_t>(g.dims)}, pds) -
                     numerical_hamiltonian(
                         pb, xs, t, {pum.data(), static_cast<std::size_t>(g.dims)}, pds)) /
                     (2 * h);
                v += std::abs(numerical_hamiltonian(
                         pb, xs, t, pus, {pdp.data(), static_cast<std::size_t>(g.dims)}) -
                     numerical_hamiltonian(
                         pb, xs, t, pus, {pdm.data(), static_cast<std::size_t>(g.dims)})) /
                     (2 * h);
            }
            speed = std::max(speed, v);
        }
    return 1.2 * speed;  // safety factor
}

}  // namespace detail

/// Explicit monotone scheme sharing the numerical Hamiltonian, stepped with
/// CFL-limited sub-steps and sampled on the problem's time slices. Passing
/// max_substeps = 1 disables sub-stepping (used to demonstrate CFL blow-up).
inline Field explicit_solve(const ControlProblem& pb, double cfl_factor,
                            int max_substeps = 0) {
    if (pb.epsilon > 0.0)
        throw std::invalid_argument("explicit_solve: first-order problems only");
    if (!(cfl_factor > 0.0) || cfl_factor > 1.0)
        throw std::invalid_argument("explicit_solve: cfl_factor must be in (0, 1]");
    const Grid& g = pb.grid;
    const int nx = g.n_space[0], ny = g.ny();
    const std::size_t sp = g.space_points();
    double dx_min = g.dx(0);
    if (g.dims == 2) dx_min = std::min(dx_min, g.dx(1));

    Field out(g);
    std::vector<double> slice(sp), next(sp);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const std::array<double, 2> x{g.x(0, i), g.x(1, j)};
            slice[static_cast<std::size_t>(i) * ny + j] =
                pb.terminal_cost(std::span<const double>(x.data(), g.dims));
        }
    std::copy(slice.begin(), slice.end(), out.values.begin());

    std::array<std::vector<double>, 2> dp, dm;
    for (int d = 0; d < g.dims; ++d) {
        dp[d].resize(sp);
        dm[d].resize(sp);
    }

    for (int k = 0; k + 1 < g.n_t; ++k) {
        const double speed = detail::slice_speed(pb, slice, g.t(k));
        int n_sub = 1;
        if (speed > 0.0 && std::isfinite(speed))
            n_sub = std::max(1, static_cast<int>(
                                    std::ceil(g.dt() * speed / (cfl_factor * dx_min))));
        if (max_substeps > 0) n_sub = std::min(n_sub, max_substeps);
        const double dt_sub = g.dt() / n_sub;
        for (int m = 0; m < n_sub; ++m) {
            const double t = g.t(k) + m * dt_sub;
            for (int d = 0; d < g.dims; ++d) detail::slice_diffs(slice, g, d, dp[d], dm[d]);
            for (int i = 0; i < nx; ++i)
                for (int j = 0; j < ny; ++j) {
                    const std::size_t idx = static_cast<std::size_t>(i) * ny + j;
                    const std::array<double, 2> x{g.x(0, i), g.x(1, j)};
                    std::array<double, 2> pu{}, pd{};
                    for (int d = 0; d < g.dims; ++d) {
                        pu[d] = dp[d][idx];
                        pd[d] = dm[d][idx];
                    }
                    next[idx] =
                        slice[idx] -
                        dt_sub * numerical_hamiltonian(
                                     pb, std::span<const double>(x.data(), g.dims), t,
                                     {pu.data(), static_cast<std::size_t>(g.dims)},
                                     {pd.data(), static_cast<std::size_t>(g.dims)});
                }
            slice.swap(next);
        }
        std::copy(slice.begin(), slice.end(),
                  out.values.begin() + static_cast<std::size_t>(k + 1) * sp);
    }
    return out;
}

/// Dense-grid reference minimizer of the branch prox objective; the oracle
/// prox_alpha is validated against.
inline double prox_bruteforce(const ControlProblem& pb, std::span<const double> x,
                              double t, int axis, double grad_sample, double rho,
                              double alpha_prev, double tau_alpha, Branch branch,
                              double rho_floor = 1e-6) {
    if (!(tau_alpha > 0))
        throw std::invalid_argument("prox_bruteforce: tau_alpha must be positive");
    const double A = pb.coef_A(axis, x, t);
    if (A == 0.0) return 0.0;
    const double b = pb.coef_b(axis, x, t);
    const double r = std::max(rho, rho_floor);
    detail::Interval iv = detail::branch_interval(A, b, branch);
    if (pb.lagrangian.kind == LagrangianKind::box_indicator)
        iv = iv.intersect({-pb.lagrangian.radius, pb.lagrangian.radius});
    const double lo = std::max(iv.lo, -10.0), hi = std::min(iv.hi, 10.0);
    if (lo > hi) return iv.clamp(0.0);
    const double step = 1e-4;
    auto obj = [&](double a) {
        return (A * a + b) * grad_sample + pb.lagrangian.value(a) +
               (r / (2.0 * tau_alpha)) * (a - alpha_prev) * (a - alpha_prev);
    };
    double best = lo, best_val = obj(lo);
    const long n = static_cast<long>(std::floor((hi - lo) / step));
    for (long q = 1; q <= n; ++q) {
        const double a = lo + q * step;
        const double v = obj(a);
        if (v < best_val) {
            best_val = v;
            best = a;
        }
    }
    if (obj(hi) < best_val) best = hi;
    return best;
}

/// L_inf and cell-volume-weighted L2 distance between two same-grid fields.
inline ComparisonReport compare(const Field& a, const Field& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("compare: shape mismatch");
    const Grid& g = a.grid;
    double vol = g.dt();
    for (int d = 0; d < g.dims; ++d) vol *= g.dx(d);
    ComparisonReport rep;
    double sq = 0.0;
    const std::size_t sp = g.space_points();
    for (int k = 0; k < g.n_t; ++k) {
        double slice_max = 0.0;
        for (std::size_t idx = k * sp; idx < (k + 1) * sp; ++idx) {
            const double d = std::abs(a.values[idx] - b.values[idx]);
            slice_max = std::max(slice_max, d);
            sq += d * d * vol;
        }
        if (slice_max > rep.l_inf) {
            rep.l_inf = slice_max;
            rep.worst_time_index = k;
        }
    }
    rep.l2 = std::sqrt(sq);
    return rep;
}

}  // namespace hjpdhg
