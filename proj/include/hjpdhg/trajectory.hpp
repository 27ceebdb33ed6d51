#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "hjpdhg/pdhg.hpp"
#include "hjpdhg/problem.hpp"

namespace hjpdhg {

struct TrajectoryResult {
    std::vector<double> times;                   // n_steps + 1 samples in [t0, T]
    std::vector<std::array<double, 2>> states;   // gamma at each sample
    std::vector<std::array<double, 2>> controls; // control used on each step
    std::optional<std::uint64_t> seed;           // absent for the ODE path
};

namespace detail {

inline double wrap_coordinate(const Grid& g, int axis, double v) {
    const double a = g.a[axis], b = g.b[axis];
    if (g.bc[axis] == Bc::periodic) {
        const double len = b - a;
        double u = std::fmod(v - a, len);
        if (u < 0) u += len;
        return a + u;
    }
    return std::min(b, std::max(a, v));
}

// Multilinear interpolation in space, linear in PDE time.
inline double interpolate_field(const Field& f, std::span<const double> x, double t_pde) {
    const Grid& g = f.grid;
    const double u = t_pde / g.dt();
    int k0 = static_cast<int>(std::floor(u));
    k0 = std::max(0, std::min(g.n_t - 2, k0));
    const double wt = std::min(1.0, std::max(0.0, u - k0));

    int i0[2] = {0, 0}, i1[2] = {0, 0};
    double ws[2] = {0.0, 0.0};
    for (int d = 0; d < g.dims; ++d) {
        const int n = g.n_space[d];
        double s = (wrap_coordinate(g, d, x[d]) - g.a[d]) / g.dx(d);
        if (g.bc[d] == Bc::periodic) {
            i0[d] = static_cast<int>(std::floor(s)) % n;
            i1[d] = (i0[d] + 1) % n;
        } else {
            s = std::min(static_cast<double>(n - 1), std::max(0.0, s));
            i0[d] = std::min(n - 2, static_cast<int>(std::floor(s)));
            i1[d] = i0[d] + 1;
        }
        ws[d] = std::min(1.0, std::max(0.0, s - std::floor(s)));
        if (g.bc[d] != Bc::periodic) ws[d] = std::min(1.0, std::max(0.0, s - i0[d]));
    }

    auto slice = [&](int k) {
        if (g.dims == 1)
            return (1 - ws[0]) * f(k, i0[0]) + ws[0] * f(k, i1[0]);
        return (1 - ws[0]) * ((1 - ws[1]) * f(k, i0[0], i0[1]) + ws[1] * f(k, i0[0], i1[1])) +
               ws[0] * ((1 - ws[1]) * f(k, i1[0], i0[1]) + ws[1] * f(k, i1[0], i1[1]));
    };
    return (1 - wt) * slice(k0) + wt * slice(k0 + 1);
}

}  // namespace detail

/// Feedback control at state x and physical time s, read off the solved
/// upwind control fields at PDE time T - s. At most one branch is nonzero
/// per point for the supported Lagrangians, so the branches are summed.
inline std::array<double, 2> feedback_control(const SolverState& st,
                                              const ControlProblem& pb,
                                              std::span<const double> x, double s) {
    const double T = pb.grid.T;
    if (s < -1e-12 || s > T + 1e-12)
        throw std::out_of_range("feedback_control: time outside [0, T]");
    const double t_pde = std::min(T, std::max(0.0, T - s));
    std::array<double, 2> out{0.0, 0.0};
    for (const AlphaSlot& slot : st.alpha)
        out[slot.axis] += detail::interpolate_field(slot.field, x, t_pde);
    return out;
}

namespace detail {

template <class NoiseFn>
TrajectoryResult integrate_core(const SolverState& st, const ControlProblem& pb,
                                std::span<const double> x0, double t0, int n_steps,
                                NoiseFn* noise) {
    if (n_steps < 1) throw std::invalid_argument("integrate: n_steps must be >= 1");
    const Grid& g = pb.grid;
    const double T = g.T;
    const double h = (T - t0) / n_steps;
    const double diffusion = pb.epsilon > 0 && noise ? std::sqrt(2.0 * pb.epsilon * h) : 0.0;

    TrajectoryResult out;
    out.times.reserve(n_steps + 1);
    out.states.reserve(n_steps + 1);
    out.controls.reserve(n_steps);

    std::array<double, 2> gamma{0.0, 0.0};
    for (int d = 0; d < g.dims; ++d) gamma[d] = wrap_coordinate(g, d, x0[d]);
    out.times.push_back(t0);
    out.states.push_back(gamma);

    for (int step = 0; step < n_steps; ++step) {
        const double s = t0 + step * h;
        const std::span<const double> xs(gamma.data(), g.dims);
        const std::array<double, 2> a = feedback_control(st, pb, xs, s);
        out.controls.push_back(a);
        std::array<double, 2> next = gamma;
        for (int d = 0; d < g.dims; ++d) {
            // Dynamics at physical time s: coef_* reverses, so feed T - s.
            double v = pb.coef_A(d, xs, T - s) * a[d] + pb.coef_b(d, xs, T - s);
            next[d] = gamma[d] + h * v;
            if (diffusion > 0.0) next[d] += diffusion * (*noise)();
            next[d] = wrap_coordinate(g, d, next[d]);
        }
        gamma = next;
        out.times.push_back(t0 + (step + 1) * h);
        out.states.push_back(gamma);
    }
    return out;
}

}  // namespace detail

/// Forward Euler on the open-loop ODE driven by the feedback control.
inline TrajectoryResult integrate_ode(const SolverState& st, const ControlProblem& pb,
                                      std::span<const double> x0, double t0,
                                      int n_steps) {
    std::function<double()>* none = nullptr;
    return detail::integrate_core(st, pb, x0, t0, n_steps, none);
}

/// Euler-Maruyama with injectable noise; used by tests to pin increments.
template <class NoiseFn>
TrajectoryResult integrate_sde_with_noise(const SolverState& st, const ControlProblem& pb,
                                          std::span<const double> x0, double t0,
                                          int n_steps, NoiseFn&& noise) {
    auto fn = std::forward<NoiseFn>(noise);
    return detail::integrate_core(st, pb, x0, t0, n_steps, &fn);
}

/// Euler-Maruyama on the open-loop SDE; reproducible for a fixed seed, and
/// bitwise identical to integrate_ode when epsilon = 0 (no draws happen).
inline TrajectoryResult integrate_sde(const SolverState& st, const ControlProblem& pb,
                                      std::span<const double> x0, double t0, int n_steps,
                                      std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    TrajectoryResult out = integrate_sde_with_noise(st, pb, x0, t0, n_steps,
                                                    [&] { return normal(gen); });
    out.seed = seed;
    return out;
}

}  // namespace hjpdhg
