#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjpdhg {

enum class Bc { periodic, neumann };

enum class SpaceScheme { forward, backward, second };
enum class TimeScheme { backward, forward, second };

/// Uniform space-time lattice. Spatial axes carry their own boundary
/// condition; the time axis always includes both endpoints.
///
/// Periodic axes exclude the right endpoint (dx = (b-a)/n, x_i = a + i*dx);
/// Neumann axes include both endpoints (dx = (b-a)/(n-1)).
struct Grid {
    int dims = 1;
    std::array<double, 2> a{0.0, 0.0};
    std::array<double, 2> b{1.0, 1.0};
    std::array<int, 2> n_space{3, 1};
    int n_t = 3;
    double T = 1.0;
    std::array<Bc, 2> bc{Bc::periodic, Bc::periodic};

    double dx(int axis) const {
        return bc[axis] == Bc::periodic
                   ? (b[axis] - a[axis]) / n_space[axis]
                   : (b[axis] - a[axis]) / (n_space[axis] - 1);
    }
    double dt() const { return T / (n_t - 1); }
    double x(int axis, int i) const { return a[axis] + i * dx(axis); }
    double t(int k) const { return k * dt(); }

    std::size_t space_points() const {
        return static_cast<std::size_t>(n_space[0]) * (dims == 2 ? n_space[1] : 1);
    }
    std::size_t total_points() const { return space_points() * n_t; }

    int ny() const { return dims == 2 ? n_space[1] : 1; }
};

inline void validate_grid(const Grid& g) {
    if (g.dims != 1 && g.dims != 2) throw std::invalid_argument("grid: dims must be 1 or 2");
    if (g.n_t < 3) throw std::invalid_argument("grid: n_t must be >= 3");
    if (!(g.T > 0)) throw std::invalid_argument("grid: T must be positive");
    for (int d = 0; d < g.dims; ++d) {
        if (g.n_space[d] < 3) throw std::invalid_argument("grid: point count must be >= 3");
        if (!(g.b[d] > g.a[d])) throw std::invalid_argument("grid: empty domain interval");
    }
}

inline Grid make_grid_1d(double a, double b, int n_x, int n_t, double T,
                         Bc bc = Bc::periodic) {
    Grid g;
    g.dims = 1;
    g.a = {a, 0.0};
    g.b = {b, 1.0};
    g.n_space = {n_x, 1};
    g.n_t = n_t;
    g.T = T;
    g.bc = {bc, Bc::periodic};
    validate_grid(g);
    return g;
}

inline Grid make_grid_2d(std::array<double, 2> a, std::array<double, 2> b,
                         std::array<int, 2> n_space, int n_t, double T,
                         std::array<Bc, 2> bc = {Bc::periodic, Bc::periodic}) {
    Grid g;
    g.dims = 2;
    g.a = a;
    g.b = b;
    g.n_space = n_space;
    g.n_t = n_t;
    g.T = T;
    g.bc = bc;
    validate_grid(g);
    return g;
}

/// Scalar function values on a grid, stored time-major: index (k, i[, j])
/// with j fastest so one time slice is contiguous.
struct Field {
    Grid grid;
    std::vector<double> values;

    Field() = default;
    explicit Field(const Grid& g, double fill = 0.0)
        : grid(g), values(g.total_points(), fill) {}

    std::size_t index(int k, int i, int j = 0) const {
        return (static_cast<std::size_t>(k) * grid.n_space[0] + i) * grid.ny() + j;
    }
    double& operator()(int k, int i, int j = 0) { return values[index(k, i, j)]; }
    double operator()(int k, int i, int j = 0) const { return values[index(k, i, j)]; }

    bool same_shape(const Field& other) const {
        return grid.dims == other.grid.dims && grid.n_t == other.grid.n_t &&
               grid.n_space == other.grid.n_space;
    }
};

namespace detail {

// Neighbor index with the axis boundary rule applied. Returns -1 when the
// first-difference ghost equals the boundary value (difference is zero).
inline int shift_first(int i, int step, int n, Bc bc) {
    int j = i + step;
    if (bc == Bc::periodic) return (j % n + n) % n;
    if (j < 0 || j >= n) return -1;  // ghost == boundary value
    return j;
}

// Mirror reflection about the boundary node, used by second differences
// (matches the cosine-transform spectrum of the preconditioner).
inline int shift_second(int i, int step, int n, Bc bc) {
    int j = i + step;
    if (bc == Bc::periodic) return (j % n + n) % n;
    if (j < 0) return -j;
    if (j >= n) return 2 * (n - 1) - j;
    return j;
}

}  // namespace detail

/// One-sided and central spatial differences D_x^+/D_x^-/D_xx (axis 0) and
/// their y analogues (axis 1). Periodic axes wrap; Neumann axes use ghost
/// values that make one-sided differences vanish across the boundary and
/// mirror-reflected ghosts for the second difference.
inline Field diff_space(const Field& f, int axis, SpaceScheme scheme) {
    const Grid& g = f.grid;
    if (axis < 0 || axis >= g.dims) throw std::invalid_argument("diff_space: invalid axis");
    const int n = g.n_space[axis];
    const double h = g.dx(axis);
    const Bc bc = g.bc[axis];
    Field out(g);
    const int nx = g.n_space[0], ny = g.ny();
    for (int k = 0; k < g.n_t; ++k) {
        for (int i = 0; i < nx; ++i) {
            for (int j = 0; j < ny; ++j) {
                const int c = (axis == 0) ? i : j;
                double v;
                if (scheme == SpaceScheme::second) {
                    const int p = detail::shift_second(c, +1, n, bc);
                    const int m = detail::shift_second(c, -1, n, bc);
                    const double fp = (axis == 0) ? f(k, p, j) : f(k, i, p);
                    const double fm = (axis == 0) ? f(k, m, j) : f(k, i, m);
                    v = (fp + fm - 2.0 * f(k, i, j)) / (h * h);
                } else {
                    const int step = (scheme == SpaceScheme::forward) ? +1 : -1;
                    const int q = detail::shift_first(c, step, n, bc);
                    const double fq =
                        (q < 0) ? f(k, i, j) : ((axis == 0) ? f(k, q, j) : f(k, i, q));
                    v = (scheme == SpaceScheme::forward) ? (fq - f(k, i, j)) / h
                                                         : (f(k, i, j) - fq) / h;
                }
                out(k, i, j) = v;
            }
        }
    }
    return out;
}

/// Temporal differences. Backward is defined for k >= 1 (0-based), forward
/// for k <= n_t-2; out-of-range rows are set to zero (the solver never reads
/// them). The second difference mirrors about the first and last slice.
inline Field diff_time(const Field& f, TimeScheme scheme) {
    const Grid& g = f.grid;
    const double h = g.dt();
    Field out(g);
    const int nx = g.n_space[0], ny = g.ny(), nt = g.n_t;
    for (int k = 0; k < nt; ++k) {
        for (int i = 0; i < nx; ++i) {
            for (int j = 0; j < ny; ++j) {
                double v = 0.0;
                if (scheme == TimeScheme::backward) {
                    if (k >= 1) v = (f(k, i, j) - f(k - 1, i, j)) / h;
                } else if (scheme == TimeScheme::forward) {
                    if (k + 1 < nt) v = (f(k + 1, i, j) - f(k, i, j)) / h;
                } else {
                    const int p = detail::shift_second(k, +1, nt, Bc::neumann);
                    const int m = detail::shift_second(k, -1, nt, Bc::neumann);
                    v = (f(p, i, j) + f(m, i, j) - 2.0 * f(k, i, j)) / (h * h);
                }
                out(k, i, j) = v;
            }
        }
    }
    return out;
}

}  // namespace hjpdhg
