#pragma once

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "hjpdhg/grid.hpp"

namespace hjpdhg {

/// Spectral solver for (I - D_tt - D_xx [- D_yy]) u = r on the space-time
/// lattice. The time axis and Neumann spatial axes are diagonalized by a
/// DCT-I (mirror-reflected ghosts); periodic spatial axes by a real DFT.
class HelmholtzSolver {
public:
    explicit HelmholtzSolver(const Grid& grid) : grid_(grid) {
        validate_grid(grid);
        const int nt = grid.n_t, nx = grid.n_space[0], ny = grid.ny();
        const std::size_t total = grid.total_points();
        buf_.resize(total);

        // Per-axis second-difference eigenvalues at storage index.
        auto cosine_eigs = [](int n, double h) {
            std::vector<double> lam(n);
            for (int k = 0; k < n; ++k)
                lam[k] = (2.0 - 2.0 * std::cos(std::numbers::pi * k / (n - 1))) / (h * h);
            return lam;
        };
        auto periodic_eigs = [](int n, double h) {
            std::vector<double> lam(n);
            for (int k = 0; k < n; ++k)
                lam[k] = (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * k / n)) / (h * h);
            return lam;
        };
        lam_t_ = cosine_eigs(nt, grid.dt());
        lam_x_ = grid.bc[0] == Bc::periodic ? periodic_eigs(nx, grid.dx(0))
                                            : cosine_eigs(nx, grid.dx(0));
        if (grid.dims == 2)
            lam_y_ = grid.bc[1] == Bc::periodic ? periodic_eigs(ny, grid.dx(1))
                                                : cosine_eigs(ny, grid.dx(1));

        double scale = 2.0 * (nt - 1);
        scale *= grid.bc[0] == Bc::periodic ? nx : 2.0 * (nx - 1);
        if (grid.dims == 2) scale *= grid.bc[1] == Bc::periodic ? ny : 2.0 * (ny - 1);

        symbol_.resize(total);
        std::size_t idx = 0;
        for (int k = 0; k < nt; ++k)
            for (int i = 0; i < nx; ++i)
                for (int j = 0; j < ny; ++j, ++idx) {
                    double lam = lam_t_[k] + lam_x_[i];
                    if (grid.dims == 2) lam += lam_y_[j];
                    symbol_[idx] = 1.0 / ((1.0 + lam) * scale);
                }

        plan_axis(0, nt, nx * ny, true);                       // time: DCT-I
        plan_axis(1, nx, ny, grid.bc[0] != Bc::periodic, nt);  // x
        if (grid.dims == 2) plan_axis(2, ny, 1, grid.bc[1] != Bc::periodic, nt * nx);
    }

    ~HelmholtzSolver() {
        for (auto p : plans_)
            if (p) fftw_destroy_plan(p);
        for (auto p : inverse_plans_)
            if (p) fftw_destroy_plan(p);
    }
    HelmholtzSolver(const HelmholtzSolver&) = delete;
    HelmholtzSolver& operator=(const HelmholtzSolver&) = delete;

    const Grid& grid() const { return grid_; }
    const std::vector<double>& time_eigenvalues() const { return lam_t_; }
    const std::vector<double>& space_eigenvalues(int axis) const {
        return axis == 0 ? lam_x_ : lam_y_;
    }

    /// u = (I - D_tt - sum_d D_dd)^{-1} r. Linear, self-adjoint, SPD.
    Field apply(const Field& residual) const {
        if (!residual.same_shape(Field(grid_)))
            throw std::invalid_argument("HelmholtzSolver: shape mismatch");
        Field out = residual;
        double* d = out.values.data();
        for (auto p : plans_) fftw_execute_r2r(p, d, d);
        for (std::size_t i = 0; i < symbol_.size(); ++i) d[i] *= symbol_[i];
        // Unscaled DCT-I is its own inverse; periodic axes need HC2R. The
        // per-axis transforms commute, so the order is irrelevant.
        for (std::size_t a = 0; a < plans_.size(); ++a)
            fftw_execute_r2r(inverse_plans_[a] ? inverse_plans_[a] : plans_[a], d, d);
        return out;
    }

private:
    // The symbol is even in the halfcomplex frequency index, so it can be
    // applied directly in R2HC storage order.
    void plan_axis(int slot, int n, int inner_stride, bool cosine, int outer_count = 1) {
        fftw_iodim dim{n, inner_stride, inner_stride};
        fftw_iodim hm[2];
        int hrank = 0;
        const int total_inner = inner_stride;
        if (outer_count > 1) hm[hrank++] = {outer_count, n * inner_stride, n * inner_stride};
        if (total_inner > 1) hm[hrank++] = {total_inner, 1, 1};
        double* d = buf_.data();
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        if (cosine) {
            fftw_r2r_kind kind = FFTW_REDFT00;
            fftw_plan p = fftw_plan_guru_r2r(1, &dim, hrank, hm, d, d, &kind, flags);
            if (!p) throw std::runtime_error("HelmholtzSolver: plan failure");
            plans_.push_back(p);
            inverse_plans_.push_back(nullptr);  // self-inverse
        } else {
            fftw_r2r_kind fwd = FFTW_R2HC, bwd = FFTW_HC2R;
            fftw_plan pf = fftw_plan_guru_r2r(1, &dim, hrank, hm, d, d, &fwd, flags);
            fftw_plan pb = fftw_plan_guru_r2r(1, &dim, hrank, hm, d, d, &bwd, flags);
            if (!pf || !pb) throw std::runtime_error("HelmholtzSolver: plan failure");
            plans_.push_back(pf);
            inverse_plans_.push_back(pb);
        }
    }

    Grid grid_;
    std::vector<double> symbol_;
    std::vector<double> lam_t_, lam_x_, lam_y_;
    std::vector<double> buf_;
    std::vector<fftw_plan> plans_;
    std::vector<fftw_plan> inverse_plans_;
};

inline HelmholtzSolver build_helmholtz(const Grid& grid) { return HelmholtzSolver(grid); }

}  // namespace hjpdhg
