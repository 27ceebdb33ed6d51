#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hjpdhg/grid.hpp"
#include "hjpdhg/precond.hpp"
#include "hjpdhg/problem.hpp"

namespace hjpdhg {

/// One upwind control field: the `branch` slot of spatial axis `axis`.
struct AlphaSlot {
    int axis = 0;
    Branch branch = Branch::up;
    std::string name;  // "x_up", "x_down", "y_up", "y_down"
    Field field;
};

struct SolverState {
    Field phi;
    Field phi_tilde;
    Field rho;  // rows k >= 1 are iterates; row 0 holds the constant c
    std::vector<AlphaSlot> alpha;
};

struct PdhgConfig {
    double tau_rho = 0.0;    // <= 0 selects 0.9 / estimate_stepsize_bound
    double tau_alpha = 0.0;  // idem
    double tau_phi = 0.0;    // idem
    double c = 1.0;          // terminal multiplier constant
    int n_inner = 10;        // staggered rho/alpha updates per phi update
    long max_outer = 50000;
    double tol = 1e-6;
    int windows = 1;
    double rho_floor = 1e-6;
    int check_every = 1;  // residual evaluation cadence (outer iterations)
};

struct ResidualTriple {
    double hj = 0.0;
    double prox = 0.0;
    double continuity = 0.0;
    double max() const { return std::max(hj, std::max(prox, continuity)); }
};

struct SolveReport {
    long outer_iterations = 0;
    std::vector<ResidualTriple> residual_history;
    bool converged = false;
    double wall_time = 0.0;
    double tau_rho = 0.0, tau_alpha = 0.0, tau_phi = 0.0;  // steps actually used
    double derating = 1.0;  // viscous step derating factor applied
};

/// Operator-norm bound B = max{1, sup|b|}^2 + sup|A|^2, sampled over the
/// grid lattice; default steps are 0.9 / B.
inline double estimate_stepsize_bound(const ControlProblem& pb) {
    const Grid& g = pb.grid;
    double sup_A = 0.0, sup_b = 0.0;
    for (int k = 0; k < g.n_t; ++k)
        for (int i = 0; i < g.n_space[0]; ++i)
            for (int j = 0; j < g.ny(); ++j) {
                const std::array<double, 2> x{g.x(0, i), g.x(1, j)};
                const std::span<const double> xs(x.data(), g.dims);
                for (int d = 0; d < g.dims; ++d) {
                    sup_A = std::max(sup_A, std::abs(pb.coef_A(d, xs, g.t(k))));
                    sup_b = std::max(sup_b, std::abs(pb.coef_b(d, xs, g.t(k))));
                }
            }
    const double m = std::max(1.0, sup_b);
    return m * m + sup_A * sup_A;
}

struct StepChoice {
    double tau_rho, tau_alpha, tau_phi;
    double bound;
    double derating;
};

/// Resolves the step sizes: explicit positive values are kept, non-positive
/// ones default to 0.9/B. Viscous problems derate the defaults by
/// min{1, dx^2/(4 eps dt dims)}.
inline StepChoice choose_steps(const ControlProblem& pb, const PdhgConfig& cfg) {
    StepChoice s{};
    s.bound = estimate_stepsize_bound(pb);
    s.derating = 1.0;
    if (pb.epsilon > 0.0) {
        double dx2 = pb.grid.dx(0) * pb.grid.dx(0);
        if (pb.grid.dims == 2) dx2 = std::min(dx2, pb.grid.dx(1) * pb.grid.dx(1));
        s.derating = std::min(1.0, dx2 / (4.0 * pb.epsilon * pb.grid.dt() * pb.grid.dims));
    }
    const double def = 0.9 / s.bound * s.derating;
    s.tau_rho = cfg.tau_rho > 0 ? cfg.tau_rho : def;
    s.tau_alpha = cfg.tau_alpha > 0 ? cfg.tau_alpha : def;
    s.tau_phi = cfg.tau_phi > 0 ? cfg.tau_phi : def;
    return s;
}

namespace detail {

// Dynamics coefficients tabulated on the lattice (already time-reversed).
struct CoeffTables {
    std::array<Field, 2> A{};
    std::array<Field, 2> b{};
};

inline CoeffTables build_coeff_tables(const ControlProblem& pb) {
    const Grid& g = pb.grid;
    CoeffTables t;
    for (int d = 0; d < g.dims; ++d) {
        t.A[d] = Field(g);
        t.b[d] = Field(g);
    }
    for (int k = 0; k < g.n_t; ++k)
        for (int i = 0; i < g.n_space[0]; ++i)
            for (int j = 0; j < g.ny(); ++j) {
                const std::array<double, 2> x{g.x(0, i), g.x(1, j)};
                const std::span<const double> xs(x.data(), g.dims);
                for (int d = 0; d < g.dims; ++d) {
                    t.A[d](k, i, j) = pb.coef_A(d, xs, g.t(k));
                    t.b[d](k, i, j) = pb.coef_b(d, xs, g.t(k));
                }
            }
    return t;
}

// One-sided (and optionally second) differences of one field, reused across
// the staggered inner loop where phi_tilde is fixed.
struct UpwindDerivs {
    Field dt_back;
    std::array<Field, 2> dp{}, dm{}, dxx{};
    bool has_second = false;
};

inline UpwindDerivs upwind_derivs(const Field& f, int dims, bool second) {
    UpwindDerivs d;
    d.dt_back = diff_time(f, TimeScheme::backward);
    d.has_second = second;
    for (int a = 0; a < dims; ++a) {
        d.dp[a] = diff_space(f, a, SpaceScheme::forward);
        d.dm[a] = diff_space(f, a, SpaceScheme::backward);
        if (second) d.dxx[a] = diff_space(f, a, SpaceScheme::second);
    }
    return d;
}

inline void slot_pointers(const SolverState& st, const Field* (&up)[2],
                          const Field* (&down)[2]) {
    up[0] = up[1] = down[0] = down[1] = nullptr;
    for (const AlphaSlot& s : st.alpha)
        (s.branch == Branch::up ? up : down)[s.axis] = &s.field;
}

// rho <- (anchor + tau_rho * bracket)_+ on rows k >= 1, with the bracket of
// the fully discrete update (phi_tilde derivatives precomputed in dv). The
// anchor is the previous outer iterate; it stays fixed across the staggered
// inner loop so the inner iterations solve one proximal subproblem instead
// of compounding the step.
inline void rho_update_kernel(SolverState& st, const ControlProblem& pb,
                              const CoeffTables& ct, const UpwindDerivs& dv,
                              double tau_rho, const Field& rho_anchor) {
    const Grid& g = st.rho.grid;
    const int dims = g.dims;
    const bool quad = pb.lagrangian.kind == LagrangianKind::quadratic;
    const double w = pb.lagrangian.weight;
    const Field* up[2];
    const Field* down[2];
    slot_pointers(st, up, down);
    const std::size_t begin = g.space_points(), end = g.total_points();
    for (std::size_t idx = begin; idx < end; ++idx) {
        double br = dv.dt_back.values[idx];
        for (int d = 0; d < dims; ++d) {
            const double A = ct.A[d].values[idx];
            const double b = ct.b[d].values[idx];
            if (up[d]) {
                const double au = up[d]->values[idx];
                const double ad = down[d]->values[idx];
                br -= std::max(A * au + b, 0.0) * dv.dp[d].values[idx] +
                      std::min(A * ad + b, 0.0) * dv.dm[d].values[idx];
                if (quad) br -= 0.5 * w * (au * au + ad * ad);
            } else {
                br -= std::max(b, 0.0) * dv.dp[d].values[idx] +
                      std::min(b, 0.0) * dv.dm[d].values[idx];
            }
            if (dv.has_second) br -= pb.epsilon * dv.dxx[d].values[idx];
        }
        st.rho.values[idx] = std::max(0.0, rho_anchor.values[idx] + tau_rho * br);
    }
}

// Per-branch proximal alpha update on all rows (row 0 uses the stored rho
// row, which init_state keeps at c, so the t=0 feedback field settles too).
// Anchored like the rho update; anchors[q] pairs with st.alpha[q].
inline void alpha_update_kernel(SolverState& st, const ControlProblem& pb,
                                const CoeffTables& ct, const UpwindDerivs& dv,
                                double tau_alpha, double rho_floor,
                                const std::vector<const Field*>& anchors) {
    for (std::size_t q = 0; q < st.alpha.size(); ++q) {
        AlphaSlot& s = st.alpha[q];
        const Field& p = s.branch == Branch::up ? dv.dp[s.axis] : dv.dm[s.axis];
        const Field& A = ct.A[s.axis];
        const Field& b = ct.b[s.axis];
        const Field& prev = *anchors[q];
        for (std::size_t idx = 0; idx < s.field.values.size(); ++idx)
            s.field.values[idx] = prox_closed_form(
                pb.lagrangian, A.values[idx], b.values[idx], p.values[idx],
                st.rho.values[idx], prev.values[idx], tau_alpha, s.branch, rho_floor);
    }
}

// Preconditioner input for the phi update: the objective gradient w.r.t. the
// free rows k >= 1 (row 0 is pinned to g and carries no gradient), with the
// terminal multiplier entering as the ghost rho_{., n_t} = c.
inline Field ascent_direction(const SolverState& st, const ControlProblem& pb,
                              const CoeffTables& ct, double c) {
    const Grid& g = st.rho.grid;
    const double dt = g.dt();
    const Field* up[2];
    const Field* down[2];
    slot_pointers(st, up, down);
    Field r(g);
    const int nx = g.n_space[0], ny = g.ny(), nt = g.n_t;
    for (int k = 1; k < nt; ++k)
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j)
                r(k, i, j) = ((k + 1 < nt ? st.rho(k + 1, i, j) : c) - st.rho(k, i, j)) / dt;
    for (int d = 0; d < g.dims; ++d) {
        Field fup(g), fdn(g);
        for (std::size_t idx = 0; idx < fup.values.size(); ++idx) {
            const double A = ct.A[d].values[idx];
            const double b = ct.b[d].values[idx];
            const double fu = up[d] ? A * up[d]->values[idx] + b : b;
            const double fd = down[d] ? A * down[d]->values[idx] + b : b;
            fup.values[idx] = std::max(fu, 0.0) * st.rho.values[idx];
            fdn.values[idx] = std::min(fd, 0.0) * st.rho.values[idx];
        }
        const Field divu = diff_space(fup, d, SpaceScheme::backward);
        const Field divd = diff_space(fdn, d, SpaceScheme::forward);
        for (std::size_t idx = 0; idx < r.values.size(); ++idx)
            r.values[idx] -= divu.values[idx] + divd.values[idx];
        if (pb.epsilon > 0.0) {
            const Field dxx = diff_space(st.rho, d, SpaceScheme::second);
            for (std::size_t idx = 0; idx < r.values.size(); ++idx)
                r.values[idx] += pb.epsilon * dxx.values[idx];
        }
    }
    std::fill(r.values.begin(), r.values.begin() + g.space_points(), 0.0);
    return r;
}

// phi += tau_phi * precond(direction); row 0 re-pinned; extrapolation.
inline void apply_phi_step(SolverState& st, const Field& direction, double tau_phi,
                           const HelmholtzSolver& hs) {
    const Field incr = hs.apply(direction);
    const std::size_t row = st.phi.grid.space_points();
    for (std::size_t idx = 0; idx < st.phi.values.size(); ++idx) {
        const double old = st.phi.values[idx];
        double next = old + tau_phi * incr.values[idx];
        if (idx < row) next = old;  // pinned initial row
        st.phi.values[idx] = next;
        st.phi_tilde.values[idx] = 2.0 * next - old;
    }
}

inline ResidualTriple residuals(const SolverState& st, const ControlProblem& pb,
                                const CoeffTables& ct, const HelmholtzSolver& hs,
                                double c) {
    const Grid& g = st.phi.grid;
    const bool viscous = pb.epsilon > 0.0;
    UpwindDerivs dv = upwind_derivs(st.phi, g.dims, viscous);
    const Field* up[2];
    const Field* down[2];
    slot_pointers(st, up, down);
    ResidualTriple out;

    // A diverged iterate must not masquerade as converged: NaN would be
    // silently dropped by the max-accumulations below.
    for (double v : st.phi.values)
        if (!std::isfinite(v)) {
            out.hj = out.prox = out.continuity = std::numeric_limits<double>::infinity();
            return out;
        }
    for (double v : st.rho.values)
        if (!std::isfinite(v)) {
            out.hj = out.prox = out.continuity = std::numeric_limits<double>::infinity();
            return out;
        }

    const std::size_t begin = g.space_points(), end = g.total_points();
    for (std::size_t idx = begin; idx < end; ++idx) {
        double hh = 0.0;
        for (int d = 0; d < g.dims; ++d) {
            const double A = ct.A[d].values[idx];
            const double b = ct.b[d].values[idx];
            const double pu = dv.dp[d].values[idx];
            const double pd = dv.dm[d].values[idx];
            if (!up[d] || A == 0.0) {
                hh += -std::max(b, 0.0) * pu - std::min(b, 0.0) * pd;
            } else {
                hh += upwind_branch_sup(A, b, pb.lagrangian, pu, Branch::up);
                hh += upwind_branch_sup(A, b, pb.lagrangian, pd, Branch::down);
            }
            if (viscous) hh -= pb.epsilon * dv.dxx[d].values[idx];
        }
        const double r = dv.dt_back.values[idx] + hh;
        // KKT form: stationarity where rho > 0, one-sided where the
        // projection is active.
        out.hj = std::max(out.hj, st.rho.values[idx] > 0.0 ? std::abs(r)
                                                           : std::max(r, 0.0));
    }

    for (const AlphaSlot& s : st.alpha) {
        const Field& p = s.branch == Branch::up ? dv.dp[s.axis] : dv.dm[s.axis];
        for (std::size_t idx = begin; idx < end; ++idx) {
            const double best = branch_argmin(pb.lagrangian, ct.A[s.axis].values[idx],
                                              ct.b[s.axis].values[idx], p.values[idx],
                                              s.field.values[idx], s.branch);
            out.prox = std::max(out.prox, std::abs(s.field.values[idx] - best));
        }
    }

    // Continuity residual in the smoothed metric the phi update operates in:
    // the raw gradient's sup norm carries a grid-dependent 1/(dt dx) scale,
    // while the preconditioned gradient is the actual phi stationarity gap.
    const Field cont = hs.apply(ascent_direction(st, pb, ct, c));
    for (std::size_t idx = begin; idx < end; ++idx)
        out.continuity = std::max(out.continuity, std::abs(cont.values[idx]));
    return out;
}

}  // namespace detail

inline std::vector<double> sample_terminal_cost(const ControlProblem& pb) {
    const Grid& g = pb.grid;
    std::vector<double> out(g.space_points());
    for (int i = 0; i < g.n_space[0]; ++i)
        for (int j = 0; j < g.ny(); ++j) {
            const std::array<double, 2> x{g.x(0, i), g.x(1, j)};
            out[static_cast<std::size_t>(i) * g.ny() + j] =
                pb.terminal_cost(std::span<const double>(x.data(), g.dims));
        }
    return out;
}

inline SolverState init_state(const ControlProblem& pb, const PdhgConfig& cfg,
                              const std::vector<double>& g_values) {
    const Grid& g = pb.grid;
    if (g_values.size() != g.space_points())
        throw std::invalid_argument("init_state: terminal cost slice has wrong size");
    SolverState st;
    st.phi = Field(g);
    for (int k = 0; k < g.n_t; ++k)
        std::copy(g_values.begin(), g_values.end(),
                  st.phi.values.begin() + static_cast<std::size_t>(k) * g.space_points());
    st.phi_tilde = st.phi;
    st.rho = Field(g, cfg.c);
    static const char* names[2][2] = {{"x_up", "x_down"}, {"y_up", "y_down"}};
    for (int d = 0; d < g.dims; ++d) {
        if (!pb.dynamics.control_dependent[d]) continue;
        st.alpha.push_back({d, Branch::up, names[d][0], Field(g)});
        st.alpha.push_back({d, Branch::down, names[d][1], Field(g)});
    }
    return st;
}

inline SolverState init_state(const ControlProblem& pb, const PdhgConfig& cfg) {
    return init_state(pb, cfg, sample_terminal_cost(pb));
}

inline void update_rho(SolverState& st, const ControlProblem& pb, const PdhgConfig& cfg) {
    if (!(cfg.tau_rho > 0)) throw std::invalid_argument("update_rho: tau_rho must be positive");
    const auto ct = detail::build_coeff_tables(pb);
    const auto dv = detail::upwind_derivs(st.phi_tilde, pb.grid.dims, pb.epsilon > 0);
    detail::rho_update_kernel(st, pb, ct, dv, cfg.tau_rho, st.rho);
}

inline void update_alpha(SolverState& st, const ControlProblem& pb, const PdhgConfig& cfg) {
    if (!(cfg.tau_alpha > 0))
        throw std::invalid_argument("update_alpha: tau_alpha must be positive");
    const auto ct = detail::build_coeff_tables(pb);
    const auto dv = detail::upwind_derivs(st.phi_tilde, pb.grid.dims, false);
    std::vector<const Field*> anchors;
    for (const AlphaSlot& s : st.alpha) anchors.push_back(&s.field);
    detail::alpha_update_kernel(st, pb, ct, dv, cfg.tau_alpha, cfg.rho_floor, anchors);
}

inline void update_phi(SolverState& st, const ControlProblem& pb, const PdhgConfig& cfg,
                       const HelmholtzSolver& hs) {
    if (!(cfg.tau_phi > 0)) throw std::invalid_argument("update_phi: tau_phi must be positive");
    const auto ct = detail::build_coeff_tables(pb);
    detail::apply_phi_step(st, detail::ascent_direction(st, pb, ct, cfg.c), cfg.tau_phi, hs);
}

/// The phi-update's preconditioner input (continuity-equation gradient with
/// terminal ghost c, zero on the pinned row). Exposed for diagnostics.
inline Field phi_ascent_direction(const SolverState& st, const ControlProblem& pb,
                                  double c = 1.0) {
    return detail::ascent_direction(st, pb, detail::build_coeff_tables(pb), c);
}

inline ResidualTriple optimality_residuals(const SolverState& st, const ControlProblem& pb,
                                           double c = 1.0) {
    const HelmholtzSolver hs(pb.grid);
    return detail::residuals(st, pb, detail::build_coeff_tables(pb), hs, c);
}

namespace detail {

inline std::pair<SolverState, SolveReport> solve_core(const ControlProblem& pb,
                                                      PdhgConfig cfg,
                                                      const std::vector<double>& g_values) {
    const auto t_start = std::chrono::steady_clock::now();
    const StepChoice steps = choose_steps(pb, cfg);
    cfg.tau_rho = steps.tau_rho;
    cfg.tau_alpha = steps.tau_alpha;
    cfg.tau_phi = steps.tau_phi;

    const CoeffTables ct = build_coeff_tables(pb);
    const HelmholtzSolver hs(pb.grid);
    SolverState st = init_state(pb, cfg, g_values);

    SolveReport rep;
    rep.tau_rho = cfg.tau_rho;
    rep.tau_alpha = cfg.tau_alpha;
    rep.tau_phi = cfg.tau_phi;
    rep.derating = steps.derating;

    const int cadence = std::max(1, cfg.check_every);
    Field rho_anchor;
    std::vector<Field> alpha_anchor(st.alpha.size());
    std::vector<const Field*> anchors(st.alpha.size());
    for (long it = 1; it <= cfg.max_outer; ++it) {
        const UpwindDerivs dv = upwind_derivs(st.phi_tilde, pb.grid.dims, pb.epsilon > 0);
        // The inner iterations solve one anchored proximal subproblem by
        // coordinate ascent, so the anchors are the outer iterates.
        rho_anchor = st.rho;
        for (std::size_t q = 0; q < st.alpha.size(); ++q) {
            alpha_anchor[q] = st.alpha[q].field;
            anchors[q] = &alpha_anchor[q];
        }
        for (int inner = 0; inner < cfg.n_inner; ++inner) {
            rho_update_kernel(st, pb, ct, dv, cfg.tau_rho, rho_anchor);
            alpha_update_kernel(st, pb, ct, dv, cfg.tau_alpha, cfg.rho_floor, anchors);
        }
        apply_phi_step(st, ascent_direction(st, pb, ct, cfg.c), cfg.tau_phi, hs);
        rep.outer_iterations = it;
        if (it % cadence == 0 || it == cfg.max_outer) {
            const ResidualTriple r = residuals(st, pb, ct, hs, cfg.c);
            rep.residual_history.push_back(r);
            if (!std::isfinite(r.max())) break;  // diverged; report converged=false
            if (r.max() <= cfg.tol) {
                rep.converged = true;
                break;
            }
        }
    }
    rep.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(st), std::move(rep)};
}

}  // namespace detail

/// Full PDHG loop: n_inner staggered (rho; alpha) updates, one preconditioned
/// phi update with extrapolation, residual check; stops at tol or max_outer.
inline std::pair<SolverState, SolveReport> solve(const ControlProblem& pb,
                                                 const PdhgConfig& cfg) {
    return detail::solve_core(pb, cfg, sample_terminal_cost(pb));
}

/// Splits [0, T] into cfg.windows equal segments solved sequentially, each
/// seeded with the previous segment's final slice as its initial condition.
inline std::pair<SolverState, SolveReport> solve_windowed(const ControlProblem& pb,
                                                          const PdhgConfig& cfg) {
    const int W = cfg.windows;
    if (W <= 1) return solve(pb, cfg);
    const Grid& g = pb.grid;
    if ((g.n_t - 1) % W != 0)
        throw std::invalid_argument("solve_windowed: windows must divide n_t - 1");
    const int nt_seg = (g.n_t - 1) / W + 1;
    if (nt_seg < 3)
        throw std::invalid_argument("solve_windowed: segments need at least 3 time slices");

    Grid gs = g;
    gs.n_t = nt_seg;
    gs.T = g.T / W;

    SolverState full = init_state(pb, cfg);
    SolveReport rep;
    rep.converged = true;
    const std::size_t sp = g.space_points();
    std::vector<double> seg_g = sample_terminal_cost(pb);

    for (int w = 0; w < W; ++w) {
        ControlProblem seg = pb;
        seg.grid = gs;
        // Segment-local PDE time t maps to physical time T - (w*T/W + t):
        // shift the coefficient clock so the segment problem's own reversal
        // lands on the right physical instant.
        const double shift = g.T - (w + 1) * gs.T;
        for (int d = 0; d < g.dims; ++d) {
            if (auto A = pb.dynamics.A[d])
                seg.dynamics.A[d] = [A, shift](std::span<const double> x, double s) {
                    return A(x, s + shift);
                };
            if (auto b = pb.dynamics.b[d])
                seg.dynamics.b[d] = [b, shift](std::span<const double> x, double s) {
                    return b(x, s + shift);
                };
        }
        PdhgConfig seg_cfg = cfg;
        seg_cfg.windows = 1;
        auto [sst, srep] = detail::solve_core(seg, seg_cfg, seg_g);

        const int row0 = w * (nt_seg - 1);
        for (int k = 0; k < nt_seg; ++k) {
            const std::size_t dst = static_cast<std::size_t>(row0 + k) * sp;
            const std::size_t src = static_cast<std::size_t>(k) * sp;
            std::copy_n(sst.phi.values.begin() + src, sp, full.phi.values.begin() + dst);
            std::copy_n(sst.rho.values.begin() + src, sp, full.rho.values.begin() + dst);
            for (std::size_t a = 0; a < full.alpha.size(); ++a)
                std::copy_n(sst.alpha[a].field.values.begin() + src, sp,
                            full.alpha[a].field.values.begin() + dst);
        }
        seg_g.assign(sst.phi.values.end() - sp, sst.phi.values.end());

        rep.outer_iterations += srep.outer_iterations;
        rep.residual_history.insert(rep.residual_history.end(),
                                    srep.residual_history.begin(),
                                    srep.residual_history.end());
        rep.converged = rep.converged && srep.converged;
        rep.wall_time += srep.wall_time;
        rep.tau_rho = srep.tau_rho;
        rep.tau_alpha = srep.tau_alpha;
        rep.tau_phi = srep.tau_phi;
        rep.derating = srep.derating;
    }
    full.phi_tilde = full.phi;
    return {std::move(full), std::move(rep)};
}

}  // namespace hjpdhg
