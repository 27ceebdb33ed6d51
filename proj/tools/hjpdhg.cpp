/// Command-line driver: solve control problems, extract trajectories, run
/// the consistency/monotonicity checkers, and compare against the explicit
/// reference scheme. Exit codes: 0 success, 2 non-convergence, 1 error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hjpdhg/hjpdhg.hpp"

namespace fs = std::filesystem;

namespace {

int thread_budget() {
    // HJPDHG_THREADS caps worker parallelism; 0 (or unset) means auto.
    // The kernels currently run single-threaded, so any cap is honored.
    const char* env = std::getenv("HJPDHG_THREADS");
    if (!env) return 0;
    return std::atoi(env);
}

void print_summary(const char* cmd, const hjpdhg::SolveReport& rep) {
    const hjpdhg::ResidualTriple last =
        rep.residual_history.empty() ? hjpdhg::ResidualTriple{} : rep.residual_history.back();
    std::printf(
        "%s: iterations=%ld converged=%s residuals(hj=%.3e, prox=%.3e, cont=%.3e) "
        "wall=%.2fs\n",
        cmd, rep.outer_iterations, rep.converged ? "yes" : "no", last.hj, last.prox,
        last.continuity, rep.wall_time);
}

std::vector<double> parse_point(const std::string& text, int dims) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(std::stod(part));
    if (static_cast<int>(out.size()) != dims)
        throw std::invalid_argument("--x0 '" + text + "' does not have " +
                                    std::to_string(dims) + " coordinates");
    return out;
}

int cmd_solve(const std::string& config_path, const std::string& out_dir, int windows) {
    hjpdhg::RunConfig rc = hjpdhg::parse_config(config_path);
    if (windows > 0) rc.pdhg.windows = windows;
    const std::string dir = !out_dir.empty() ? out_dir : rc.output;
    if (dir.empty()) {
        std::fprintf(stderr, "error: no output directory (--out or config \"output\")\n");
        return 1;
    }
    auto [st, rep] = rc.pdhg.windows > 1 ? hjpdhg::solve_windowed(rc.problem, rc.pdhg)
                                         : hjpdhg::solve(rc.problem, rc.pdhg);
    hjpdhg::write_solution(dir, st, rep, rc.echo);
    print_summary("solve", rep);
    return rep.converged ? 0 : 2;
}

int cmd_trajectories(const std::string& solution_dir, const std::vector<std::string>& x0s,
                     int steps, std::uint64_t seed, double t0) {
    if (!fs::exists(fs::path(solution_dir) / "metadata.json")) {
        std::fprintf(stderr, "error: solution not found in '%s'\n", solution_dir.c_str());
        return 1;
    }
    const nlohmann::json meta = hjpdhg::read_metadata(solution_dir);
    hjpdhg::RunConfig rc = hjpdhg::parse_config_json(meta.at("config"));
    const hjpdhg::SolverState st = hjpdhg::read_solution(solution_dir, rc.problem);
    const int dims = rc.problem.grid.dims;
    if (steps <= 0) steps = 10 * (rc.problem.grid.n_t - 1);

    int n = 0;
    for (const std::string& text : x0s) {
        const std::vector<double> x0 = parse_point(text, dims);
        hjpdhg::TrajectoryResult tr =
            rc.problem.epsilon > 0
                ? hjpdhg::integrate_sde(st, rc.problem, x0, t0, steps, seed + n)
                : hjpdhg::integrate_ode(st, rc.problem, x0, t0, steps);
        hjpdhg::write_trajectory_csv(
            fs::path(solution_dir) / ("traj_" + std::to_string(n) + ".csv"), tr, dims);
        std::printf("trajectories: traj_%d.csv from (%s), %d steps, end=(%.6g%s%.6g)\n", n,
                    text.c_str(), steps, tr.states.back()[0], dims == 2 ? ", " : "",
                    dims == 2 ? tr.states.back()[1] : 0.0);
        ++n;
    }
    return 0;
}

int cmd_check(const std::string& config_path, int samples) {
    hjpdhg::RunConfig rc = hjpdhg::parse_config(config_path);
    const auto cons = hjpdhg::check_consistency(rc.problem, samples);
    const auto mono = hjpdhg::check_monotonicity(rc.problem, samples);
    std::printf("check: consistency max_deviation=%.3e monotonicity violations=%ld\n",
                cons.max_deviation, mono.violations);
    return 0;
}

int cmd_compare(const std::string& config_path, double cfl, const std::string& out_dir) {
    hjpdhg::RunConfig rc = hjpdhg::parse_config(config_path);
    auto [st, rep] = hjpdhg::solve(rc.problem, rc.pdhg);
    print_summary("compare(pdhg)", rep);
    const hjpdhg::Field ref = hjpdhg::explicit_solve(rc.problem, cfl);
    const hjpdhg::ComparisonReport cmp = hjpdhg::compare(st.phi, ref);
    std::printf("compare: l_inf=%.6e l2=%.6e worst_k=%d\n", cmp.l_inf, cmp.l2,
                cmp.worst_time_index);
    if (!out_dir.empty()) {
        hjpdhg::write_solution(out_dir, st, rep, rc.echo);
        hjpdhg::write_field_csv(fs::path(out_dir) / "phi_explicit.csv", ref);
    }
    return rep.converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid-based PDHG solver for optimal control and HJ PDEs"};
    app.require_subcommand(1);

    std::string config_path, out_dir, solution_dir;
    std::vector<std::string> x0s;
    int windows = 0, steps = 0, samples = 1000;
    std::uint64_t seed = 12345;
    double t0 = 0.0, cfl = 0.5;

    CLI::App* solve = app.add_subcommand("solve", "run the PDHG solver");
    solve->add_option("--config", config_path, "JSON config path")->required();
    solve->add_option("--out", out_dir, "output directory");
    solve->add_option("--windows", windows, "override the time-window count");

    CLI::App* traj = app.add_subcommand("trajectories", "integrate optimal trajectories");
    traj->add_option("--solution", solution_dir, "prior solve output directory")->required();
    traj->add_option("--x0", x0s, "initial state, comma-separated in 2D (repeatable)")
        ->required();
    traj->add_option("--steps", steps, "Euler steps (default 10*(n_t-1))");
    traj->add_option("--seed", seed, "RNG seed for viscous problems");
    traj->add_option("--t0", t0, "start time in [0, T)");

    CLI::App* check = app.add_subcommand("check", "consistency/monotonicity checkers");
    check->add_option("--config", config_path, "JSON config path")->required();
    check->add_option("--samples", samples, "sample count");

    CLI::App* comp = app.add_subcommand("compare", "PDHG vs explicit reference scheme");
    comp->add_option("--config", config_path, "JSON config path")->required();
    comp->add_option("--cfl", cfl, "CFL factor for the explicit scheme");
    comp->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    const int threads = thread_budget();
    if (threads > 0) std::printf("threads: capped at %d\n", threads);

    try {
        if (solve->parsed()) return cmd_solve(config_path, out_dir, windows);
        if (traj->parsed()) return cmd_trajectories(solution_dir, x0s, steps, seed, t0);
        if (check->parsed()) return cmd_check(config_path, samples);
        if (comp->parsed()) return cmd_compare(config_path, cfl, out_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
