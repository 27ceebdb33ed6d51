#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjpdhg/grid.hpp"
#include "hjpdhg/pdhg.hpp"
#include "hjpdhg/trajectory.hpp"

namespace hjpdhg {

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

// 17 significant digits: doubles survive the round trip bit-for-bit.
inline std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline void write_field_csv(const std::filesystem::path& path, const Field& f) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    const Grid& g = f.grid;
    out << (g.dims == 2 ? "k,i,j,value\n" : "k,i,value\n");
    for (int k = 0; k < g.n_t; ++k)
        for (int i = 0; i < g.n_space[0]; ++i)
            for (int j = 0; j < g.ny(); ++j) {
                out << k << ',' << i;
                if (g.dims == 2) out << ',' << j;
                out << ',' << detail::format_value(f(k, i, j)) << '\n';
            }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline Field read_field_csv(const std::filesystem::path& path, const Grid& grid) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    Field f(grid);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty field file '" + path.string() + "'");
    std::size_t count = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        int k, i, j = 0;
        char sep;
        row >> k >> sep >> i;
        if (grid.dims == 2) row >> sep >> j;
        double v;
        row >> sep >> v;
        if (!row) throw IoError("malformed row in '" + path.string() + "': " + line);
        if (k < 0 || k >= grid.n_t || i < 0 || i >= grid.n_space[0] || j < 0 ||
            j >= grid.ny())
            throw IoError("field file '" + path.string() + "' does not match the grid");
        f(k, i, j) = v;
        ++count;
    }
    if (count != grid.total_points())
        throw IoError("field file '" + path.string() + "' does not match the grid");
    return f;
}

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const TrajectoryResult& tr, int dims) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << (dims == 2 ? "s,gamma_1,gamma_2,alpha_1,alpha_2\n" : "s,gamma_1,alpha_1\n");
    for (std::size_t q = 0; q < tr.times.size(); ++q) {
        out << detail::format_value(tr.times[q]);
        for (int d = 0; d < dims; ++d) out << ',' << detail::format_value(tr.states[q][d]);
        // The control on the final sample repeats the last step's value so
        // every row has the same arity.
        const std::size_t ci = std::min(q, tr.controls.size() - 1);
        for (int d = 0; d < dims; ++d)
            out << ',' << detail::format_value(tr.controls[ci][d]);
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline nlohmann::json grid_to_json(const Grid& g) {
    nlohmann::json j;
    j["dims"] = g.dims;
    j["n_t"] = g.n_t;
    j["T"] = g.T;
    for (int d = 0; d < g.dims; ++d) {
        j["domain"].push_back({g.a[d], g.b[d]});
        j["n_space"].push_back(g.n_space[d]);
        j["bc"].push_back(g.bc[d] == Bc::periodic ? "periodic" : "neumann");
    }
    return j;
}

inline nlohmann::json report_to_json(const SolveReport& rep) {
    nlohmann::json j;
    j["outer_iterations"] = rep.outer_iterations;
    j["converged"] = rep.converged;
    j["wall_time"] = rep.wall_time;
    j["tau_rho"] = rep.tau_rho;
    j["tau_alpha"] = rep.tau_alpha;
    j["tau_phi"] = rep.tau_phi;
    j["derating"] = rep.derating;
    auto& hist = j["residual_history"] = nlohmann::json::array();
    for (const ResidualTriple& r : rep.residual_history)
        hist.push_back({r.hj, r.prox, r.continuity});
    return j;
}

/// Writes the full solution (fields + metadata) into a directory.
inline void write_solution(const std::filesystem::path& dir, const SolverState& st,
                           const SolveReport& rep, const nlohmann::json& config_echo) {
    std::filesystem::create_directories(dir);
    write_field_csv(dir / "phi.csv", st.phi);
    write_field_csv(dir / "rho.csv", st.rho);
    for (const AlphaSlot& s : st.alpha)
        write_field_csv(dir / ("alpha_" + s.name + ".csv"), s.field);

    nlohmann::json meta;
    meta["version"] = "0.1.0";
    meta["config"] = config_echo;
    meta["grid"] = grid_to_json(st.phi.grid);
    meta["report"] = report_to_json(rep);
    std::ofstream out(dir / "metadata.json");
    if (!out) throw IoError("cannot write metadata.json in '" + dir.string() + "'");
    out << meta.dump(2) << '\n';
}

inline nlohmann::json read_metadata(const std::filesystem::path& dir) {
    std::ifstream in(dir / "metadata.json");
    if (!in) throw IoError("solution not found: missing '" + (dir / "metadata.json").string() + "'");
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(std::string("malformed metadata.json: ") + e.what());
    }
    return meta;
}

/// Rebuilds a SolverState from a solution directory written by write_solution.
inline SolverState read_solution(const std::filesystem::path& dir,
                                 const ControlProblem& pb) {
    SolverState st;
    st.phi = read_field_csv(dir / "phi.csv", pb.grid);
    st.phi_tilde = st.phi;
    st.rho = read_field_csv(dir / "rho.csv", pb.grid);
    static const char* names[2][2] = {{"x_up", "x_down"}, {"y_up", "y_down"}};
    for (int d = 0; d < pb.grid.dims; ++d) {
        if (!pb.dynamics.control_dependent[d]) continue;
        for (int b = 0; b < 2; ++b)
            st.alpha.push_back({d, b == 0 ? Branch::up : Branch::down, names[d][b],
                                read_field_csv(dir / (std::string("alpha_") + names[d][b] +
                                                      ".csv"),
                                               pb.grid)});
    }
    return st;
}

}  // namespace hjpdhg
