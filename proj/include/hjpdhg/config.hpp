#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjpdhg/grid.hpp"
#include "hjpdhg/pdhg.hpp"
#include "hjpdhg/problem.hpp"

namespace hjpdhg {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RunConfig {
    ControlProblem problem;
    PdhgConfig pdhg;
    std::string output;  // optional default output directory
    nlohmann::json echo; // validated config, re-serialized into metadata
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + ": " + what);
}

inline void reject_unknown(const json& obj, const std::string& path,
                           const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) config_fail(path + "." + it.key(), "unknown key");
}

inline const json& require(const json& obj, const std::string& path,
                           const std::string& key) {
    auto it = obj.find(key);
    if (it == obj.end()) config_fail(path + "." + key, "missing required key");
    return *it;
}

inline double number_at(const json& v, const std::string& path) {
    if (!v.is_number()) config_fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) config_fail(path, "value must be finite");
    return d;
}

inline int int_at(const json& v, const std::string& path) {
    if (!v.is_number_integer()) config_fail(path, "expected an integer");
    return v.get<int>();
}

// Scalar or per-axis array parameter.
inline std::array<double, 2> per_axis(const json& v, const std::string& path, int dims,
                                      double fallback) {
    std::array<double, 2> out{fallback, fallback};
    if (v.is_null()) return out;
    if (v.is_number()) {
        out[0] = out[1] = number_at(v, path);
        return out;
    }
    if (!v.is_array() || static_cast<int>(v.size()) != dims)
        config_fail(path, "expected a number or an array of length " + std::to_string(dims));
    for (int d = 0; d < dims; ++d) out[d] = number_at(v[d], path);
    return out;
}

inline AffineDynamics make_dynamics(const json& spec, const std::string& path, int dims) {
    if (!spec.is_object()) config_fail(path, "expected an object");
    const json& name_v = require(spec, path, "name");
    if (!name_v.is_string()) config_fail(path + ".name", "expected a string");
    const std::string name = name_v.get<std::string>();

    AffineDynamics dyn;
    dyn.dims = dims;
    if (name == "quadratic_xdep") {
        reject_unknown(spec, path, {"name"});
        for (int d = 0; d < dims; ++d) {
            dyn.A[d] = [d](std::span<const double> x, double) {
                const double r = x[d] - 1.0;
                return -(r * r + 0.1);
            };
            dyn.control_dependent[d] = true;
        }
    } else if (name == "newton") {
        reject_unknown(spec, path, {"name"});
        if (dims != 2) config_fail(path, "newton dynamics require dimension 2");
        dyn.A[0] = [](std::span<const double>, double) { return 1.0; };
        dyn.control_dependent[0] = true;
        dyn.control_dependent[1] = false;
        dyn.b[1] = [](std::span<const double> x, double) { return x[0]; };
    } else if (name == "constant") {
        reject_unknown(spec, path, {"name", "a", "b"});
        const auto a = per_axis(spec.value("a", json(1.0)), path + ".a", dims, 1.0);
        const auto b = per_axis(spec.value("b", json(0.0)), path + ".b", dims, 0.0);
        for (int d = 0; d < dims; ++d) {
            const double ad = a[d], bd = b[d];
            dyn.control_dependent[d] = ad != 0.0;
            if (ad != 0.0)
                dyn.A[d] = [ad](std::span<const double>, double) { return ad; };
            if (bd != 0.0)
                dyn.b[d] = [bd](std::span<const double>, double) { return bd; };
        }
    } else {
        config_fail(path + ".name", "unknown dynamics catalog entry '" + name + "'");
    }
    return dyn;
}

inline std::function<double(std::span<const double>)> make_terminal_cost(
    const json& spec, const std::string& path, int dims) {
    if (!spec.is_object()) config_fail(path, "expected an object");
    const json& name_v = require(spec, path, "name");
    if (!name_v.is_string()) config_fail(path + ".name", "expected a string");
    const std::string name = name_v.get<std::string>();

    if (name == "sin_pi") {
        reject_unknown(spec, path, {"name"});
        return [dims](std::span<const double> x) {
            double s = 0.0;
            for (int d = 0; d < dims; ++d) s += std::sin(std::numbers::pi * x[d]);
            return s;
        };
    }
    if (name == "gauss_sin") {
        reject_unknown(spec, path, {"name"});
        if (dims != 2) config_fail(path, "gauss_sin requires dimension 2");
        return [](std::span<const double> x) {
            return std::exp(-0.5 * x[0] * x[0]) * std::sin(std::numbers::pi * x[1]);
        };
    }
    if (name == "constant") {
        reject_unknown(spec, path, {"name", "value"});
        const double v = number_at(spec.value("value", json(0.0)), path + ".value");
        return [v](std::span<const double>) { return v; };
    }
    config_fail(path + ".name", "unknown terminal cost catalog entry '" + name + "'");
}

inline Lagrangian make_lagrangian(const json& spec, const std::string& path) {
    if (!spec.is_object()) config_fail(path, "expected an object");
    const json& kind_v = require(spec, path, "kind");
    if (!kind_v.is_string()) config_fail(path + ".kind", "expected a string");
    const std::string kind = kind_v.get<std::string>();
    Lagrangian L;
    if (kind == "quadratic") {
        reject_unknown(spec, path, {"kind", "weight"});
        L.kind = LagrangianKind::quadratic;
        L.weight = number_at(spec.value("weight", json(1.0)), path + ".weight");
        if (!(L.weight > 0)) config_fail(path + ".weight", "must be positive");
    } else if (kind == "box_indicator") {
        reject_unknown(spec, path, {"kind", "radius"});
        L.kind = LagrangianKind::box_indicator;
        L.radius = number_at(spec.value("radius", json(1.0)), path + ".radius");
        if (!(L.radius > 0)) config_fail(path + ".radius", "must be positive");
    } else {
        config_fail(path + ".kind", "unknown lagrangian kind '" + kind + "'");
    }
    return L;
}

}  // namespace detail

inline RunConfig parse_config_json(const nlohmann::json& root) {
    using detail::config_fail;
    using detail::int_at;
    using detail::number_at;
    using detail::reject_unknown;
    using detail::require;
    using nlohmann::json;

    if (!root.is_object()) config_fail("$", "expected a JSON object");
    reject_unknown(root, "$", {"problem", "grid", "pdhg", "output"});

    const json& jp = require(root, "$", "problem");
    if (!jp.is_object()) config_fail("problem", "expected an object");
    reject_unknown(jp, "problem",
                   {"dimension", "domain", "bc", "dynamics", "terminal_cost", "lagrangian",
                    "epsilon"});
    const int dims = int_at(require(jp, "problem", "dimension"), "problem.dimension");
    if (dims != 1 && dims != 2) config_fail("problem.dimension", "must be 1 or 2");

    const json& jd = require(jp, "problem", "domain");
    if (!jd.is_array() || static_cast<int>(jd.size()) != dims)
        config_fail("problem.domain", "expected an array of " + std::to_string(dims) +
                                          " [a, b] pairs");
    Grid grid;
    grid.dims = dims;
    for (int d = 0; d < dims; ++d) {
        if (!jd[d].is_array() || jd[d].size() != 2)
            config_fail("problem.domain", "each entry must be an [a, b] pair");
        grid.a[d] = number_at(jd[d][0], "problem.domain");
        grid.b[d] = number_at(jd[d][1], "problem.domain");
    }

    const json& jbc = require(jp, "problem", "bc");
    if (!jbc.is_array() || static_cast<int>(jbc.size()) != dims)
        config_fail("problem.bc", "expected an array of " + std::to_string(dims) +
                                      " entries");
    for (int d = 0; d < dims; ++d) {
        if (!jbc[d].is_string()) config_fail("problem.bc", "entries must be strings");
        const std::string bc = jbc[d].get<std::string>();
        if (bc == "periodic")
            grid.bc[d] = Bc::periodic;
        else if (bc == "neumann")
            grid.bc[d] = Bc::neumann;
        else
            config_fail("problem.bc", "unknown boundary condition '" + bc + "'");
    }

    const json& jg = require(root, "$", "grid");
    if (!jg.is_object()) config_fail("grid", "expected an object");
    reject_unknown(jg, "grid", {"n_x", "n_y", "n_t", "T"});
    grid.n_space[0] = int_at(require(jg, "grid", "n_x"), "grid.n_x");
    if (dims == 2)
        grid.n_space[1] = int_at(require(jg, "grid", "n_y"), "grid.n_y");
    else if (jg.contains("n_y"))
        config_fail("grid.n_y", "only valid for dimension 2");
    grid.n_t = int_at(require(jg, "grid", "n_t"), "grid.n_t");
    grid.T = number_at(require(jg, "grid", "T"), "grid.T");
    try {
        validate_grid(grid);
    } catch (const std::invalid_argument& e) {
        config_fail("grid", e.what());
    }

    RunConfig rc;
    rc.problem.grid = grid;
    rc.problem.dynamics = detail::make_dynamics(require(jp, "problem", "dynamics"),
                                                "problem.dynamics", dims);
    rc.problem.terminal_cost = detail::make_terminal_cost(
        require(jp, "problem", "terminal_cost"), "problem.terminal_cost", dims);
    rc.problem.lagrangian =
        detail::make_lagrangian(require(jp, "problem", "lagrangian"), "problem.lagrangian");
    rc.problem.epsilon = number_at(jp.value("epsilon", json(0.0)), "problem.epsilon");
    if (rc.problem.epsilon < 0) config_fail("problem.epsilon", "must be nonnegative");

    if (root.contains("pdhg")) {
        const json& js = root["pdhg"];
        if (!js.is_object()) config_fail("pdhg", "expected an object");
        reject_unknown(js, "pdhg",
                       {"tau_rho", "tau_alpha", "tau_phi", "c", "n_inner", "max_outer",
                        "tol", "windows", "rho_floor", "check_every"});
        PdhgConfig& p = rc.pdhg;
        if (js.contains("tau_rho")) p.tau_rho = number_at(js["tau_rho"], "pdhg.tau_rho");
        if (js.contains("tau_alpha"))
            p.tau_alpha = number_at(js["tau_alpha"], "pdhg.tau_alpha");
        if (js.contains("tau_phi")) p.tau_phi = number_at(js["tau_phi"], "pdhg.tau_phi");
        if (js.contains("c")) p.c = number_at(js["c"], "pdhg.c");
        if (!(p.c > 0)) config_fail("pdhg.c", "must be positive");
        if (js.contains("n_inner")) p.n_inner = int_at(js["n_inner"], "pdhg.n_inner");
        if (p.n_inner < 1) config_fail("pdhg.n_inner", "must be >= 1");
        if (js.contains("max_outer"))
            p.max_outer = int_at(js["max_outer"], "pdhg.max_outer");
        if (p.max_outer < 1) config_fail("pdhg.max_outer", "must be >= 1");
        if (js.contains("tol")) p.tol = number_at(js["tol"], "pdhg.tol");
        if (!(p.tol > 0)) config_fail("pdhg.tol", "must be positive");
        if (js.contains("windows")) p.windows = int_at(js["windows"], "pdhg.windows");
        if (p.windows < 1) config_fail("pdhg.windows", "must be >= 1");
        if (js.contains("rho_floor"))
            p.rho_floor = number_at(js["rho_floor"], "pdhg.rho_floor");
        if (!(p.rho_floor > 0)) config_fail("pdhg.rho_floor", "must be positive");
        if (js.contains("check_every"))
            p.check_every = int_at(js["check_every"], "pdhg.check_every");
        if (p.check_every < 1) config_fail("pdhg.check_every", "must be >= 1");
    }

    if (root.contains("output")) {
        if (!root["output"].is_string()) config_fail("output", "expected a string");
        rc.output = root["output"].get<std::string>();
    }
    rc.echo = root;
    return rc;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    return parse_config_json(root);
}

}  // namespace hjpdhg
