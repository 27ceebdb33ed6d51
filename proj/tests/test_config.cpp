#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "hjpdhg/config.hpp"
#include "hjpdhg/io.hpp"

using namespace hjpdhg;
namespace fs = std::filesystem;

namespace {

nlohmann::json minimal_config() {
    return nlohmann::json{
        {"problem",
         {{"dimension", 1},
          {"domain", {{0, 2}}},
          {"bc", {"periodic"}},
          {"dynamics", {{"name", "quadratic_xdep"}}},
          {"terminal_cost", {{"name", "sin_pi"}}},
          {"lagrangian", {{"kind", "quadratic"}, {"weight", 1.0}}}}},
        {"grid", {{"n_x", 160}, {"n_t", 41}, {"T", 1.0}}}};
}

std::string error_of(const nlohmann::json& cfg) {
    try {
        parse_config_json(cfg);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "hjpdhg_test_io";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("minimal config fills defaults") {
    const RunConfig rc = parse_config_json(minimal_config());
    CHECK(rc.problem.grid.n_space[0] == 160);
    CHECK(rc.problem.grid.n_t == 41);
    CHECK(rc.problem.grid.bc[0] == Bc::periodic);
    CHECK(rc.problem.epsilon == doctest::Approx(0.0));
    CHECK(rc.pdhg.tol == doctest::Approx(1e-6));
    CHECK(rc.pdhg.n_inner == 10);
    CHECK(rc.pdhg.windows == 1);
    CHECK(rc.output.empty());

    const std::array<double, 1> x{0.0};
    CHECK(rc.problem.coef_A(0, x, rc.problem.grid.T) == doctest::Approx(-1.1));
    CHECK(rc.problem.terminal_cost(std::array<double, 1>{0.5}) == doctest::Approx(1.0));
}

TEST_CASE("catalog entries resolve") {
    nlohmann::json cfg = minimal_config();
    cfg["problem"]["dimension"] = 2;
    cfg["problem"]["domain"] = {{-2, 2}, {-1, 1}};
    cfg["problem"]["bc"] = {"neumann", "periodic"};
    cfg["problem"]["dynamics"] = {{"name", "newton"}};
    cfg["problem"]["terminal_cost"] = {{"name", "gauss_sin"}};
    cfg["problem"]["lagrangian"] = {{"kind", "box_indicator"}, {"radius", 1.0}};
    cfg["grid"] = {{"n_x", 9}, {"n_y", 8}, {"n_t", 5}, {"T", 1.0}};
    const RunConfig rc = parse_config_json(cfg);
    CHECK(rc.problem.dynamics.control_dependent[0]);
    CHECK(!rc.problem.dynamics.control_dependent[1]);
    const std::array<double, 2> x{0.5, 0.0};
    CHECK(rc.problem.coef_b(1, x, rc.problem.grid.T) == doctest::Approx(0.5));

    nlohmann::json c2 = minimal_config();
    c2["problem"]["dynamics"] = {{"name", "constant"}, {"a", 0.0}, {"b", 0.25}};
    const RunConfig r2 = parse_config_json(c2);
    CHECK(!r2.problem.dynamics.control_dependent[0]);
    CHECK(r2.problem.coef_b(0, x, 0.0) == doctest::Approx(0.25));
}

TEST_CASE("validation errors carry field paths") {
    nlohmann::json bad_lagrangian = minimal_config();
    bad_lagrangian["problem"]["lagrangian"] = {{"kind", "cubic"}};
    CHECK(error_of(bad_lagrangian).find("problem.lagrangian.kind") != std::string::npos);

    nlohmann::json bad_grid = minimal_config();
    bad_grid["grid"]["n_t"] = 1;
    CHECK(error_of(bad_grid).find("grid") != std::string::npos);

    nlohmann::json unknown_key = minimal_config();
    unknown_key["pdhg"] = {{"tau_sigma", 0.1}};
    CHECK(error_of(unknown_key).find("pdhg.tau_sigma") != std::string::npos);

    nlohmann::json stray_ny = minimal_config();
    stray_ny["grid"]["n_y"] = 12;
    CHECK(error_of(stray_ny).find("grid.n_y") != std::string::npos);

    nlohmann::json bad_bc = minimal_config();
    bad_bc["problem"]["bc"] = {"absorbing"};
    CHECK(error_of(bad_bc).find("problem.bc") != std::string::npos);

    nlohmann::json no_dynamics = minimal_config();
    no_dynamics["problem"].erase("dynamics");
    CHECK(error_of(no_dynamics).find("problem.dynamics") != std::string::npos);

    nlohmann::json bad_eps = minimal_config();
    bad_eps["problem"]["epsilon"] = -0.1;
    CHECK(error_of(bad_eps).find("problem.epsilon") != std::string::npos);

    nlohmann::json bad_c = minimal_config();
    bad_c["pdhg"] = {{"c", -1.0}};
    CHECK(error_of(bad_c).find("pdhg.c") != std::string::npos);

    nlohmann::json bad_dyn = minimal_config();
    bad_dyn["problem"]["dynamics"] = {{"name", "spiral"}};
    CHECK(error_of(bad_dyn).find("problem.dynamics.name") != std::string::npos);

    CHECK_THROWS_AS(parse_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("pdhg overrides are honored") {
    nlohmann::json cfg = minimal_config();
    cfg["pdhg"] = {{"tau_rho", 0.1},   {"tau_alpha", 0.2}, {"tau_phi", 0.3},
                   {"c", 2.0},         {"n_inner", 3},     {"max_outer", 77},
                   {"tol", 1e-4},      {"windows", 2},     {"rho_floor", 1e-5},
                   {"check_every", 4}};
    cfg["output"] = "results/demo";
    const RunConfig rc = parse_config_json(cfg);
    CHECK(rc.pdhg.tau_rho == doctest::Approx(0.1));
    CHECK(rc.pdhg.tau_alpha == doctest::Approx(0.2));
    CHECK(rc.pdhg.tau_phi == doctest::Approx(0.3));
    CHECK(rc.pdhg.c == doctest::Approx(2.0));
    CHECK(rc.pdhg.n_inner == 3);
    CHECK(rc.pdhg.max_outer == 77);
    CHECK(rc.pdhg.windows == 2);
    CHECK(rc.pdhg.check_every == 4);
    CHECK(rc.output == "results/demo");
}

TEST_CASE("field csv round trip is bitwise") {
    const Grid g = make_grid_1d(0.0, 2.0, 12, 5, 1.0);
    Field f(g);
    std::mt19937 rng(2024u);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : f.values) v = u(rng) * 1e3 + 1e-7 * u(rng);
    const fs::path path = temp_dir() / "field.csv";
    write_field_csv(path, f);
    const Field back = read_field_csv(path, g);
    for (std::size_t i = 0; i < f.values.size(); ++i)
        CHECK(back.values[i] == f.values[i]);  // bitwise

    CHECK_THROWS_AS(read_field_csv(path, make_grid_1d(0.0, 2.0, 10, 5, 1.0)), IoError);
    CHECK_THROWS_AS(read_field_csv(temp_dir() / "missing.csv", g), IoError);
}

TEST_CASE("solution directory round trip") {
    nlohmann::json cfg = minimal_config();
    cfg["grid"] = {{"n_x", 16}, {"n_t", 5}, {"T", 1.0}};
    cfg["pdhg"] = {{"max_outer", 20}, {"check_every", 5}};
    const RunConfig rc = parse_config_json(cfg);
    auto [st, rep] = solve(rc.problem, rc.pdhg);

    const fs::path dir = temp_dir() / "solution";
    write_solution(dir, st, rep, rc.echo);
    CHECK(fs::exists(dir / "phi.csv"));
    CHECK(fs::exists(dir / "alpha_x_up.csv"));

    const nlohmann::json meta = read_metadata(dir);
    CHECK(meta.at("version") == "0.1.0");
    CHECK(meta.at("grid").at("n_t") == 5);
    CHECK(meta.at("report").at("outer_iterations") == rep.outer_iterations);
    const RunConfig echoed = parse_config_json(meta.at("config"));
    CHECK(echoed.problem.grid.n_space[0] == 16);

    const SolverState back = read_solution(dir, rc.problem);
    for (std::size_t i = 0; i < st.phi.values.size(); ++i) {
        CHECK(back.phi.values[i] == st.phi.values[i]);
        CHECK(back.rho.values[i] == st.rho.values[i]);
    }
    REQUIRE(back.alpha.size() == st.alpha.size());
    for (std::size_t a = 0; a < st.alpha.size(); ++a)
        for (std::size_t i = 0; i < st.alpha[a].field.values.size(); ++i)
            CHECK(back.alpha[a].field.values[i] == st.alpha[a].field.values[i]);

    CHECK_THROWS_AS(read_metadata(temp_dir() / "nowhere"), IoError);
}

TEST_CASE("trajectory csv layout") {
    TrajectoryResult tr;
    tr.times = {0.0, 0.5, 1.0};
    tr.states = {{0.1, 0.0}, {0.2, 0.0}, {0.3, 0.0}};
    tr.controls = {{1.0, 0.0}, {-1.0, 0.0}};
    const fs::path path = temp_dir() / "traj.csv";
    write_trajectory_csv(path, tr, 1);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "s,gamma_1,alpha_1");
    int rows = 0;
    while (std::getline(in, row))
        if (!row.empty()) ++rows;
    CHECK(rows == 3);
}
