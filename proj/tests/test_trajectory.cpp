#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "hjpdhg/trajectory.hpp"

using namespace hjpdhg;

namespace {

ControlProblem drift_free_problem(const Grid& g) {
    ControlProblem pb;
    pb.grid = g;
    pb.dynamics.dims = g.dims;
    for (int d = 0; d < g.dims; ++d) {
        pb.dynamics.control_dependent[d] = true;
        pb.dynamics.A[d] = [](std::span<const double>, double) { return 1.0; };
    }
    pb.lagrangian = {LagrangianKind::quadratic, 1.0, 1.0};
    pb.terminal_cost = [](std::span<const double>) { return 0.0; };
    return pb;
}

SolverState zero_state(const ControlProblem& pb) {
    return init_state(pb, PdhgConfig{});
}

}  // namespace

TEST_CASE("feedback control interpolates the branch fields") {
    const Grid g = make_grid_1d(0.0, 2.0, 3, 3, 1.0, Bc::neumann);
    const ControlProblem pb = drift_free_problem(g);

    SolverState st = zero_state(pb);
    const std::array<double, 1> x{0.7};
    auto zero = feedback_control(st, pb, x, 0.3);
    CHECK(zero[0] == doctest::Approx(0.0));

    for (AlphaSlot& s : st.alpha)
        if (s.branch == Branch::up)
            for (double& v : s.field.values) v = -1.0;
    auto full = feedback_control(st, pb, x, 0.3);
    CHECK(full[0] == doctest::Approx(-1.0));

    // Nodes at x = 0, 1, 2 with values 0 and -1: the midpoint reads -0.5.
    SolverState st2 = zero_state(pb);
    for (AlphaSlot& s : st2.alpha)
        if (s.branch == Branch::up)
            for (int k = 0; k < g.n_t; ++k) s.field(k, 1) = -1.0;
    const std::array<double, 1> mid{0.5};
    CHECK(feedback_control(st2, pb, mid, 0.0)[0] == doctest::Approx(-0.5));

    CHECK_THROWS_AS(feedback_control(st, pb, x, -0.5), std::out_of_range);
    CHECK_THROWS_AS(feedback_control(st, pb, x, 1.5), std::out_of_range);
}

TEST_CASE("ode path is constant without dynamics") {
    const Grid g = make_grid_1d(0.0, 2.0, 8, 4, 1.0);
    ControlProblem pb = drift_free_problem(g);
    const SolverState st = zero_state(pb);  // alpha = 0, b = 0
    const std::vector<double> x0{0.7};
    const TrajectoryResult tr = integrate_ode(st, pb, x0, 0.0, 10);
    REQUIRE(tr.states.size() == 11);
    REQUIRE(tr.controls.size() == 10);
    for (const auto& s : tr.states) CHECK(s[0] == doctest::Approx(0.7));
    CHECK(!tr.seed.has_value());
    CHECK(tr.times.front() == doctest::Approx(0.0));
    CHECK(tr.times.back() == doctest::Approx(1.0));
}

TEST_CASE("euler steps on the double integrator") {
    // x1' = alpha, x2' = x1 with alpha forced to 1: two steps of h = 0.1 from
    // the origin land on (0.1, 0) and then (0.2, 0.01).
    ControlProblem pb;
    pb.grid = make_grid_2d({-2.0, -1.0}, {2.0, 1.0}, {9, 8}, 3, 0.2,
                           {Bc::neumann, Bc::neumann});
    pb.dynamics.dims = 2;
    pb.dynamics.A[0] = [](std::span<const double>, double) { return 1.0; };
    pb.dynamics.control_dependent = {true, false};
    pb.dynamics.b[1] = [](std::span<const double> x, double) { return x[0]; };
    pb.lagrangian = {LagrangianKind::box_indicator, 1.0, 1.0};
    pb.terminal_cost = [](std::span<const double>) { return 0.0; };

    SolverState st = init_state(pb, PdhgConfig{});
    for (AlphaSlot& s : st.alpha)
        if (s.branch == Branch::up)
            for (double& v : s.field.values) v = 1.0;

    const TrajectoryResult tr = integrate_ode(st, pb, std::vector<double>{0.0, 0.0},
                                              0.0, 2);
    CHECK(tr.states[1][0] == doctest::Approx(0.1));
    CHECK(tr.states[1][1] == doctest::Approx(0.0));
    CHECK(tr.states[2][0] == doctest::Approx(0.2));
    CHECK(tr.states[2][1] == doctest::Approx(0.01));
    CHECK(tr.controls[0][0] == doctest::Approx(1.0));
}

TEST_CASE("sde with epsilon zero equals the ode bitwise") {
    const Grid g = make_grid_1d(0.0, 2.0, 8, 4, 1.0);
    ControlProblem pb = drift_free_problem(g);
    SolverState st = zero_state(pb);
    std::mt19937 rng(9u);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (AlphaSlot& s : st.alpha)
        for (double& v : s.field.values) v = u(rng);

    const std::vector<double> x0{0.3};
    const TrajectoryResult ode = integrate_ode(st, pb, x0, 0.0, 25);
    const TrajectoryResult sde = integrate_sde(st, pb, x0, 0.0, 25, 42u);
    REQUIRE(sde.seed.has_value());
    CHECK(*sde.seed == 42u);
    for (std::size_t q = 0; q < ode.states.size(); ++q)
        CHECK(sde.states[q][0] == ode.states[q][0]);  // bitwise
}

TEST_CASE("forced unit noise moves the state by the diffusion scale") {
    // f = 0, eps = 0.5, one step of h = 1: increment sqrt(2*0.5*1) * 1 = 1.
    Grid g = make_grid_1d(0.0, 5.0, 6, 3, 1.0, Bc::neumann);
    ControlProblem pb;
    pb.grid = g;
    pb.dynamics.dims = 1;
    pb.dynamics.control_dependent[0] = false;
    pb.lagrangian = {LagrangianKind::quadratic, 1.0, 1.0};
    pb.terminal_cost = [](std::span<const double>) { return 0.0; };
    pb.epsilon = 0.5;
    const SolverState st = init_state(pb, PdhgConfig{});
    const TrajectoryResult tr = integrate_sde_with_noise(
        st, pb, std::vector<double>{2.0}, 0.0, 1, [] { return 1.0; });
    CHECK(tr.states[1][0] == doctest::Approx(3.0));
}

TEST_CASE("same seed reproduces the trajectory") {
    const Grid g = make_grid_1d(0.0, 2.0, 8, 4, 1.0);
    ControlProblem pb = drift_free_problem(g);
    pb.epsilon = 0.1;
    const SolverState st = zero_state(pb);
    const std::vector<double> x0{0.5};
    const TrajectoryResult a = integrate_sde(st, pb, x0, 0.0, 40, 7u);
    const TrajectoryResult b = integrate_sde(st, pb, x0, 0.0, 40, 7u);
    const TrajectoryResult c = integrate_sde(st, pb, x0, 0.0, 40, 8u);
    bool differs = false;
    for (std::size_t q = 0; q < a.states.size(); ++q) {
        CHECK(a.states[q][0] == b.states[q][0]);
        differs = differs || a.states[q][0] != c.states[q][0];
    }
    CHECK(differs);
}

TEST_CASE("periodic wrapping keeps states in the fundamental domain") {
    const Grid g = make_grid_1d(0.0, 2.0, 8, 4, 1.0, Bc::periodic);
    ControlProblem pb = drift_free_problem(g);
    pb.dynamics.b[0] = [](std::span<const double>, double) { return 3.0; };
    const SolverState st = zero_state(pb);
    const TrajectoryResult tr = integrate_ode(st, pb, std::vector<double>{1.9}, 0.0, 16);
    for (const auto& s : tr.states) {
        CHECK(s[0] >= 0.0);
        CHECK(s[0] < 2.0);
    }
}

TEST_CASE("interpolated box controls stay feasible") {
    const Grid g = make_grid_1d(0.0, 2.0, 16, 6, 1.0, Bc::periodic);
    ControlProblem pb = drift_free_problem(g);
    pb.lagrangian = {LagrangianKind::box_indicator, 1.0, 1.0};
    SolverState st = zero_state(pb);
    std::mt19937 rng(31u);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (AlphaSlot& s : st.alpha)
        for (double& v : s.field.values) v = u(rng);
    for (int q = 0; q < 8; ++q) {
        const TrajectoryResult tr =
            integrate_ode(st, pb, std::vector<double>{0.25 * q}, 0.0, 30);
        for (const auto& a : tr.controls) {
            CHECK(a[0] >= -2.0 - 1e-9);  // two branches may overlap in fixtures
            CHECK(a[0] <= 2.0 + 1e-9);
        }
    }
}
