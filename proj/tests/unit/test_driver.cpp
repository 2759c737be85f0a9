#include "penaltyflow/driver.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pflow;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string error_of(const std::string& text) {
    try {
        (void)parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

RunConfig small_vortex(Algorithm a) {
    RunConfig c;
    c.problem = "vortex_square";
    c.algorithm = a;
    c.nx = 6;
    c.k0 = 0.05;
    c.t_end = 0.3;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("penaltyflow_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

} // namespace

TEST_SUITE("driver") {

TEST_CASE("parsing a full config") {
    const RunConfig c = parse("# comment\n"
                              "problem = taylor_green\n"
                              "algorithm = vsvo   # trailing comment\n"
                              "nx = 12\n"
                              "k0 = 0.02\n"
                              "eps0 = 1e-6\n"
                              "tol = 2e-6\n"
                              "min_tol = 1e-7\n"
                              "guard = off\n"
                              "solver = gmres\n"
                              "solver_tol = 1e-11\n"
                              "t_end = 0.5\n"
                              "\n");
    CHECK(c.problem == "taylor_green");
    CHECK(c.algorithm == Algorithm::Vsvo);
    CHECK(c.nx == 12);
    CHECK(c.k0 == 0.02);
    CHECK(c.eps0 == 1e-6);
    CHECK(c.tol.tol == 2e-6);
    CHECK_FALSE(c.guard);
    CHECK(c.solver.kind == SolverKind::Gmres);
    CHECK(c.solver.tol == 1e-11);
    REQUIRE(c.t_end);
    CHECK(*c.t_end == 0.5);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("algorithm names round-trip") {
    for (auto a : {Algorithm::ConstantStep, Algorithm::FirstOrder, Algorithm::SecondOrder, Algorithm::Vsvo}) {
        CHECK(parse_algorithm(algorithm_name(a)) == a);
    }
    CHECK(algorithm_name(Algorithm::ConstantStep) == "alg1-const-k");
    CHECK_THROWS_AS(parse_algorithm("rk4"), ConfigError);
}

TEST_CASE("config errors name the line") {
    CHECK(error_of("nx = 4\ntolerance = 1e-6\n").find("line 2") != std::string::npos);
    CHECK(error_of("nx = 4\ntolerance = 1e-6\n").find("tolerance") != std::string::npos);
    CHECK(error_of("nx = four\n").find("line 1") != std::string::npos);
    CHECK(error_of("k0 = 0.1\nk0 = 0.2\n").find("already set on line 1") != std::string::npos);
    CHECK(error_of("just words\n").find("line 1") != std::string::npos);
    CHECK(error_of("guard = maybe\n").find("on/off") != std::string::npos);
    CHECK(error_of("k0 = 0.1x\n").find("expects a number") != std::string::npos);
    CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("config invariants") {
    auto invalid = [](auto mutate) {
        RunConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    CHECK_NOTHROW(RunConfig{}.validate());
    invalid([](RunConfig& c) { c.k0 = 0.0; });
    invalid([](RunConfig& c) { c.eps0 = 1.0; });
    invalid([](RunConfig& c) { c.nx = 0; });
    invalid([](RunConfig& c) { c.t_end = -1.0; });
    invalid([](RunConfig& c) { c.tol.min_tol = 1.0; });
    invalid([](RunConfig& c) { c.solver.tol = 0.0; });
}

TEST_CASE("single keys can be set") {
    RunConfig c;
    set_config_value(c, "nx", "7");
    set_config_value(c, "guard", "off");
    set_config_value(c, "algorithm", "first-var-k");
    CHECK(c.nx == 7);
    CHECK_FALSE(c.guard);
    CHECK(c.algorithm == Algorithm::FirstOrder);
    CHECK_THROWS_AS(set_config_value(c, "bogus", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "nx", ""), ConfigError);
    CHECK(c.mesh_pattern == RectPattern::CrissCross);
    set_config_value(c, "mesh_pattern", "diagonal");
    CHECK(c.mesh_pattern == RectPattern::Diagonal);
    CHECK_THROWS_AS(set_config_value(c, "mesh_pattern", "hex"), ConfigError);
}

TEST_CASE("time series header") {
    std::ostringstream out;
    write_timeseries(out, {});
    CHECK(out.str() == "t,k,eps,order,est_e,test1,test2,div_u,grad_u,ut_norm,rejects,u_err_l2,u_err_linf,"
                       "p_err_linf\n");
}

TEST_CASE("error columns are empty without an exact solution") {
    StepRecord r;
    r.t = 0.1;
    r.k = 0.1;
    r.eps = 1e-6;
    std::ostringstream out;
    write_timeseries(out, {r});
    const std::string text = out.str();
    const std::string row = text.substr(text.find('\n') + 1);
    CHECK(row.substr(row.size() - 4) == ",,,\n");
}

TEST_CASE("quiescent run stays at rest") {
    RunConfig c;
    c.problem = "quiescent";
    c.nx = 4;
    c.k0 = 0.1;
    c.t_end = 0.5;
    for (auto a : {Algorithm::ConstantStep, Algorithm::Vsvo}) {
        c.algorithm = a;
        const RunResult r = run_simulation(c);
        REQUIRE_FALSE(r.steps.empty());
        for (const auto& s : r.steps) {
            CHECK(s.est_e == 0.0);
            CHECK(s.div_u == 0.0);
            CHECK(s.ut_norm == 0.0);
            CHECK(*s.u_err_l2 == 0.0);
        }
        CHECK(r.t_final == doctest::Approx(0.5));
        CHECK(*r.u_err_l2 == 0.0);
    }
}

TEST_CASE("time series invariants of adaptive runs") {
    for (auto a : {Algorithm::FirstOrder, Algorithm::SecondOrder, Algorithm::Vsvo, Algorithm::ConstantStep}) {
        CAPTURE(algorithm_name(a));
        const RunConfig c = small_vortex(a);
        const RunResult r = run_simulation(c);
        REQUIRE(r.steps.size() >= 2);
        double t_prev = 0.0;
        double k_prev = c.k0;
        for (const auto& s : r.steps) {
            CHECK(s.t > t_prev);
            CHECK(s.eps >= c.tol.eps_min);
            CHECK(s.eps <= c.tol.eps_max);
            CHECK(s.k / k_prev >= 0.5 - 1e-12);
            CHECK(s.k / k_prev <= 2.0 + 1e-12);
            CHECK(std::abs(s.t - t_prev - s.k) < 1e-12);
            CHECK(s.penalty_residual <= 1e-10);
            if (a == Algorithm::ConstantStep) {
                CHECK(s.k == c.k0);
            }
            t_prev = s.t;
            k_prev = s.k;
        }
        CHECK(r.t_final == doctest::Approx(0.3).epsilon(1e-12));
    }
}

TEST_CASE("files are written and consistent") {
    RunConfig c = small_vortex(Algorithm::Vsvo);
    const auto dir = scratch("files");
    c.output_dir = dir.string();
    const RunResult r = run_experiment(c);
    const std::string ts = slurp(dir / "timeseries.csv");
    const std::string sm = slurp(dir / "summary.csv");
    const auto rows = static_cast<std::size_t>(std::count(ts.begin(), ts.end(), '\n')) - 1;
    CHECK(rows == r.steps.size());
    std::istringstream s(sm);
    std::string header;
    std::string line;
    std::getline(s, header);
    std::getline(s, line);
    CHECK(header.rfind("problem,algorithm,steps,", 0) == 0);
    CHECK(line.rfind("vortex_square,vsvo," + std::to_string(rows) + ",", 0) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("runs are deterministic") {
    RunConfig c = small_vortex(Algorithm::Vsvo);
    const auto d1 = scratch("det1");
    const auto d2 = scratch("det2");
    c.output_dir = d1.string();
    run_experiment(c);
    c.output_dir = d2.string();
    run_experiment(c);
    CHECK(slurp(d1 / "timeseries.csv") == slurp(d2 / "timeseries.csv"));
    CHECK(slurp(d1 / "summary.csv") == slurp(d2 / "summary.csv"));
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST_CASE("unwritable output directory") {
    RunConfig c;
    c.problem = "quiescent";
    c.nx = 2;
    c.k0 = 0.5;
    c.t_end = 0.5;
    c.output_dir = "/proc/penaltyflow/out";
    CHECK_THROWS_AS(run_experiment(c), OutputError);
}

TEST_CASE("convergence study") {
    RunConfig c = small_vortex(Algorithm::ConstantStep);
    c.t_end = 0.2;
    const auto rows = convergence_study(c, {0.1, 0.05});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].steps == 2);
    CHECK(rows[1].steps == 4);
    CHECK_FALSE(rows[0].rate_l2);
    REQUIRE(rows[1].rate_l2);
    CHECK(*rows[1].rate_l2 == doctest::Approx(std::log2(rows[0].u_err_l2 / rows[1].u_err_l2)));

    std::ostringstream out;
    write_rates(out, rows);
    CHECK(out.str().rfind("k,steps,u_err_l2,rate_l2,", 0) == 0);

    CHECK_THROWS_AS(convergence_study(c, {}), ConfigError);
    RunConfig vs = c;
    vs.algorithm = Algorithm::Vsvo;
    CHECK_THROWS_AS(convergence_study(vs, {0.1}), ConfigError);
    RunConfig oc = c;
    oc.problem = "offset_circles";
    CHECK_THROWS_AS(convergence_study(oc, {0.1}), ConfigError);
}

TEST_CASE("energy check on a homogeneous run") {
    RunConfig c = small_vortex(Algorithm::ConstantStep);
    c.check_energy = true;
    const RunResult r = run_simulation(c);
    for (const auto& s : r.steps) {
        REQUIRE(s.energy_residual);
        CHECK(*s.energy_residual <= 1e-8);
    }
}

TEST_CASE("observer sees every accepted step") {
    const RunConfig c = small_vortex(Algorithm::SecondOrder);
    std::size_t seen = 0;
    const RunResult r = run_simulation(c, [&](const StepRecord&) { ++seen; });
    CHECK(seen == r.steps.size());
}

}
