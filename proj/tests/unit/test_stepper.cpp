#include "penaltyflow/adapt.hpp"
#include "penaltyflow/stepper.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pflow;

namespace {

SpacePtr scalar_space() {
    return build_space(std::make_shared<const Mesh>(build_rect_mesh(1, 1, 0, 0, 1, 1)), SpaceKind::P1Scalar);
}

Field constant(const SpacePtr& S, double c) { return Field(S, Eigen::VectorXd::Constant(S->dof_count(), c)); }

SpacePtr velocity_for(const Problem& p, int n) {
    const auto& d = p.domain;
    return build_space(std::make_shared<const Mesh>(build_rect_mesh(n, n, d.x0, d.y0, d.x1, d.y1)),
                       SpaceKind::P2Vector);
}

// y' = -y on [0,1] from y(0) = 1 with backward Euler, optionally filtered;
// the history before t = 0 is the exact value. Returns |y(1) - e^{-1}|.
double ode_error(int n, bool filtered) {
    const auto S = scalar_space();
    const double k = 1.0 / n;
    Field y_nm1 = constant(S, std::exp(k));
    Field y_n = constant(S, 1.0);
    const double alpha1 = alpha_coeffs(1.0, 1.0).alpha1;
    for (int i = 0; i < n; ++i) {
        Field y1(S, y_n.coeffs / (1.0 + k));
        if (filtered) {
            y1 = apply_time_filter(y1, compute_D2(y1, y_n, y_nm1, k, k), alpha1);
        }
        y_nm1 = y_n;
        y_n = y1;
    }
    return std::abs(y_n.coeffs[0] - std::exp(-1.0));
}

} // namespace

TEST_SUITE("stepper") {

TEST_CASE("extrapolation") {
    const auto S = scalar_space();
    const Field c = constant(S, 2.5);
    CHECK((extrapolate(c, c, 1.0).coeffs.array() == 2.5).all());
    const Field three = constant(S, 3.0);
    const Field one = constant(S, 1.0);
    CHECK((extrapolate(three, one, 1.0).coeffs.array() == 5.0).all());
    CHECK((extrapolate(three, one, 2.0).coeffs.array() == 7.0).all());
}

TEST_CASE("second difference") {
    const auto S = scalar_space();
    CHECK((compute_D2(constant(S, 4.0), constant(S, 1.0), constant(S, 0.0), 0.1, 0.1).coeffs.array() == 2.0).all());
    // Samples of a linear function at t_{n-1} = 0, t_n = 0.3, t_{n+1} = 0.3 + 0.5.
    const double k_n = 0.3;
    const double k_np1 = 0.5;
    auto lin = [](double t) { return 2.0 - 7.0 * t; };
    const Field d = compute_D2(constant(S, lin(k_n + k_np1)), constant(S, lin(k_n)), constant(S, lin(0.0)), k_np1,
                               k_n);
    CHECK(d.coeffs.lpNorm<Eigen::Infinity>() < 1e-14);
    // Equal steps reduce to u1 - 2 u_n + u_{n-1}.
    const Field e = compute_D2(constant(S, 1.7), constant(S, 0.4), constant(S, -0.2), 0.05, 0.05);
    CHECK(e.coeffs[0] == doctest::Approx(1.7 - 0.8 - 0.2));
}

TEST_CASE("time filter") {
    const auto S = scalar_space();
    const Field u1 = constant(S, 1.25);
    CHECK((apply_time_filter(u1, constant(S, 0.0), 2.0 / 3.0).coeffs.array() == 1.25).all());
    const Field un = constant(S, 1.0);
    const Field unm1 = constant(S, 0.5);
    const Field d2 = compute_D2(u1, un, unm1, 0.1, 0.1);
    const Field f = apply_time_filter(u1, d2, 2.0 / 3.0);
    CHECK(f.coeffs[0] == doctest::Approx(1.25 - (1.25 - 2.0 + 0.5) / 3.0));
    // Linear in the data.
    const double a = -3.5;
    const Field scaled = apply_time_filter(a * u1, a * d2, 0.7);
    CHECK((scaled.coeffs - a * apply_time_filter(u1, d2, 0.7).coeffs).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("filtered backward Euler is second order on y' = -y") {
    const double e1 = ode_error(40, false);
    const double e2 = ode_error(80, false);
    const double f1 = ode_error(40, true);
    const double f2 = ode_error(80, true);
    CHECK(std::log2(e1 / e2) == doctest::Approx(1.0).epsilon(0.2));
    CHECK(std::log2(f1 / f2) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("discrete acceleration") {
    const auto V = build_space(std::make_shared<const Mesh>(build_rect_mesh(2, 2, 0, 0, 1, 1)), SpaceKind::P2Vector);
    const Field u = interpolate(V, [](double x, double y, double) { return Vec2{x, y * y}; }, 0.0);
    CHECK(discrete_accel(u, u, 0.1) == 0.0);
    const double k = 0.01;
    const Field c = interpolate(V, [](double, double, double) { return Vec2{3.0, 4.0}; }, 0.0);
    const Field moved(V, u.coeffs + k * c.coeffs);
    CHECK(discrete_accel(moved, u, k) == doctest::Approx(5.0).epsilon(1e-10));
}

TEST_CASE("pressure recovery") {
    const auto mesh = std::make_shared<const Mesh>(build_rect_mesh(3, 3, 0, 0, 1, 1));
    const auto V = build_space(mesh, SpaceKind::P2Vector);
    const auto Q = build_space(mesh, SpaceKind::P1Scalar);
    const Field radial = interpolate(V, [](double x, double y, double) { return Vec2{x, y}; }, 0.0);
    const Field p = recover_pressure(radial, 0.5, Q);
    CHECK((p.coeffs.array() + 4.0).abs().maxCoeff() < 1e-12);
    const Field shear = interpolate(V, [](double, double y, double) { return Vec2{y, 0.0}; }, 0.0);
    CHECK(recover_pressure(shear, 1e-3, Q).coeffs.lpNorm<Eigen::Infinity>() < 1e-9);

    const PenaltyStepper stepper(V, quiescent());
    const Field ps = stepper.recover_pressure(radial, 0.5);
    CHECK((ps.coeffs - p.coeffs).lpNorm<Eigen::Infinity>() < 1e-13);
    CHECK(stepper.penalty_relation(radial, ps, 0.5).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("step inputs are validated") {
    const auto V = velocity_for(quiescent(), 2);
    PenaltyStepper stepper(V, quiescent());
    const Field z(V);
    StepInput in{&z, &z, 0.1, 0.1, 1e-6, 0.1};
    CHECK_NOTHROW(stepper.be_penalty_step(in));
    in.k_np1 = 0.0;
    CHECK_THROWS_AS(stepper.be_penalty_step(in), std::invalid_argument);
    in.k_np1 = 0.1;
    in.eps_np1 = -1.0;
    CHECK_THROWS_AS(stepper.be_penalty_step(in), std::invalid_argument);
    in.eps_np1 = 1e-6;
    in.u_nm1 = nullptr;
    CHECK_THROWS_AS(stepper.be_penalty_step(in), std::invalid_argument);
}

TEST_CASE("zero data gives the zero step") {
    const auto V = velocity_for(quiescent(), 3);
    PenaltyStepper stepper(V, quiescent());
    const Field z(V);
    const StepResult r = stepper.be_penalty_step({&z, &z, 0.05, 0.05, 1e-8, 0.05});
    CHECK(r.report.success);
    CHECK(r.u1.coeffs.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("unforced Stokes step dissipates") {
    Problem p = quiescent();
    const auto V = velocity_for(p, 4);
    PenaltyStepper stepper(V, p, {}, false);
    const Field u0 = interpolate(
        V,
        [](double x, double y, double) {
            const double b = x * (1 - x) * y * (1 - y);
            return Vec2{b * (1 - 2 * y), -b * (1 - 2 * x)};
        },
        0.0);
    const StepResult r = stepper.be_penalty_step({&u0, &u0, 0.01, 0.01, 1e-6, 0.01});
    CHECK(norm(r.u1, NormKind::L2) < norm(u0, NormKind::L2));
}

TEST_CASE("boundary values are imposed exactly") {
    const Problem p = taylor_green();
    const auto V = velocity_for(p, 4);
    PenaltyStepper stepper(V, p);
    const Field u0 = interpolate(V, *p.exact_u, 0.0);
    const double k = 0.02;
    const StepResult r = stepper.be_penalty_step({&u0, &u0, k, k, 1e-6, k});
    const Eigen::VectorXd bc = dirichlet_values(*V, p.boundary, k);
    for (int d : V->dirichlet_dofs()) {
        CHECK(r.u1.coeffs[d] == bc[d]);
    }
}

TEST_CASE("energy identity holds for each step") {
    const Problem p = vortex_square();
    const auto V = velocity_for(p, 6);
    PenaltyStepper stepper(V, p);
    Field u_nm1(V);
    Field u_n(V);
    const double k = 0.01;
    for (double eps : {1e-8, 1e-6, 1e-4}) {
        for (int i = 1; i <= 5; ++i) {
            const double t = i * k;
            const StepResult r = stepper.be_penalty_step({&u_n, &u_nm1, k, k, eps, t});
            const EnergyBalance e = stepper.energy_balance(r.u1, u_n, k, eps, r.load);
            CAPTURE(eps);
            CAPTURE(i);
            CHECK(e.relative_residual() <= 1e-8);
            u_nm1 = u_n;
            u_n = r.u1;
        }
    }
}

TEST_CASE("a step from exact data has second-order local error") {
    // With nu = 1 the Taylor-Green field decays like e^{-2t}, so u_tt = 4u and
    // the time part dominates the spatial error on this mesh.
    const Problem p = taylor_green(1.0);
    const auto& d = p.domain;
    const auto V = build_space(
        std::make_shared<const Mesh>(build_rect_mesh(16, 16, d.x0, d.y0, d.x1, d.y1, RectPattern::CrissCross)),
        SpaceKind::P2Vector);
    PenaltyStepper stepper(V, p);
    const double t0 = 0.0;
    auto step_error = [&](double k) {
        const Field u_n = interpolate(V, *p.exact_u, t0);
        const Field u_nm1 = interpolate(V, *p.exact_u, t0 - k);
        const StepResult r = stepper.be_penalty_step({&u_n, &u_nm1, k, k, 1e-8, t0 + k});
        return l2_distance(r.u1, *p.exact_u, t0 + k);
    };
    const double e1 = step_error(0.1);
    const double e2 = step_error(0.05);
    const double e3 = step_error(0.025);
    MESSAGE("one-step errors " << e1 << " " << e2 << " " << e3);
    CHECK(std::log2(e1 / e2) > 1.6);
    CHECK(std::log2(e2 / e3) > 1.6);
}

}
