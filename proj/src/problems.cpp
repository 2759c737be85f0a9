#include "penaltyflow/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace pflow {

namespace {

constexpr double pi = std::numbers::pi;

Vec2 zero_vector(double, double, double) { return {}; }

} // namespace

Problem taylor_green(double nu) {
    Problem p;
    p.name = "taylor_green";
    p.nu = nu;
    p.domain = {0.0, 0.0, 2.0 * pi, 2.0 * pi, false};
    p.t_end = 25.0;
    p.exact_u = [nu](double x, double y, double t) -> Vec2 {
        const double e = std::exp(-2.0 * nu * t);
        return {e * std::cos(x) * std::sin(y), -e * std::sin(x) * std::cos(y)};
    };
    p.exact_p = [nu](double x, double y, double t) {
        return -0.25 * std::exp(-4.0 * nu * t) * (std::cos(2.0 * x) + std::cos(2.0 * y)) +
               x * (std::sin(2.0 * t) + std::cos(3.0 * t)) + y * (std::sin(3.0 * t) + std::cos(2.0 * t));
    };
    // u_t = nu Lap u pointwise and u.grad u cancels the gradient of the
    // -1/4 e^{-4 nu t}(cos 2x + cos 2y) pressure part; only the linear
    // pressure terms survive.
    p.force = [](double, double, double t) -> Vec2 {
        return {std::sin(2.0 * t) + std::cos(3.0 * t), std::sin(3.0 * t) + std::cos(2.0 * t)};
    };
    p.boundary = *p.exact_u;
    return p;
}

Problem vortex_square() {
    Problem p;
    p.name = "vortex_square";
    p.nu = 1.0;
    p.domain = {-1.0, -1.0, 1.0, 1.0, false};
    p.t_end = 10.0;
    p.exact_u = [](double x, double y, double t) -> Vec2 {
        const double s = pi * std::sin(t);
        const double sx = std::sin(pi * x);
        const double sy = std::sin(pi * y);
        return {s * std::sin(2.0 * pi * y) * sx * sx, -s * std::sin(2.0 * pi * x) * sy * sy};
    };
    p.exact_p = [](double x, double y, double t) { return std::sin(t) * std::cos(pi * x) * std::sin(pi * y); };
    const double nu = p.nu;
    p.force = [nu](double x, double y, double t) -> Vec2 {
        const double st = std::sin(t);
        const double ct = std::cos(t);
        const double sx = std::sin(pi * x);
        const double sy = std::sin(pi * y);
        const double s2x = std::sin(2.0 * pi * x);
        const double s2y = std::sin(2.0 * pi * y);
        const double c2x = std::cos(2.0 * pi * x);
        const double c2y = std::cos(2.0 * pi * y);

        const double u1 = pi * st * sx * sx * s2y;
        const double u2 = -pi * st * s2x * sy * sy;
        const double u1_t = pi * ct * sx * sx * s2y;
        const double u2_t = -pi * ct * s2x * sy * sy;
        const double u1_x = pi * pi * st * s2x * s2y;
        const double u1_y = 2.0 * pi * pi * st * sx * sx * c2y;
        const double u2_x = -2.0 * pi * pi * st * c2x * sy * sy;
        const double u2_y = -pi * pi * st * s2x * s2y;
        const double lap_u1 = 2.0 * pi * pi * pi * st * s2y * (c2x - 2.0 * sx * sx);
        const double lap_u2 = -2.0 * pi * pi * pi * st * s2x * (c2y - 2.0 * sy * sy);
        const double p_x = -pi * st * sx * sy;
        const double p_y = pi * st * std::cos(pi * x) * std::cos(pi * y);

        return {u1_t - nu * lap_u1 + u1 * u1_x + u2 * u1_y + p_x,
                u2_t - nu * lap_u2 + u1 * u2_x + u2 * u2_y + p_y};
    };
    // The trace vanishes identically. Evaluating the formula gives sin(pi) ~ 1e-16
    // on the edges, which the 1/eps coupling would amplify.
    p.boundary = zero_vector;
    return p;
}

Problem offset_circles() {
    Problem p;
    p.name = "offset_circles";
    p.nu = 1.0 / 100.0;
    p.domain = {-1.0, -1.0, 1.0, 1.0, true};
    p.t_end = 10.0;
    p.force = [](double x, double y, double t) -> Vec2 {
        const double ramp = std::min(t, 1.0);
        const double g = 1.0 - x * x - y * y;
        return {ramp * (-4.0 * y * g), ramp * (4.0 * x * g)};
    };
    p.boundary = zero_vector;
    return p;
}

Problem quiescent() {
    Problem p;
    p.name = "quiescent";
    p.nu = 1.0;
    p.domain = {0.0, 0.0, 1.0, 1.0, false};
    p.t_end = 1.0;
    p.exact_u = zero_vector;
    p.exact_p = [](double, double, double) { return 0.0; };
    p.force = zero_vector;
    p.boundary = zero_vector;
    return p;
}

std::vector<std::string> problem_names() { return {"taylor_green", "vortex_square", "offset_circles", "quiescent"}; }

Problem make_problem(const std::string& name) {
    if (name == "taylor_green") {
        return taylor_green();
    }
    if (name == "vortex_square") {
        return vortex_square();
    }
    if (name == "offset_circles") {
        return offset_circles();
    }
    if (name == "quiescent") {
        return quiescent();
    }
    throw std::invalid_argument("unknown problem '" + name + "'");
}

namespace {

constexpr double fd_step = 1e-3;

// 4th-order central first and second differences of a scalar function of one variable.
template <typename F>
double d1(F&& f, double h) {
    return (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
}

template <typename F>
double d2(F&& f, double h) {
    return (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h);
}

} // namespace

double verify_forcing(const Problem& p, int n_samples, std::uint64_t seed) {
    if (!p.has_exact_solution()) {
        throw std::invalid_argument("verify_forcing: problem '" + p.name + "' has no exact solution");
    }
    const auto& u = *p.exact_u;
    const auto& pr = *p.exact_p;
    std::mt19937_64 rng(seed);
    const double margin = 4.0 * fd_step;
    std::uniform_real_distribution<double> ux(p.domain.x0 + margin, p.domain.x1 - margin);
    std::uniform_real_distribution<double> uy(p.domain.y0 + margin, p.domain.y1 - margin);
    std::uniform_real_distribution<double> ut(0.0, std::max(1.0, std::min(p.t_end, 10.0)));
    const double h = fd_step;

    double worst = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        const double x = ux(rng);
        const double y = uy(rng);
        const double t = ut(rng);
        const Vec2 u0 = u(x, y, t);
        const Vec2 f = p.force(x, y, t);
        const std::array<double, 2> fc{f.x, f.y};
        for (int c = 0; c < 2; ++c) {
            auto comp = [c](const Vec2& v) { return c == 0 ? v.x : v.y; };
            const double u_t = d1([&](double d) { return comp(u(x, y, t + d)); }, h);
            const double u_x = d1([&](double d) { return comp(u(x + d, y, t)); }, h);
            const double u_y = d1([&](double d) { return comp(u(x, y + d, t)); }, h);
            const double lap = d2([&](double d) { return comp(u(x + d, y, t)); }, h) +
                               d2([&](double d) { return comp(u(x, y + d, t)); }, h);
            const double grad_p = c == 0 ? d1([&](double d) { return pr(x + d, y, t); }, h)
                                         : d1([&](double d) { return pr(x, y + d, t); }, h);
            const double residual = u_t - p.nu * lap + u0.x * u_x + u0.y * u_y + grad_p - fc[c];
            worst = std::max(worst, std::abs(residual));
        }
    }
    return worst;
}

} // namespace pflow
