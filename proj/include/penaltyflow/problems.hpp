#pragma once

#include "penaltyflow/fespace.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pflow {

/// Where the spatial domain comes from: a rectangle meshed on the fly or an
/// external mesh file.
struct Domain {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 1.0;
    double y1 = 1.0;
    /// True when the domain has to be read from a mesh file (curved boundaries).
    bool needs_mesh_file = false;
};

/// A benchmark definition. When an exact solution is present, `boundary` is its trace.
struct Problem {
    std::string name;
    double nu = 1.0;
    Domain domain;
    std::optional<VectorFunction> exact_u;
    std::optional<ScalarFunction> exact_p;
    VectorFunction force;
    VectorFunction boundary;
    double t_end = 1.0;

    [[nodiscard]] bool has_exact_solution() const { return exact_u.has_value() && exact_p.has_value(); }
};

/// Modified Taylor-Green vortex on [0, 2pi]^2.
Problem taylor_green(double nu = 0.01);
/// Exact vortex on (-1,1)^2 with nu = 1.
Problem vortex_square();
/// Rotationally forced flow between offset circles (mesh supplied externally), nu = 1/100.
Problem offset_circles();
/// Fluid at rest with no forcing on the unit square.
Problem quiescent();

/// Looks up a problem by name ("taylor_green", "vortex_square", "offset_circles", "quiescent").
Problem make_problem(const std::string& name);
std::vector<std::string> problem_names();

/// Max over random interior points of |u_t - nu Lap u + u.grad u + grad p - f|,
/// with all derivatives of the exact solution taken by 4th-order central
/// differences (spacing 1e-3). Throws std::invalid_argument without an exact solution.
double verify_forcing(const Problem& p, int n_samples = 100, std::uint64_t seed = 12345);

} // namespace pflow
