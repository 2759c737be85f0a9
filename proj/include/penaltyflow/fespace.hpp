#pragma once

#include "penaltyflow/mesh.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace pflow {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

using ScalarFunction = std::function<double(double x, double y, double t)>;
using VectorFunction = std::function<Vec2(double x, double y, double t)>;

/// Symmetric 7-point rule on the reference triangle, exact for degree 5.
/// Weights sum to 1/2 (the reference area).
struct Quadrature {
    static constexpr int size = 7;
    std::array<std::array<double, 3>, size> bary{};
    std::array<double, size> weights{};
};

const Quadrature& quadrature7();

/// Quadratic Lagrange basis on one triangle in barycentric form: vertices 0..2
/// then edge midpoints (v0v1, v1v2, v2v0).
struct P2Basis {
    static std::array<double, 6> values(const std::array<double, 3>& l);
    /// d(phi_i)/d(lambda_j); combine with the element's grad(lambda_j).
    static std::array<std::array<double, 3>, 6> dlambda(const std::array<double, 3>& l);
};

/// Per-triangle affine geometry.
struct ElementGeometry {
    double area = 0.0;
    std::array<Vec2, 3> grad_lambda{};
    std::array<Point, 3> vertices{};

    ElementGeometry(const Mesh& mesh, std::size_t t);
    [[nodiscard]] Point map(const std::array<double, 3>& l) const;
};

enum class SpaceKind { P2Vector, P1Scalar };
enum class NormKind { L2, H1Semi, DivL2, LinfNodal };

/// DOF layout for the two spaces used here.
///
/// P2Vector: scalar P2 nodes are mesh nodes followed by edge midpoints
/// (N + E of them); the x-components occupy [0, N+E) and the y-components
/// [N+E, 2(N+E)). Element DOFs list the six x-DOFs then the six y-DOFs.
/// P1Scalar: one DOF per mesh node.
class FESpace {
public:
    FESpace(std::shared_ptr<const Mesh> mesh, SpaceKind kind);

    [[nodiscard]] SpaceKind kind() const { return kind_; }
    [[nodiscard]] const Mesh& mesh() const { return *mesh_; }
    [[nodiscard]] const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }

    [[nodiscard]] int dof_count() const { return dof_count_; }
    [[nodiscard]] int components() const { return kind_ == SpaceKind::P2Vector ? 2 : 1; }
    /// Number of scalar DOFs per component.
    [[nodiscard]] int scalar_count() const { return dof_count_ / components(); }
    [[nodiscard]] int local_count() const { return kind_ == SpaceKind::P2Vector ? 12 : 3; }

    [[nodiscard]] std::span<const int> element_dofs(std::size_t t) const {
        const auto n = static_cast<std::size_t>(local_count());
        return {element_dofs_.data() + t * n, n};
    }

    /// Geometric location of scalar DOF s in [0, scalar_count()).
    [[nodiscard]] Point scalar_location(int s) const { return locations_[static_cast<std::size_t>(s)]; }
    [[nodiscard]] Point dof_location(int dof) const { return locations_[static_cast<std::size_t>(dof % scalar_count())]; }
    [[nodiscard]] int component_of(int dof) const { return dof / scalar_count(); }

    /// Sorted constrained DOFs (velocity only; empty for P1Scalar).
    [[nodiscard]] const std::vector<int>& dirichlet_dofs() const { return dirichlet_; }
    [[nodiscard]] bool is_dirichlet(int dof) const { return is_dirichlet_[static_cast<std::size_t>(dof)]; }

private:
    std::shared_ptr<const Mesh> mesh_;
    SpaceKind kind_;
    int dof_count_ = 0;
    std::vector<int> element_dofs_;
    std::vector<Point> locations_;
    std::vector<int> dirichlet_;
    std::vector<bool> is_dirichlet_;
};

using SpacePtr = std::shared_ptr<const FESpace>;

SpacePtr build_space(std::shared_ptr<const Mesh> mesh, SpaceKind kind);

class FieldError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Coefficient vector of a finite element function on a given space.
struct Field {
    SpacePtr space;
    Eigen::VectorXd coeffs;

    Field() = default;
    explicit Field(SpacePtr s);
    Field(SpacePtr s, Eigen::VectorXd c);

    [[nodiscard]] bool all_finite() const { return coeffs.allFinite(); }
    [[nodiscard]] bool same_space(const Field& other) const { return space == other.space; }
};

Field operator+(const Field& a, const Field& b);
Field operator-(const Field& a, const Field& b);
Field operator*(double s, const Field& a);

/// Nodal (and edge-midpoint) interpolant. Throws FieldError on a non-finite sample.
Field interpolate(const SpacePtr& space, const VectorFunction& g, double t);
Field interpolate(const SpacePtr& space, const ScalarFunction& g, double t);

/// Quadrature-evaluated norm. LinfNodal is the max absolute coefficient.
double norm(const Field& f, NormKind kind);

/// L2 distance between a velocity field and an exact vector function.
double l2_distance(const Field& f, const VectorFunction& exact, double t);

} // namespace pflow
