#include "penaltyflow/fespace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pflow {

const Quadrature& quadrature7() {
    static const Quadrature rule = [] {
        Quadrature q;
        const double s15 = std::sqrt(15.0);
        const double b1 = (6.0 + s15) / 21.0;
        const double a1 = 1.0 - 2.0 * b1;
        const double b2 = (6.0 - s15) / 21.0;
        const double a2 = 1.0 - 2.0 * b2;
        const double w0 = 9.0 / 40.0;
        const double w1 = (155.0 + s15) / 1200.0;
        const double w2 = (155.0 - s15) / 1200.0;
        q.bary = {{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
                   {a1, b1, b1},
                   {b1, a1, b1},
                   {b1, b1, a1},
                   {a2, b2, b2},
                   {b2, a2, b2},
                   {b2, b2, a2}}};
        q.weights = {w0, w1, w1, w1, w2, w2, w2};
        for (auto& w : q.weights) {
            w *= 0.5;
        }
        return q;
    }();
    return rule;
}

std::array<double, 6> P2Basis::values(const std::array<double, 3>& l) {
    return {l[0] * (2.0 * l[0] - 1.0), l[1] * (2.0 * l[1] - 1.0), l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],         4.0 * l[1] * l[2],         4.0 * l[2] * l[0]};
}

std::array<std::array<double, 3>, 6> P2Basis::dlambda(const std::array<double, 3>& l) {
    std::array<std::array<double, 3>, 6> d{};
    for (int i = 0; i < 3; ++i) {
        d[i][i] = 4.0 * l[i] - 1.0;
    }
    for (int e = 0; e < 3; ++e) {
        const int a = e;
        const int b = (e + 1) % 3;
        d[3 + e][a] = 4.0 * l[b];
        d[3 + e][b] = 4.0 * l[a];
    }
    return d;
}

ElementGeometry::ElementGeometry(const Mesh& mesh, std::size_t t) {
    const auto& tri = mesh.triangles()[t];
    for (int i = 0; i < 3; ++i) {
        vertices[i] = mesh.nodes()[tri[i]];
    }
    const auto& [p0, p1, p2] = vertices;
    const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    area = 0.5 * det;
    grad_lambda[0] = {(p1.y - p2.y) / det, (p2.x - p1.x) / det};
    grad_lambda[1] = {(p2.y - p0.y) / det, (p0.x - p2.x) / det};
    grad_lambda[2] = {(p0.y - p1.y) / det, (p1.x - p0.x) / det};
}

Point ElementGeometry::map(const std::array<double, 3>& l) const {
    return {l[0] * vertices[0].x + l[1] * vertices[1].x + l[2] * vertices[2].x,
            l[0] * vertices[0].y + l[1] * vertices[1].y + l[2] * vertices[2].y};
}

FESpace::FESpace(std::shared_ptr<const Mesh> mesh, SpaceKind kind) : mesh_(std::move(mesh)), kind_(kind) {
    if (!mesh_) {
        throw FieldError("build_space: null mesh");
    }
    const auto& m = *mesh_;
    const int n_nodes = static_cast<int>(m.num_nodes());
    const int n_edges = static_cast<int>(m.num_edges());

    locations_.assign(m.nodes().begin(), m.nodes().end());
    if (kind_ == SpaceKind::P1Scalar) {
        dof_count_ = n_nodes;
        element_dofs_.reserve(3 * m.num_triangles());
        for (const auto& tri : m.triangles()) {
            element_dofs_.insert(element_dofs_.end(), tri.begin(), tri.end());
        }
        is_dirichlet_.assign(static_cast<std::size_t>(dof_count_), false);
        return;
    }

    const int scalar = n_nodes + n_edges;
    dof_count_ = 2 * scalar;
    for (const auto& e : m.edges()) {
        const auto& a = m.nodes()[e.first];
        const auto& b = m.nodes()[e.second];
        locations_.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
    }
    element_dofs_.reserve(12 * m.num_triangles());
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const auto& tri = m.triangles()[t];
        const auto& edges = m.triangle_edges(t);
        std::array<int, 6> local{tri[0], tri[1], tri[2], n_nodes + edges[0], n_nodes + edges[1], n_nodes + edges[2]};
        for (int c = 0; c < 2; ++c) {
            for (int s : local) {
                element_dofs_.push_back(c * scalar + s);
            }
        }
    }

    is_dirichlet_.assign(static_cast<std::size_t>(dof_count_), false);
    auto constrain = [&](int s) {
        is_dirichlet_[static_cast<std::size_t>(s)] = true;
        is_dirichlet_[static_cast<std::size_t>(s + scalar)] = true;
    };
    for (int i = 0; i < n_nodes; ++i) {
        if (m.is_boundary_node(static_cast<std::size_t>(i))) {
            constrain(i);
        }
    }
    for (int e = 0; e < n_edges; ++e) {
        if (m.is_boundary_edge(static_cast<std::size_t>(e))) {
            constrain(n_nodes + e);
        }
    }
    for (int d = 0; d < dof_count_; ++d) {
        if (is_dirichlet_[static_cast<std::size_t>(d)]) {
            dirichlet_.push_back(d);
        }
    }
}

SpacePtr build_space(std::shared_ptr<const Mesh> mesh, SpaceKind kind) {
    return std::make_shared<const FESpace>(std::move(mesh), kind);
}

Field::Field(SpacePtr s) : space(std::move(s)) {
    if (!space) {
        throw FieldError("Field: null space");
    }
    coeffs = Eigen::VectorXd::Zero(space->dof_count());
}

Field::Field(SpacePtr s, Eigen::VectorXd c) : space(std::move(s)), coeffs(std::move(c)) {
    if (!space) {
        throw FieldError("Field: null space");
    }
    if (coeffs.size() != space->dof_count()) {
        throw FieldError("Field: coefficient length " + std::to_string(coeffs.size()) +
                         " does not match space dof count " + std::to_string(space->dof_count()));
    }
}

namespace {

void require_same_space(const Field& a, const Field& b) {
    if (!a.same_space(b)) {
        throw FieldError("field arithmetic across different spaces");
    }
}

} // namespace

Field operator+(const Field& a, const Field& b) {
    require_same_space(a, b);
    return Field(a.space, a.coeffs + b.coeffs);
}

Field operator-(const Field& a, const Field& b) {
    require_same_space(a, b);
    return Field(a.space, a.coeffs - b.coeffs);
}

Field operator*(double s, const Field& a) { return Field(a.space, s * a.coeffs); }

Field interpolate(const SpacePtr& space, const VectorFunction& g, double t) {
    if (space->kind() != SpaceKind::P2Vector) {
        throw FieldError("interpolate: vector function on a scalar space");
    }
    Field f(space);
    const int scalar = space->scalar_count();
    for (int s = 0; s < scalar; ++s) {
        const Point p = space->scalar_location(s);
        const Vec2 v = g(p.x, p.y, t);
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
            throw FieldError("interpolate: non-finite sample at (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
        }
        f.coeffs[s] = v.x;
        f.coeffs[s + scalar] = v.y;
    }
    return f;
}

Field interpolate(const SpacePtr& space, const ScalarFunction& g, double t) {
    if (space->kind() != SpaceKind::P1Scalar) {
        throw FieldError("interpolate: scalar function on a vector space");
    }
    Field f(space);
    for (int s = 0; s < space->dof_count(); ++s) {
        const Point p = space->scalar_location(s);
        const double v = g(p.x, p.y, t);
        if (!std::isfinite(v)) {
            throw FieldError("interpolate: non-finite sample at (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
        }
        f.coeffs[s] = v;
    }
    return f;
}

namespace {

// Value and gradient of a field at one quadrature point, per component.
struct PointEval {
    std::array<double, 2> value{};
    std::array<Vec2, 2> grad{};
};

PointEval eval_p2(const Field& f, std::span<const int> dofs, const ElementGeometry& geo,
                  const std::array<double, 3>& l) {
    const auto phi = P2Basis::values(l);
    const auto dphi = P2Basis::dlambda(l);
    PointEval out;
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < 6; ++i) {
            const double coef = f.coeffs[dofs[c * 6 + i]];
            out.value[c] += coef * phi[i];
            for (int j = 0; j < 3; ++j) {
                out.grad[c].x += coef * dphi[i][j] * geo.grad_lambda[j].x;
                out.grad[c].y += coef * dphi[i][j] * geo.grad_lambda[j].y;
            }
        }
    }
    return out;
}

PointEval eval_p1(const Field& f, std::span<const int> dofs, const ElementGeometry& geo,
                  const std::array<double, 3>& l) {
    PointEval out;
    for (int i = 0; i < 3; ++i) {
        const double coef = f.coeffs[dofs[i]];
        out.value[0] += coef * l[i];
        out.grad[0].x += coef * geo.grad_lambda[i].x;
        out.grad[0].y += coef * geo.grad_lambda[i].y;
    }
    return out;
}

} // namespace

double norm(const Field& f, NormKind kind) {
    if (!f.space) {
        throw FieldError("norm: field has no space");
    }
    if (kind == NormKind::LinfNodal) {
        return f.coeffs.size() == 0 ? 0.0 : f.coeffs.cwiseAbs().maxCoeff();
    }
    const bool vector = f.space->kind() == SpaceKind::P2Vector;
    if (kind == NormKind::DivL2 && !vector) {
        throw FieldError("norm: divergence norm requires a vector field");
    }
    const auto& mesh = f.space->mesh();
    const auto& quad = quadrature7();
    double sum = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const ElementGeometry geo(mesh, t);
        const auto dofs = f.space->element_dofs(t);
        for (int q = 0; q < Quadrature::size; ++q) {
            const auto pe = vector ? eval_p2(f, dofs, geo, quad.bary[q]) : eval_p1(f, dofs, geo, quad.bary[q]);
            double integrand = 0.0;
            switch (kind) {
            case NormKind::L2:
                integrand = pe.value[0] * pe.value[0] + pe.value[1] * pe.value[1];
                break;
            case NormKind::H1Semi:
                for (const auto& g : pe.grad) {
                    integrand += g.x * g.x + g.y * g.y;
                }
                break;
            case NormKind::DivL2: {
                const double div = pe.grad[0].x + pe.grad[1].y;
                integrand = div * div;
                break;
            }
            case NormKind::LinfNodal:
                break;
            }
            sum += quad.weights[q] * 2.0 * geo.area * integrand;
        }
    }
    return std::sqrt(sum);
}

double l2_distance(const Field& f, const VectorFunction& exact, double t) {
    if (f.space->kind() != SpaceKind::P2Vector) {
        throw FieldError("l2_distance: vector field required");
    }
    const auto& mesh = f.space->mesh();
    const auto& quad = quadrature7();
    double sum = 0.0;
    for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
        const ElementGeometry geo(mesh, e);
        const auto dofs = f.space->element_dofs(e);
        for (int q = 0; q < Quadrature::size; ++q) {
            const auto pe = eval_p2(f, dofs, geo, quad.bary[q]);
            const Point p = geo.map(quad.bary[q]);
            const Vec2 u = exact(p.x, p.y, t);
            const double dx = pe.value[0] - u.x;
            const double dy = pe.value[1] - u.y;
            sum += quad.weights[q] * 2.0 * geo.area * (dx * dx + dy * dy);
        }
    }
    return std::sqrt(sum);
}

} // namespace pflow
