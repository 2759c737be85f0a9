#include "penaltyflow/assembly.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>

namespace pflow {

int assembly_threads() {
    if (const char* env = std::getenv("PENALTYFLOW_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) {
            return static_cast<int>(n);
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Computes element matrices in parallel in fixed-size batches, then scatters
// them sequentially in element order. The result is therefore bitwise
// independent of the thread count.
template <typename Compute, typename Scatter>
void element_loop(std::size_t num_elements, std::size_t local_size, Compute&& compute, Scatter&& scatter) {
    constexpr std::size_t batch = 2048;
    const auto threads = static_cast<std::size_t>(assembly_threads());
    std::vector<double> buffer(std::min(batch, num_elements) * local_size);
    for (std::size_t begin = 0; begin < num_elements; begin += batch) {
        const std::size_t end = std::min(num_elements, begin + batch);
        const std::size_t count = end - begin;
        auto work = [&](std::size_t lo, std::size_t hi) {
            for (std::size_t t = lo; t < hi; ++t) {
                double* out = buffer.data() + (t - begin) * local_size;
                std::fill(out, out + local_size, 0.0);
                compute(t, out);
            }
        };
        const std::size_t workers = std::min(threads, std::max<std::size_t>(1, count / 64));
        if (workers <= 1) {
            work(begin, end);
        } else {
            std::vector<std::jthread> pool;
            const std::size_t per = (count + workers - 1) / workers;
            for (std::size_t w = 0; w < workers; ++w) {
                const std::size_t lo = begin + w * per;
                const std::size_t hi = std::min(end, lo + per);
                if (lo < hi) {
                    pool.emplace_back(work, lo, hi);
                }
            }
        }
        for (std::size_t t = begin; t < end; ++t) {
            scatter(t, buffer.data() + (t - begin) * local_size);
        }
    }
}

void require_velocity(const FESpace& V, const char* who) {
    if (V.kind() != SpaceKind::P2Vector) {
        throw FieldError(std::string(who) + ": P2 vector space required");
    }
}

// Per-quadrature-point P2 data on one element.
struct P2Point {
    std::array<double, 6> phi{};
    std::array<Vec2, 6> grad{};
    double weight = 0.0; // includes the Jacobian
};

std::array<P2Point, Quadrature::size> p2_points(const ElementGeometry& geo) {
    const auto& quad = quadrature7();
    std::array<P2Point, Quadrature::size> pts;
    for (int q = 0; q < Quadrature::size; ++q) {
        auto& p = pts[q];
        p.phi = P2Basis::values(quad.bary[q]);
        const auto d = P2Basis::dlambda(quad.bary[q]);
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 3; ++j) {
                p.grad[i].x += d[i][j] * geo.grad_lambda[j].x;
                p.grad[i].y += d[i][j] * geo.grad_lambda[j].y;
            }
        }
        p.weight = quad.weights[q] * 2.0 * geo.area;
    }
    return pts;
}

// Writes a scalar 6x6 block into both diagonal component blocks of a 12x12 matrix.
void put_block_diagonal(const std::array<std::array<double, 6>, 6>& s, double* out) {
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) {
                out[(c * 6 + i) * 12 + c * 6 + j] = s[i][j];
            }
        }
    }
}

template <typename Local>
OperatorMatrix assemble_velocity(const VelocityPattern& pattern, Local&& local) {
    const auto& V = *pattern.space();
    OperatorMatrix out = pattern.zero_matrix();
    double* values = out.valuePtr();
    element_loop(
        V.mesh().num_triangles(), 144,
        [&](std::size_t t, double* lm) { local(ElementGeometry(V.mesh(), t), t, lm); },
        [&](std::size_t t, const double* lm) {
            const int* slots = pattern.slots(t);
            for (int k = 0; k < 144; ++k) {
                values[slots[k]] += lm[k];
            }
        });
    return out;
}

} // namespace

VelocityPattern::VelocityPattern(SpacePtr space) : space_(std::move(space)) {
    require_velocity(*space_, "VelocityPattern");
    const auto& V = *space_;
    const std::size_t nt = V.mesh().num_triangles();
    std::vector<Eigen::Triplet<double, int>> triplets;
    triplets.reserve(nt * 144);
    for (std::size_t t = 0; t < nt; ++t) {
        const auto dofs = V.element_dofs(t);
        for (int r : dofs) {
            for (int c : dofs) {
                triplets.emplace_back(r, c, 0.0);
            }
        }
    }
    skeleton_.resize(V.dof_count(), V.dof_count());
    skeleton_.setFromTriplets(triplets.begin(), triplets.end());
    skeleton_.makeCompressed();

    const int* outer = skeleton_.outerIndexPtr();
    const int* inner = skeleton_.innerIndexPtr();
    slots_.resize(nt * 144);
    for (std::size_t t = 0; t < nt; ++t) {
        const auto dofs = V.element_dofs(t);
        for (int i = 0; i < 12; ++i) {
            const int* row_begin = inner + outer[dofs[i]];
            const int* row_end = inner + outer[dofs[i] + 1];
            for (int j = 0; j < 12; ++j) {
                const int* pos = std::lower_bound(row_begin, row_end, dofs[j]);
                slots_[t * 144 + i * 12 + j] = static_cast<int>(pos - inner);
            }
        }
    }
}

OperatorMatrix assemble_mass(const VelocityPattern& pattern) {
    return assemble_velocity(pattern, [](const ElementGeometry& geo, std::size_t, double* lm) {
        const auto pts = p2_points(geo);
        std::array<std::array<double, 6>, 6> s{};
        for (const auto& p : pts) {
            for (int i = 0; i < 6; ++i) {
                for (int j = 0; j < 6; ++j) {
                    s[i][j] += p.weight * p.phi[i] * p.phi[j];
                }
            }
        }
        put_block_diagonal(s, lm);
    });
}

OperatorMatrix assemble_stiffness(const VelocityPattern& pattern) {
    return assemble_velocity(pattern, [](const ElementGeometry& geo, std::size_t, double* lm) {
        const auto pts = p2_points(geo);
        std::array<std::array<double, 6>, 6> s{};
        for (const auto& p : pts) {
            for (int i = 0; i < 6; ++i) {
                for (int j = 0; j < 6; ++j) {
                    s[i][j] += p.weight * (p.grad[i].x * p.grad[j].x + p.grad[i].y * p.grad[j].y);
                }
            }
        }
        put_block_diagonal(s, lm);
    });
}

OperatorMatrix assemble_graddiv(const VelocityPattern& pattern) {
    return assemble_velocity(pattern, [](const ElementGeometry& geo, std::size_t, double* lm) {
        const auto pts = p2_points(geo);
        for (const auto& p : pts) {
            // div of phi_i e_c is the c-th partial of phi_i.
            std::array<double, 12> div{};
            for (int i = 0; i < 6; ++i) {
                div[i] = p.grad[i].x;
                div[6 + i] = p.grad[i].y;
            }
            for (int a = 0; a < 12; ++a) {
                for (int b = 0; b < 12; ++b) {
                    lm[a * 12 + b] += p.weight * div[a] * div[b];
                }
            }
        }
    });
}

OperatorMatrix assemble_convection(const VelocityPattern& pattern, const Field& u_star) {
    if (u_star.space != pattern.space()) {
        throw FieldError("assemble_convection: u_star is not in the pattern's space");
    }
    const auto& V = *pattern.space();
    return assemble_velocity(pattern, [&](const ElementGeometry& geo, std::size_t t, double* lm) {
        const auto pts = p2_points(geo);
        const auto dofs = V.element_dofs(t);
        std::array<std::array<double, 6>, 6> s{};
        for (const auto& p : pts) {
            Vec2 w{};
            double div = 0.0;
            for (int i = 0; i < 6; ++i) {
                const double ux = u_star.coeffs[dofs[i]];
                const double uy = u_star.coeffs[dofs[6 + i]];
                w.x += ux * p.phi[i];
                w.y += uy * p.phi[i];
                div += ux * p.grad[i].x + uy * p.grad[i].y;
            }
            for (int i = 0; i < 6; ++i) {
                for (int j = 0; j < 6; ++j) {
                    const double adv = w.x * p.grad[j].x + w.y * p.grad[j].y;
                    s[i][j] += p.weight * (adv + 0.5 * div * p.phi[j]) * p.phi[i];
                }
            }
        }
        put_block_diagonal(s, lm);
    });
}

OperatorMatrix assemble_mass(const SpacePtr& V) { return assemble_mass(VelocityPattern(V)); }
OperatorMatrix assemble_stiffness(const SpacePtr& V) { return assemble_stiffness(VelocityPattern(V)); }
OperatorMatrix assemble_graddiv(const SpacePtr& V) { return assemble_graddiv(VelocityPattern(V)); }
OperatorMatrix assemble_convection(const SpacePtr& V, const Field& u_star) {
    return assemble_convection(VelocityPattern(V), u_star);
}

Eigen::VectorXd assemble_load(const SpacePtr& V, const VectorFunction& f, double t) {
    require_velocity(*V, "assemble_load");
    Eigen::VectorXd load = Eigen::VectorXd::Zero(V->dof_count());
    const auto& quad = quadrature7();
    element_loop(
        V->mesh().num_triangles(), 12,
        [&](std::size_t e, double* lv) {
            const ElementGeometry geo(V->mesh(), e);
            for (int q = 0; q < Quadrature::size; ++q) {
                const auto phi = P2Basis::values(quad.bary[q]);
                const Point x = geo.map(quad.bary[q]);
                const Vec2 fv = f(x.x, x.y, t);
                const double w = quad.weights[q] * 2.0 * geo.area;
                for (int i = 0; i < 6; ++i) {
                    lv[i] += w * fv.x * phi[i];
                    lv[6 + i] += w * fv.y * phi[i];
                }
            }
        },
        [&](std::size_t e, const double* lv) {
            const auto dofs = V->element_dofs(e);
            for (int i = 0; i < 12; ++i) {
                load[dofs[i]] += lv[i];
            }
        });
    return load;
}

OperatorMatrix assemble_scalar_mass(const SpacePtr& Q) {
    if (Q->kind() != SpaceKind::P1Scalar) {
        throw FieldError("assemble_scalar_mass: P1 scalar space required");
    }
    const auto& mesh = Q->mesh();
    const auto& quad = quadrature7();
    std::vector<Eigen::Triplet<double, int>> triplets;
    triplets.reserve(9 * mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const ElementGeometry geo(mesh, t);
        const auto dofs = Q->element_dofs(t);
        std::array<std::array<double, 3>, 3> s{};
        for (int q = 0; q < Quadrature::size; ++q) {
            const auto& l = quad.bary[q];
            const double w = quad.weights[q] * 2.0 * geo.area;
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    s[i][j] += w * l[i] * l[j];
                }
            }
        }
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                triplets.emplace_back(dofs[i], dofs[j], s[i][j]);
            }
        }
    }
    OperatorMatrix m(Q->dof_count(), Q->dof_count());
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

OperatorMatrix assemble_divergence(const SpacePtr& Q, const SpacePtr& V) {
    if (Q->kind() != SpaceKind::P1Scalar) {
        throw FieldError("assemble_divergence: P1 scalar test space required");
    }
    require_velocity(*V, "assemble_divergence");
    if (Q->mesh_ptr() != V->mesh_ptr()) {
        throw FieldError("assemble_divergence: spaces live on different meshes");
    }
    const auto& mesh = V->mesh();
    const auto& quad = quadrature7();
    std::vector<Eigen::Triplet<double, int>> triplets;
    triplets.reserve(36 * mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const ElementGeometry geo(mesh, t);
        const auto pts = p2_points(geo);
        const auto qd = Q->element_dofs(t);
        const auto vd = V->element_dofs(t);
        std::array<std::array<double, 12>, 3> s{};
        for (int q = 0; q < Quadrature::size; ++q) {
            const auto& l = quad.bary[q];
            const auto& p = pts[q];
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 6; ++j) {
                    s[i][j] += p.weight * l[i] * p.grad[j].x;
                    s[i][6 + j] += p.weight * l[i] * p.grad[j].y;
                }
            }
        }
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 12; ++j) {
                triplets.emplace_back(qd[i], vd[j], s[i][j]);
            }
        }
    }
    OperatorMatrix b(Q->dof_count(), V->dof_count());
    b.setFromTriplets(triplets.begin(), triplets.end());
    b.makeCompressed();
    return b;
}

Eigen::VectorXd dirichlet_values(const FESpace& V, const VectorFunction& g, double t) {
    require_velocity(V, "dirichlet_values");
    Eigen::VectorXd values = Eigen::VectorXd::Zero(V.dof_count());
    const int scalar = V.scalar_count();
    for (int d : V.dirichlet_dofs()) {
        if (d >= scalar) {
            continue;
        }
        const Point p = V.scalar_location(d);
        const Vec2 v = g(p.x, p.y, t);
        values[d] = v.x;
        values[d + scalar] = v.y;
    }
    return values;
}

void apply_dirichlet(OperatorMatrix& system, Eigen::VectorXd& rhs, const FESpace& V, const Eigen::VectorXd& values) {
    if (system.rows() != V.dof_count() || system.cols() != V.dof_count() || rhs.size() != V.dof_count() ||
        values.size() != V.dof_count()) {
        throw FieldError("apply_dirichlet: dimension mismatch");
    }
    if (!system.isCompressed()) {
        system.makeCompressed();
    }
    const int* outer = system.outerIndexPtr();
    const int* inner = system.innerIndexPtr();
    double* vals = system.valuePtr();
    for (int r = 0; r < V.dof_count(); ++r) {
        if (V.is_dirichlet(r)) {
            for (int k = outer[r]; k < outer[r + 1]; ++k) {
                vals[k] = inner[k] == r ? 1.0 : 0.0;
            }
            rhs[r] = values[r];
            continue;
        }
        for (int k = outer[r]; k < outer[r + 1]; ++k) {
            const int c = inner[k];
            if (V.is_dirichlet(c)) {
                rhs[r] -= vals[k] * values[c];
                vals[k] = 0.0;
            }
        }
    }
}

void apply_dirichlet(OperatorMatrix& system, Eigen::VectorXd& rhs, const FESpace& V, const VectorFunction& g,
                     double t) {
    apply_dirichlet(system, rhs, V, dirichlet_values(V, g, t));
}

} // namespace pflow
