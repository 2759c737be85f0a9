#pragma once

#include "penaltyflow/fespace.hpp"

#include <Eigen/SparseCore>

#include <vector>

namespace pflow {

/// Compressed-row sparse operator. Always kept in compressed mode with sorted,
/// unique column indices per row.
using OperatorMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// Number of worker threads used for element loops: the PENALTYFLOW_THREADS
/// environment variable when set to a positive integer, else the hardware
/// concurrency (at least 1).
int assembly_threads();

/// Full element-coupling sparsity of a velocity space plus, for every element,
/// the value slot of each local (row, col) pair. All velocity operators are
/// assembled into this one pattern so that they can be combined entrywise.
class VelocityPattern {
public:
    explicit VelocityPattern(SpacePtr space);

    [[nodiscard]] const SpacePtr& space() const { return space_; }
    [[nodiscard]] const OperatorMatrix& skeleton() const { return skeleton_; }
    /// Value-array slots for element t, row-major 12x12.
    [[nodiscard]] const int* slots(std::size_t t) const { return slots_.data() + t * 144; }

    /// Zero matrix sharing the pattern.
    [[nodiscard]] OperatorMatrix zero_matrix() const { return skeleton_; }

private:
    SpacePtr space_;
    OperatorMatrix skeleton_;
    std::vector<int> slots_;
};

OperatorMatrix assemble_mass(const VelocityPattern& pattern);
OperatorMatrix assemble_stiffness(const VelocityPattern& pattern);
OperatorMatrix assemble_graddiv(const VelocityPattern& pattern);
/// Linearized skew-symmetrized convection: rows test v, columns trial w,
/// entries of (u*.grad w, v) + 1/2 (div u* w, v).
OperatorMatrix assemble_convection(const VelocityPattern& pattern, const Field& u_star);

/// Convenience overloads that build a fresh pattern for the space.
OperatorMatrix assemble_mass(const SpacePtr& V);
OperatorMatrix assemble_stiffness(const SpacePtr& V);
OperatorMatrix assemble_graddiv(const SpacePtr& V);
OperatorMatrix assemble_convection(const SpacePtr& V, const Field& u_star);

/// Load vector (f(., t), phi_i).
Eigen::VectorXd assemble_load(const SpacePtr& V, const VectorFunction& f, double t);

/// P1 mass matrix of a scalar space.
OperatorMatrix assemble_scalar_mass(const SpacePtr& Q);
/// Rectangular coupling B with B(q_i, v_j) = (div phi_j, q_i); rows P1, columns P2 vector.
OperatorMatrix assemble_divergence(const SpacePtr& Q, const SpacePtr& V);

/// Boundary values at the Dirichlet DOFs of V (zero elsewhere).
Eigen::VectorXd dirichlet_values(const FESpace& V, const VectorFunction& g, double t);

/// Row replacement plus column elimination. Constrained rows become identity
/// rows with rhs = the prescribed value; constrained columns of free rows are
/// zeroed and their contribution moved to the rhs. The sparsity pattern is kept
/// (eliminated entries stay as explicit zeros).
void apply_dirichlet(OperatorMatrix& system, Eigen::VectorXd& rhs, const FESpace& V, const Eigen::VectorXd& values);
void apply_dirichlet(OperatorMatrix& system, Eigen::VectorXd& rhs, const FESpace& V, const VectorFunction& g,
                     double t);

} // namespace pflow
