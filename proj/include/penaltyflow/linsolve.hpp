#pragma once

#include "penaltyflow/assembly.hpp"

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>

namespace pflow {

enum class SolverKind { Direct, Gmres };

struct SolverOptions {
    SolverKind kind = SolverKind::Direct;
    /// A solve succeeds when ||b - Ax|| <= tol ||b||, or when the normwise
    /// backward error ||b - Ax||_inf / (||A||_inf ||x||_inf + ||b||_inf) <= tol.
    /// The second form is needed when the 1/eps term makes ||A|| ||x|| much
    /// larger than ||b||: rounding x alone then leaves a residual above tol ||b||.
    double tol = 1e-10;
    int max_iterations = 2000;
    int restart = 60;
    /// Iterative-refinement sweeps after a direct solve.
    int refinement_sweeps = 4;
};

struct SolveReport {
    /// Krylov iterations, or -1 for a direct solve.
    int iterations = -1;
    /// ||b - Ax||_2, recomputed after the solve.
    double residual_norm = 0.0;
    double rhs_norm = 0.0;
    /// Normwise backward error in the infinity norm.
    double backward_error = 0.0;
    bool success = false;
    std::string message;

    [[nodiscard]] double relative_residual() const {
        return rhs_norm > 0.0 ? residual_norm / rhs_norm : residual_norm;
    }
};

/// ||b - Ax||_2 with extended-precision row accumulation.
double residual_norm(const OperatorMatrix& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b);

/// ||b - Ax||_inf / (||A||_inf ||x||_inf + ||b||_inf), residual in extended precision.
double backward_error(const OperatorMatrix& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b);

/// Computes r = b - A x for refinement, typically from an unassembled sum of
/// operators evaluated in extended precision.
using ResidualFunction = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;

/// Sparse solver for the square nonsymmetric step systems. The direct path
/// keeps its symbolic factorization while the sparsity pattern is unchanged.
class LinearSolver {
public:
    explicit LinearSolver(SolverOptions options = {});
    ~LinearSolver();
    LinearSolver(LinearSolver&&) noexcept;
    LinearSolver& operator=(LinearSolver&&) noexcept;

    [[nodiscard]] const SolverOptions& options() const { return options_; }

    /// Never throws on numerical failure; inspect the report. When `refine_against`
    /// is given, direct-solve refinement sweeps drive its residual down instead
    /// of the residual of A; the report always measures A.
    SolveReport solve(const OperatorMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                      const ResidualFunction& refine_against = {});

private:
    struct Impl;
    SolverOptions options_;
    std::unique_ptr<Impl> impl_;
};

/// One-shot solve with the default direct backend.
std::pair<Eigen::VectorXd, SolveReport> solve(const OperatorMatrix& A, const Eigen::VectorXd& b, double tol = 1e-10);

} // namespace pflow
