#include "penaltyflow/linsolve.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/UmfPackSupport>
#include <unsupported/Eigen/IterativeSolvers>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace pflow {

double residual_norm(const OperatorMatrix& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
    long double sum = 0.0L;
    for (int r = 0; r < A.outerSize(); ++r) {
        long double acc = b[r];
        for (OperatorMatrix::InnerIterator it(A, r); it; ++it) {
            acc -= static_cast<long double>(it.value()) * static_cast<long double>(x[it.col()]);
        }
        sum += acc * acc;
    }
    return static_cast<double>(std::sqrt(sum));
}

namespace {

Eigen::VectorXd residual_vector(const OperatorMatrix& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b);

} // namespace

double backward_error(const OperatorMatrix& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
    double a_norm = 0.0;
    for (int r = 0; r < A.outerSize(); ++r) {
        double row = 0.0;
        for (OperatorMatrix::InnerIterator it(A, r); it; ++it) {
            row += std::abs(it.value());
        }
        a_norm = std::max(a_norm, row);
    }
    const double r_norm = residual_vector(A, x, b).lpNorm<Eigen::Infinity>();
    const double denom = a_norm * x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>();
    return denom > 0.0 ? r_norm / denom : r_norm;
}

namespace {

Eigen::VectorXd residual_vector(const OperatorMatrix& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
    Eigen::VectorXd r(b.size());
    for (int row = 0; row < A.outerSize(); ++row) {
        long double acc = b[row];
        for (OperatorMatrix::InnerIterator it(A, row); it; ++it) {
            acc -= static_cast<long double>(it.value()) * static_cast<long double>(x[it.col()]);
        }
        r[row] = static_cast<double>(acc);
    }
    return r;
}

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

} // namespace

struct LinearSolver::Impl {
    Eigen::UmfPackLU<ColMatrix> lu;
    std::vector<int> outer;
    std::vector<int> inner;
    bool analyzed = false;

    bool same_pattern(const ColMatrix& m) const {
        if (!analyzed || outer.size() != static_cast<std::size_t>(m.outerSize() + 1) ||
            inner.size() != static_cast<std::size_t>(m.nonZeros())) {
            return false;
        }
        return std::equal(outer.begin(), outer.end(), m.outerIndexPtr()) &&
               std::equal(inner.begin(), inner.end(), m.innerIndexPtr());
    }

    void remember_pattern(const ColMatrix& m) {
        outer.assign(m.outerIndexPtr(), m.outerIndexPtr() + m.outerSize() + 1);
        inner.assign(m.innerIndexPtr(), m.innerIndexPtr() + m.nonZeros());
        analyzed = true;
    }
};

LinearSolver::LinearSolver(SolverOptions options) : options_(options), impl_(std::make_unique<Impl>()) {}
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

SolveReport LinearSolver::solve(const OperatorMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                                const ResidualFunction& refine_against) {
    SolveReport report;
    report.rhs_norm = b.norm();
    if (A.rows() != A.cols() || A.rows() != b.size()) {
        report.message = "dimension mismatch";
        report.residual_norm = report.rhs_norm;
        return report;
    }
    const double target = options_.tol * report.rhs_norm;

    if (options_.kind == SolverKind::Direct) {
        report.iterations = -1;
        ColMatrix col(A);
        col.makeCompressed();
        if (!impl_->same_pattern(col)) {
            impl_->lu.analyzePattern(col);
            impl_->remember_pattern(col);
        }
        impl_->lu.factorize(col);
        if (impl_->lu.info() != Eigen::Success) {
            report.message = "sparse LU factorization failed (singular or ill-posed system)";
            x = Eigen::VectorXd::Zero(b.size());
            report.residual_norm = residual_norm(A, x, b);
            return report;
        }
        x = impl_->lu.solve(b);
        Eigen::VectorXd r(b.size());
        for (int sweep = 0; sweep < options_.refinement_sweeps && x.allFinite(); ++sweep) {
            if (refine_against) {
                refine_against(x, r);
            } else {
                r = residual_vector(A, x, b);
                if (r.norm() <= target) {
                    break;
                }
            }
            const Eigen::VectorXd dx = impl_->lu.solve(r);
            x += dx;
            if (refine_against && dx.lpNorm<Eigen::Infinity>() <= 1e-17 * x.lpNorm<Eigen::Infinity>()) {
                break;
            }
        }
    } else {
        Eigen::GMRES<OperatorMatrix, Eigen::IncompleteLUT<double, int>> gmres;
        gmres.setTolerance(options_.tol);
        gmres.setMaxIterations(options_.max_iterations);
        gmres.set_restart(options_.restart);
        gmres.compute(A);
        if (gmres.info() != Eigen::Success) {
            report.message = "incomplete LU preconditioner failed";
            x = Eigen::VectorXd::Zero(b.size());
            report.residual_norm = residual_norm(A, x, b);
            return report;
        }
        if (x.size() != b.size()) {
            x = Eigen::VectorXd::Zero(b.size());
        }
        x = gmres.solveWithGuess(b, x);
        report.iterations = static_cast<int>(gmres.iterations());
    }

    if (!x.allFinite()) {
        report.message = "solution contains non-finite values";
        report.residual_norm = std::numeric_limits<double>::infinity();
        return report;
    }
    report.residual_norm = residual_norm(A, x, b);
    report.backward_error = backward_error(A, x, b);
    report.success = report.residual_norm <= target || report.backward_error <= options_.tol;
    if (!report.success) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "relative residual %.3e and backward error %.3e exceed tolerance %.3e",
                      report.relative_residual(), report.backward_error, options_.tol);
        report.message = buf;
    }
    return report;
}

std::pair<Eigen::VectorXd, SolveReport> solve(const OperatorMatrix& A, const Eigen::VectorXd& b, double tol) {
    SolverOptions opts;
    opts.tol = tol;
    LinearSolver solver(opts);
    Eigen::VectorXd x;
    auto report = solver.solve(A, b, x);
    return {std::move(x), std::move(report)};
}

} // namespace pflow
