#pragma once

#include "penaltyflow/assembly.hpp"
#include "penaltyflow/linsolve.hpp"
#include "penaltyflow/problems.hpp"

#include <Eigen/SparseCholesky>

#include <memory>

namespace pflow {

/// u* = (1 + tau) u_n - tau u_{n-1}, tau = k_{n+1}/k_n.
Field extrapolate(const Field& u_n, const Field& u_nm1, double tau);

/// D2(n+1) = 2k_n/(k_n+k_{n+1}) u1 - 2 u_n + 2k_{n+1}/(k_n+k_{n+1}) u_{n-1}.
Field compute_D2(const Field& u1, const Field& u_n, const Field& u_nm1, double k_np1, double k_n);

/// u = u1 - (alpha1/2) D2.
Field apply_time_filter(const Field& u1, const Field& d2, double alpha1);

/// ||(u_{n+1} - u_n)/k||_{L2}.
double discrete_accel(const Field& u_np1, const Field& u_n, double k);

/// L2 projection of -(1/eps) div u onto the P1 space Q.
Field recover_pressure(const Field& u, double eps, const SpacePtr& Q);

struct StepInput {
    const Field* u_n = nullptr;
    const Field* u_nm1 = nullptr;
    double k_np1 = 0.0;
    double k_n = 0.0;
    double eps_np1 = 0.0;
    double t_np1 = 0.0;

    /// Throws std::invalid_argument unless steps and penalty are positive and fields are set.
    void validate() const;
};

struct StepResult {
    Field u1;
    SolveReport report;
    /// Load vector F(t_{n+1}) used on the right-hand side.
    Eigen::VectorXd load;
};

/// Terms of the discrete energy identity for one unfiltered step:
/// 1/2|u1|^2 - 1/2|u_n|^2 + 1/2|u1-u_n|^2 + k nu|grad u1|^2 + k/eps|div u1|^2 - k(f,u1) = 0.
struct EnergyBalance {
    double new_energy = 0.0;
    double old_energy = 0.0;
    double increment = 0.0;
    double viscous = 0.0;
    double penalty = 0.0;
    double work = 0.0;

    [[nodiscard]] double residual() const;
    [[nodiscard]] double largest_term() const;
    [[nodiscard]] double relative_residual() const;
};

/// Raised when a step's linear solve fails its residual contract.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, SolveReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    [[nodiscard]] const SolveReport& report() const { return report_; }

private:
    SolveReport report_;
};

/// Backward-Euler penalty step with linearly extrapolated, skew-symmetrized
/// convection. The mass, stiffness and grad-div operators are assembled once;
/// nu, 1/eps and 1/k enter only when the step matrix is composed.
class PenaltyStepper {
public:
    PenaltyStepper(SpacePtr velocity, Problem problem, SolverOptions solver = {}, bool convection = true);

    [[nodiscard]] const SpacePtr& velocity_space() const { return V_; }
    [[nodiscard]] const SpacePtr& pressure_space() const { return Q_; }
    [[nodiscard]] const Problem& problem() const { return problem_; }
    [[nodiscard]] const OperatorMatrix& mass() const { return M_; }
    [[nodiscard]] const OperatorMatrix& stiffness() const { return A_; }
    [[nodiscard]] const OperatorMatrix& graddiv() const { return G_; }

    /// Solves (M/k + N(u*) + nu A + G/eps) u1 = M u_n / k + F(t_{n+1}) with the
    /// problem's boundary values at t_{n+1}. Throws SolverFailure if the solve
    /// misses its tolerance.
    StepResult be_penalty_step(const StepInput& in);

    /// Pressure recovery with the cached P1 mass factorization.
    [[nodiscard]] Field recover_pressure(const Field& u, double eps) const;

    /// (div u + eps p, q_i) for every P1 basis function q_i.
    [[nodiscard]] Eigen::VectorXd penalty_relation(const Field& u, const Field& p, double eps) const;

    [[nodiscard]] EnergyBalance energy_balance(const Field& u1, const Field& u_n, double k, double eps,
                                               const Eigen::VectorXd& load) const;

private:
    SpacePtr V_;
    SpacePtr Q_;
    Problem problem_;
    bool convection_;
    VelocityPattern pattern_;
    OperatorMatrix M_;
    OperatorMatrix A_;
    OperatorMatrix G_;
    OperatorMatrix Mq_;
    OperatorMatrix B_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> mq_solver_;
    LinearSolver solver_;
};

} // namespace pflow
