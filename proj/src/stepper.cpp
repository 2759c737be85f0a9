#include "penaltyflow/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pflow {

Field extrapolate(const Field& u_n, const Field& u_nm1, double tau) {
    if (!u_n.same_space(u_nm1)) {
        throw FieldError("extrapolate: fields live on different spaces");
    }
    return Field(u_n.space, (1.0 + tau) * u_n.coeffs - tau * u_nm1.coeffs);
}

Field compute_D2(const Field& u1, const Field& u_n, const Field& u_nm1, double k_np1, double k_n) {
    if (!u1.same_space(u_n) || !u1.same_space(u_nm1)) {
        throw FieldError("compute_D2: fields live on different spaces");
    }
    const double sum = k_n + k_np1;
    return Field(u1.space, (2.0 * k_n / sum) * u1.coeffs - 2.0 * u_n.coeffs + (2.0 * k_np1 / sum) * u_nm1.coeffs);
}

Field apply_time_filter(const Field& u1, const Field& d2, double alpha1) {
    if (!u1.same_space(d2)) {
        throw FieldError("apply_time_filter: fields live on different spaces");
    }
    return Field(u1.space, u1.coeffs - 0.5 * alpha1 * d2.coeffs);
}

double discrete_accel(const Field& u_np1, const Field& u_n, double k) {
    return norm((1.0 / k) * (u_np1 - u_n), NormKind::L2);
}

Field recover_pressure(const Field& u, double eps, const SpacePtr& Q) {
    const OperatorMatrix mq = assemble_scalar_mass(Q);
    const OperatorMatrix b = assemble_divergence(Q, u.space);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(mq);
    if (ldlt.info() != Eigen::Success) {
        throw std::runtime_error("recover_pressure: P1 mass factorization failed");
    }
    const Eigen::VectorXd rhs = (-1.0 / eps) * (b * u.coeffs);
    return Field(Q, ldlt.solve(rhs));
}

void StepInput::validate() const {
    if (u_n == nullptr || u_nm1 == nullptr) {
        throw std::invalid_argument("StepInput: u_n and u_nm1 are required");
    }
    if (!(k_np1 > 0.0) || !(k_n > 0.0)) {
        throw std::invalid_argument("StepInput: time steps must be positive");
    }
    if (!(eps_np1 > 0.0)) {
        throw std::invalid_argument("StepInput: penalty parameter must be positive");
    }
}

double EnergyBalance::residual() const { return new_energy - old_energy + increment + viscous + penalty - work; }

double EnergyBalance::largest_term() const {
    return std::max({std::abs(new_energy), std::abs(old_energy), std::abs(increment), std::abs(viscous),
                     std::abs(penalty), std::abs(work)});
}

double EnergyBalance::relative_residual() const {
    const double scale = largest_term();
    return scale > 0.0 ? std::abs(residual()) / scale : std::abs(residual());
}

PenaltyStepper::PenaltyStepper(SpacePtr velocity, Problem problem, SolverOptions solver, bool convection)
    : V_(std::move(velocity)),
      Q_(build_space(V_->mesh_ptr(), SpaceKind::P1Scalar)),
      problem_(std::move(problem)),
      convection_(convection),
      pattern_(V_),
      M_(assemble_mass(pattern_)),
      A_(assemble_stiffness(pattern_)),
      G_(assemble_graddiv(pattern_)),
      Mq_(assemble_scalar_mass(Q_)),
      B_(assemble_divergence(Q_, V_)),
      mq_solver_(Mq_),
      solver_(solver) {
    if (mq_solver_.info() != Eigen::Success) {
        throw std::runtime_error("PenaltyStepper: P1 mass factorization failed");
    }
}

StepResult PenaltyStepper::be_penalty_step(const StepInput& in) {
    in.validate();
    if (in.u_n->space != V_ || in.u_nm1->space != V_) {
        throw FieldError("be_penalty_step: input fields are not on the stepper's space");
    }
    OperatorMatrix system = pattern_.zero_matrix();
    double* s = system.valuePtr();
    const double* m = M_.valuePtr();
    const double* a = A_.valuePtr();
    const double* g = G_.valuePtr();
    const auto nnz = static_cast<std::size_t>(system.nonZeros());
    const double inv_k = 1.0 / in.k_np1;
    const double inv_eps = 1.0 / in.eps_np1;
    OperatorMatrix conv;
    const double* nv = nullptr;
    if (convection_) {
        const Field u_star = extrapolate(*in.u_n, *in.u_nm1, in.k_np1 / in.k_n);
        conv = assemble_convection(pattern_, u_star);
        nv = conv.valuePtr();
    }
    for (std::size_t i = 0; i < nnz; ++i) {
        s[i] = inv_k * m[i] + problem_.nu * a[i] + inv_eps * g[i] + (nv ? nv[i] : 0.0);
    }

    StepResult out;
    out.load = assemble_load(V_, problem_.force, in.t_np1);
    const Eigen::VectorXd b0 = inv_k * (M_ * in.u_n->coeffs) + out.load;
    const Eigen::VectorXd bc = dirichlet_values(*V_, problem_.boundary, in.t_np1);
    Eigen::VectorXd rhs = b0;
    apply_dirichlet(system, rhs, *V_, bc);

    // The composed entries round g/eps + m/k to double, which at small eps
    // discards most of m/k. Refining against the operator sum taken term by
    // term in long double solves the system the separate operators define.
    const int* outer = system.outerIndexPtr();
    const int* inner = system.innerIndexPtr();
    const long double lk = 1.0L / in.k_np1;
    const long double le = 1.0L / in.eps_np1;
    const long double lnu = problem_.nu;
    const ResidualFunction termwise = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        r.resize(x.size());
        for (Eigen::Index row = 0; row < x.size(); ++row) {
            if (V_->is_dirichlet(static_cast<int>(row))) {
                r[row] = bc[row] - x[row];
                continue;
            }
            long double acc = b0[row];
            for (int q = outer[row]; q < outer[row + 1]; ++q) {
                long double v = lk * m[q] + lnu * a[q] + le * g[q];
                if (nv) {
                    v += nv[q];
                }
                acc -= v * x[inner[q]];
            }
            r[row] = static_cast<double>(acc);
        }
    };

    Eigen::VectorXd x;
    out.report = solver_.solve(system, rhs, x, termwise);
    if (!out.report.success) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "linear solve failed at t=%.6g (eps=%.3e, k=%.3e): ", in.t_np1, in.eps_np1,
                      in.k_np1);
        throw SolverFailure(buf + out.report.message, out.report);
    }
    out.u1 = Field(V_, std::move(x));
    return out;
}

Field PenaltyStepper::recover_pressure(const Field& u, double eps) const {
    const Eigen::VectorXd rhs = (-1.0 / eps) * (B_ * u.coeffs);
    return Field(Q_, mq_solver_.solve(rhs));
}

Eigen::VectorXd PenaltyStepper::penalty_relation(const Field& u, const Field& p, double eps) const {
    return B_ * u.coeffs + eps * (Mq_ * p.coeffs);
}

EnergyBalance PenaltyStepper::energy_balance(const Field& u1, const Field& u_n, double k, double eps,
                                             const Eigen::VectorXd& load) const {
    const Eigen::VectorXd& x = u1.coeffs;
    const Eigen::VectorXd& y = u_n.coeffs;
    const Eigen::VectorXd d = x - y;
    EnergyBalance e;
    e.new_energy = 0.5 * x.dot(M_ * x);
    e.old_energy = 0.5 * y.dot(M_ * y);
    e.increment = 0.5 * d.dot(M_ * d);
    e.viscous = k * problem_.nu * x.dot(A_ * x);
    // Same operator the step solved, accumulated in long double.
    const int* outer = G_.outerIndexPtr();
    const int* inner = G_.innerIndexPtr();
    const double* g = G_.valuePtr();
    long double quad = 0.0L;
    for (Eigen::Index row = 0; row < G_.rows(); ++row) {
        long double gx = 0.0L;
        for (int q = outer[row]; q < outer[row + 1]; ++q) {
            gx += static_cast<long double>(g[q]) * x[inner[q]];
        }
        quad += gx * x[row];
    }
    e.penalty = static_cast<double>(static_cast<long double>(k) / eps * quad);
    e.work = k * load.dot(x);
    return e;
}

} // namespace pflow
