#pragma once

#include "penaltyflow/fespace.hpp"

#include <optional>

namespace pflow {

/// Controller tolerances. Defaults are the published doubly adaptive settings.
struct Tolerances {
    double tol = 1e-6;      ///< upper tolerance on the relative divergence residual
    double min_tol = 1e-7;  ///< lower tolerance (epsilon may grow below it)
    double ttol = 1e-5;     ///< upper tolerance on the time-error estimate
    double min_ttol = 1e-6; ///< lower tolerance (k may grow below it)
    double eps_min = 1e-8;
    double eps_max = 1e-5;
    double alpha = 2.0;  ///< stability-guard constant
    double safety = 0.9; ///< step safety factor
    int max_rejects = 10;

    /// Throws std::invalid_argument naming the first violated invariant.
    void validate() const;
};

enum class Algorithm { ConstantStep, FirstOrder, SecondOrder, Vsvo };
enum class Verdict { Accept, Reject };
enum class StepPhase { Reject, Grow };

struct EpsilonEstimate {
    double value = 0.0;
    /// Set when ||grad u|| vanishes; value is then 0.
    bool degenerate = false;
};

/// ||div u|| / ||grad u||.
EpsilonEstimate est_epsilon(const Field& u);

struct FilterCoefficients {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
};

/// alpha1 depends on tau_np1 = k_{n+1}/k_n only; alpha2 also on tau_n = k_n/k_{n-1}.
FilterCoefficients alpha_coeffs(double tau_n, double tau_np1);

/// First-order LTE estimate (alpha1/2)||D2(n+1)||.
double est_time_first(const Field& d2, double alpha1);
double est_time_first(double d2_norm, double alpha1);

/// Second-order LTE estimate from the two most recent differences.
double est_time_second(const Field& d2_np1, const Field& d2_n, double k_np1, double k_n, double k_nm1,
                       double alpha2);
/// Scalar form on single coefficients (absolute value in place of the norm).
double est_time_second(double d2_np1, double d2_n, double k_np1, double k_n, double k_nm1, double alpha2);

/// Stability guard (1 - k alpha) eps_old <= eps_new; vacuous when k alpha >= 1.
double guard_epsilon(double eps_old, double eps_new, double k, double alpha);

/// State of one adaptive run at the current time level.
struct ControllerState {
    double t = 0.0;       ///< time of the last accepted level
    double k_n = 0.0;     ///< last accepted step
    double k_nm1 = 0.0;   ///< step before that
    double k_np1 = 0.0;   ///< step being attempted
    double eps_n = 0.0;   ///< penalty of the last accepted step
    double eps_np1 = 0.0; ///< penalty being attempted
    int reject_count = 0; ///< rejections at the current level
};

struct EpsilonDecision {
    Verdict verdict = Verdict::Accept;
    double eps_next = 0.0;
    /// Accepted only because the rejection cap was reached.
    bool forced = false;
};

/// Epsilon decision tree for one attempt. On reject, eps_next is the retry
/// value max{(1 - alpha k) eps, eps/2, eps_min}, additionally floored by the
/// guard relative to the last accepted penalty when `guard` is on. A reject
/// that cannot lower epsilon any further is turned into an accept. On accept,
/// eps_next is the penalty for the next step (doubled below min_tol).
EpsilonDecision adapt_epsilon(const ControllerState& state, const Tolerances& tol, double est, double k,
                              bool guard = true);

/// Next-step proposal k_current (tTOL/tEST)^{1/(order+1)} times the safety factor.
/// Grow: kept within [k_current/2, 2 k_current]. Reject: floored at k_current/2
/// and kept within [k_prev/2, 2 k_prev] of the last accepted step. tEST = 0
/// yields a doubling.
double propose_step(int order, double test, double k_current, double k_prev, const Tolerances& tol, StepPhase phase);

struct OrderChoice {
    int order = 2;
    bool use_filtered = true;
    double k_next = 0.0;
};

/// Picks the order whose proposal is larger; ties go to order 2.
OrderChoice vsvo_select(double step1, double step2);

/// Time and penalty estimators of one attempt.
struct Estimates {
    double est_e = 0.0;
    double test1 = 0.0;
    /// Absent until two differences are available.
    std::optional<double> test2;
    /// False while the back history is synthetic: D2 is then a multiple of the
    /// new solution rather than a difference, so k is kept and only eps is controlled.
    bool time_ready = true;
};

struct Decision {
    Verdict verdict = Verdict::Accept;
    double eps_next = 0.0;
    double k_next = 0.0;
    int order_used = 2;
    /// Whether the accepted level keeps the filtered solution.
    bool use_filtered = true;
    bool forced = false;
};

/// Full decision tree for one attempt of the chosen algorithm. `filter_ready`
/// is false while the back history is synthetic (no filter on that step).
Decision decide(Algorithm algorithm, const Estimates& est, const ControllerState& state, const Tolerances& tol,
                bool guard, bool filter_ready = true);

} // namespace pflow
