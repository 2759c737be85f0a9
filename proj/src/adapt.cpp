#include "penaltyflow/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pflow {

void Tolerances::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid tolerances: " + what); };
    if (!(min_tol > 0.0 && min_tol < tol)) {
        fail("require 0 < min_tol < tol");
    }
    if (!(min_ttol > 0.0 && min_ttol < ttol)) {
        fail("require 0 < min_ttol < ttol");
    }
    if (!(eps_min > 0.0 && eps_min < eps_max)) {
        fail("require 0 < eps_min < eps_max");
    }
    if (!(alpha >= 0.0)) {
        fail("require alpha >= 0");
    }
    if (!(safety > 0.0 && safety <= 1.0)) {
        fail("require 0 < safety <= 1");
    }
    if (max_rejects < 0) {
        fail("require max_rejects >= 0");
    }
}

EpsilonEstimate est_epsilon(const Field& u) {
    const double grad = norm(u, NormKind::H1Semi);
    if (!(grad > 0.0)) {
        return {0.0, true};
    }
    return {norm(u, NormKind::DivL2) / grad, false};
}

FilterCoefficients alpha_coeffs(double tau_n, double tau_np1) {
    const double t = tau_np1;
    const double s = tau_n;
    FilterCoefficients c;
    c.alpha1 = t * (1.0 + t) / (1.0 + 2.0 * t);
    c.alpha2 = s * (t * s + s + 1.0) * (4.0 * t * t * t + 5.0 * t * t + t) /
               (3.0 * (s * t * t + 4.0 * s * t + 2.0 * t + s + 1.0));
    return c;
}

double est_time_first(double d2_norm, double alpha1) { return 0.5 * alpha1 * d2_norm; }

double est_time_first(const Field& d2, double alpha1) { return est_time_first(norm(d2, NormKind::L2), alpha1); }

double est_time_second(const Field& d2_np1, const Field& d2_n, double k_np1, double k_n, double k_nm1,
                       double alpha2) {
    const double sum = k_np1 + k_n + k_nm1;
    const Field combo = (3.0 * k_nm1 / sum) * d2_np1 - (3.0 * k_np1 / sum) * d2_n;
    return alpha2 / 6.0 * norm(combo, NormKind::L2);
}

double est_time_second(double d2_np1, double d2_n, double k_np1, double k_n, double k_nm1, double alpha2) {
    const double sum = k_np1 + k_n + k_nm1;
    return alpha2 / 6.0 * std::abs(3.0 * k_nm1 / sum * d2_np1 - 3.0 * k_np1 / sum * d2_n);
}

double guard_epsilon(double eps_old, double eps_new, double k, double alpha) {
    const double ka = k * alpha;
    if (ka >= 1.0) {
        return eps_new;
    }
    return std::max(eps_new, (1.0 - ka) * eps_old);
}

EpsilonDecision adapt_epsilon(const ControllerState& state, const Tolerances& tol, double est, double k, bool guard) {
    const double eps = state.eps_np1;
    EpsilonDecision d;
    if (est > tol.tol) {
        double next = std::max({(1.0 - tol.alpha * k) * eps, 0.5 * eps, tol.eps_min});
        if (guard) {
            next = guard_epsilon(state.eps_n, next, k, tol.alpha);
        }
        next = std::clamp(next, tol.eps_min, tol.eps_max);
        if (eps <= tol.eps_min || next >= eps) {
            // Nothing left to decrease: continue with the current penalty.
            d.verdict = Verdict::Accept;
            d.eps_next = eps;
            return d;
        }
        if (state.reject_count >= tol.max_rejects) {
            d.verdict = Verdict::Accept;
            d.eps_next = eps;
            d.forced = true;
            return d;
        }
        d.verdict = Verdict::Reject;
        d.eps_next = next;
        return d;
    }
    d.verdict = Verdict::Accept;
    d.eps_next = est <= tol.min_tol ? std::min(2.0 * eps, tol.eps_max) : eps;
    return d;
}

double propose_step(int order, double test, double k_current, double k_prev, const Tolerances& tol,
                    StepPhase phase) {
    if (order != 1 && order != 2) {
        throw std::invalid_argument("propose_step: order must be 1 or 2");
    }
    const double factor = test > 0.0 ? tol.safety * std::pow(tol.ttol / test, 1.0 / (order + 1)) : 2.0;
    if (phase == StepPhase::Grow) {
        return std::clamp(factor * k_current, 0.5 * k_current, 2.0 * k_current);
    }
    // The estimate was measured at k_current, so the retry scales from it.
    const double k = std::max(factor * k_current, 0.5 * k_current);
    return std::clamp(k, 0.5 * k_prev, 2.0 * k_prev);
}

OrderChoice vsvo_select(double step1, double step2) {
    OrderChoice c;
    if (step1 > step2) {
        c.order = 1;
        c.use_filtered = false;
        c.k_next = step1;
    } else {
        c.order = 2;
        c.use_filtered = true;
        c.k_next = step2;
    }
    return c;
}

Decision decide(Algorithm algorithm, const Estimates& est, const ControllerState& state, const Tolerances& tol,
                bool guard, bool filter_ready) {
    const double k = state.k_np1;
    const double k_prev = state.k_n;
    const bool capped = state.reject_count >= tol.max_rejects;

    Decision d;
    d.k_next = k;
    bool time_reject = false;
    double k_retry = k;

    // Single-estimator time control shared by the first- and second-order methods.
    auto single_order = [&](int order, double test) {
        if (test > tol.ttol) {
            time_reject = true;
            k_retry = propose_step(order, test, k, k_prev, tol, StepPhase::Reject);
        } else if (test < tol.min_ttol) {
            d.k_next = propose_step(order, test, k, k_prev, tol, StepPhase::Grow);
        }
    };

    if (!est.time_ready) {
        d.order_used = 1;
        d.use_filtered = false;
    } else {
        switch (algorithm) {
        case Algorithm::ConstantStep:
            d.order_used = 2;
            d.use_filtered = filter_ready;
            break;
        case Algorithm::FirstOrder:
            d.order_used = 1;
            d.use_filtered = false;
            single_order(1, est.test1);
            break;
        case Algorithm::SecondOrder:
            d.order_used = 2;
            d.use_filtered = filter_ready;
            if (est.test2) {
                single_order(2, *est.test2);
            } else {
                single_order(1, est.test1);
            }
            break;
        case Algorithm::Vsvo:
            if (!est.test2) {
                d.order_used = 1;
                d.use_filtered = false;
                single_order(1, est.test1);
                break;
            }
            if (std::min(est.test1, *est.test2) > tol.ttol) {
                time_reject = true;
                k_retry = std::max(propose_step(1, est.test1, k, k_prev, tol, StepPhase::Reject),
                                   propose_step(2, *est.test2, k, k_prev, tol, StepPhase::Reject));
            }
            {
                const double step1 = propose_step(1, est.test1, k, k_prev, tol, StepPhase::Grow);
                const double step2 = propose_step(2, *est.test2, k, k_prev, tol, StepPhase::Grow);
                const auto choice = vsvo_select(step1, step2);
                d.order_used = choice.order;
                d.use_filtered = choice.use_filtered && filter_ready;
                if (std::min(est.test1, *est.test2) < tol.min_ttol) {
                    d.k_next = choice.k_next;
                }
            }
            break;
        }
    }

    const double k_for_eps = time_reject ? k_retry : k;
    const auto eps_decision = adapt_epsilon(state, tol, est.est_e, k_for_eps, guard);
    const bool eps_reject = eps_decision.verdict == Verdict::Reject;

    // A retry the step window cannot shorten would repeat the same attempt.
    const bool blocked = time_reject && !(k_retry < k);
    if (blocked) {
        time_reject = false;
    }

    if ((eps_reject || time_reject) && !capped) {
        d.verdict = Verdict::Reject;
        d.eps_next = eps_reject ? eps_decision.eps_next : state.eps_np1;
        d.k_next = k_retry;
        return d;
    }
    d.verdict = Verdict::Accept;
    d.forced = blocked || eps_decision.forced || (capped && time_reject);
    d.eps_next = eps_decision.eps_next;
    return d;
}

} // namespace pflow
