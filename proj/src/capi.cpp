#include "penaltyflow/penaltyflow.h"

#include "penaltyflow/driver.hpp"
#include "penaltyflow/mesh.hpp"
#include "penaltyflow/stepper.hpp"

#include <cmath>
#include <limits>
#include <new>
#include <sstream>
#include <string>

struct pf_config {
    pflow::RunConfig cfg;
};

struct pf_run {
    pflow::RunResult result;
};

namespace {

thread_local std::string last_error;

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

double opt(const std::optional<double>& v) { return v ? *v : nan_value; }

pf_status fail(pf_status status, const std::string& message) {
    last_error = message;
    return status;
}

// Maps the library's exception types onto status codes.
template <class F>
pf_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return PF_OK;
    } catch (const pflow::ConfigError& e) {
        return fail(PF_ERR_CONFIG, e.what());
    } catch (const pflow::SolverFailure& e) {
        return fail(PF_ERR_SOLVER, e.what());
    } catch (const pflow::OutputError& e) {
        return fail(PF_ERR_IO, e.what());
    } catch (const pflow::MeshError& e) {
        return fail(PF_ERR_IO, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(PF_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(PF_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(PF_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(PF_ERR_INTERNAL, "unknown exception");
    }
}

pf_status null_arg(const char* fn, const char* name) {
    return fail(PF_ERR_INVALID_ARGUMENT, std::string(fn) + ": " + name + " is null");
}

pf_status run_into(const pf_config* cfg, pf_run** out, bool write_files, const char* fn) {
    if (cfg == nullptr) {
        return null_arg(fn, "cfg");
    }
    if (out == nullptr) {
        return null_arg(fn, "out");
    }
    *out = nullptr;
    return guarded([&] {
        auto run = std::make_unique<pf_run>();
        run->result = write_files ? pflow::run_experiment(cfg->cfg) : pflow::run_simulation(cfg->cfg);
        *out = run.release();
    });
}

} // namespace

extern "C" {

const char* pf_last_error(void) { return last_error.c_str(); }

const char* pf_status_string(pf_status status) {
    switch (status) {
    case PF_OK:
        return "ok";
    case PF_ERR_INVALID_ARGUMENT:
        return "invalid argument";
    case PF_ERR_CONFIG:
        return "configuration error";
    case PF_ERR_SOLVER:
        return "solver failure";
    case PF_ERR_IO:
        return "i/o error";
    case PF_ERR_NO_EXACT_SOLUTION:
        return "problem has no exact solution";
    case PF_ERR_OUT_OF_RANGE:
        return "index out of range";
    case PF_ERR_INTERNAL:
        return "internal error";
    }
    return "unknown status";
}

const char* pf_version(void) { return "0.1.0"; }

pf_status pf_config_new(pf_config** out) {
    if (out == nullptr) {
        return null_arg("pf_config_new", "out");
    }
    *out = nullptr;
    return guarded([&] { *out = new pf_config{}; });
}

pf_status pf_config_load(const char* path, pf_config** out) {
    if (path == nullptr) {
        return null_arg("pf_config_load", "path");
    }
    if (out == nullptr) {
        return null_arg("pf_config_load", "out");
    }
    *out = nullptr;
    return guarded([&] { *out = new pf_config{pflow::load_config(path)}; });
}

pf_status pf_config_parse(const char* text, pf_config** out) {
    if (text == nullptr) {
        return null_arg("pf_config_parse", "text");
    }
    if (out == nullptr) {
        return null_arg("pf_config_parse", "out");
    }
    *out = nullptr;
    return guarded([&] {
        std::istringstream in(text);
        *out = new pf_config{pflow::parse_config(in)};
    });
}

pf_status pf_config_set(pf_config* cfg, const char* key, const char* value) {
    if (cfg == nullptr) {
        return null_arg("pf_config_set", "cfg");
    }
    if (key == nullptr || value == nullptr) {
        return null_arg("pf_config_set", key == nullptr ? "key" : "value");
    }
    return guarded([&] { pflow::set_config_value(cfg->cfg, key, value); });
}

pf_status pf_config_validate(const pf_config* cfg) {
    if (cfg == nullptr) {
        return null_arg("pf_config_validate", "cfg");
    }
    return guarded([&] { cfg->cfg.validate(); });
}

void pf_config_free(pf_config* cfg) { delete cfg; }

pf_status pf_run_simulation(const pf_config* cfg, pf_run** out) {
    return run_into(cfg, out, false, "pf_run_simulation");
}

pf_status pf_run_experiment(const pf_config* cfg, pf_run** out) {
    return run_into(cfg, out, true, "pf_run_experiment");
}

size_t pf_run_step_count(const pf_run* run) { return run == nullptr ? 0 : run->result.steps.size(); }

pf_status pf_run_step(const pf_run* run, size_t index, pf_step* out) {
    if (run == nullptr) {
        return null_arg("pf_run_step", "run");
    }
    if (out == nullptr) {
        return null_arg("pf_run_step", "out");
    }
    if (index >= run->result.steps.size()) {
        return fail(PF_ERR_OUT_OF_RANGE, "pf_run_step: index " + std::to_string(index) + " >= " +
                                             std::to_string(run->result.steps.size()));
    }
    const pflow::StepRecord& s = run->result.steps[index];
    *out = pf_step{s.t,          s.k,          s.eps,          s.order,          s.est_e,
                   s.test1,      opt(s.test2), s.div_u,        s.grad_u,         s.ut_norm,
                   s.rejects,    s.forced,     opt(s.u_err_l2), opt(s.u_err_linf), opt(s.p_err_linf),
                   opt(s.energy_residual), s.penalty_residual, s.solve_residual};
    last_error.clear();
    return PF_OK;
}

pf_status pf_run_summary(const pf_run* run, pf_summary* out) {
    if (run == nullptr) {
        return null_arg("pf_run_summary", "run");
    }
    if (out == nullptr) {
        return null_arg("pf_run_summary", "out");
    }
    const pflow::RunResult& r = run->result;
    *out = pf_summary{r.steps.size(), r.total_rejects,  r.forced_accepts,  r.solves,        r.t_final,
                      opt(r.u_err_l2), opt(r.u_err_linf), opt(r.p_err_linf), r.wall_seconds};
    last_error.clear();
    return PF_OK;
}

void pf_run_free(pf_run* run) { delete run; }

pf_status pf_convergence_study(const pf_config* cfg, const double* steps, size_t n_steps, int write_csv,
                               pf_rate* rows_out) {
    if (cfg == nullptr) {
        return null_arg("pf_convergence_study", "cfg");
    }
    if (steps == nullptr || n_steps == 0) {
        return fail(PF_ERR_INVALID_ARGUMENT, "pf_convergence_study: no step sizes given");
    }
    if (rows_out == nullptr) {
        return null_arg("pf_convergence_study", "rows_out");
    }
    return guarded([&] {
        const std::vector<double> ks(steps, steps + n_steps);
        const auto rows = write_csv != 0 ? pflow::run_convergence_study(cfg->cfg, ks)
                                         : pflow::convergence_study(cfg->cfg, ks);
        for (size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            rows_out[i] = pf_rate{r.k,          r.steps,          r.u_err_l2,   opt(r.rate_l2),
                                  r.u_err_linf, opt(r.rate_linf), r.p_err_linf, opt(r.rate_p)};
        }
    });
}

pf_status pf_verify_forcing(const char* problem, int n_samples, uint64_t seed, double* residual) {
    if (problem == nullptr) {
        return null_arg("pf_verify_forcing", "problem");
    }
    if (residual == nullptr) {
        return null_arg("pf_verify_forcing", "residual");
    }
    if (n_samples < 1) {
        return fail(PF_ERR_INVALID_ARGUMENT, "pf_verify_forcing: n_samples must be positive");
    }
    pflow::Problem p;
    if (const pf_status st = guarded([&] { p = pflow::make_problem(problem); }); st != PF_OK) {
        return st;
    }
    if (!p.has_exact_solution()) {
        return fail(PF_ERR_NO_EXACT_SOLUTION, "problem '" + p.name + "' has no exact solution");
    }
    return guarded([&] { *residual = pflow::verify_forcing(p, n_samples, seed); });
}

size_t pf_problem_count(void) { return pflow::problem_names().size(); }

const char* pf_problem_name(size_t index) {
    static const std::vector<std::string> names = pflow::problem_names();
    return index < names.size() ? names[index].c_str() : nullptr;
}

} // extern "C"
