#pragma once

#include "penaltyflow/adapt.hpp"
#include "penaltyflow/linsolve.hpp"
#include "penaltyflow/mesh.hpp"
#include "penaltyflow/problems.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pflow {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string problem = "vortex_square";
    Algorithm algorithm = Algorithm::ConstantStep;
    int nx = 48;
    int ny = 0; ///< 0 means same as nx
    RectPattern mesh_pattern = RectPattern::CrissCross;
    std::string mesh_file;
    std::optional<double> nu;
    double k0 = 0.01;
    double eps0 = 1e-8;
    Tolerances tol;
    std::optional<double> t_end; ///< defaults to min(problem end time, 1)
    bool guard = true;
    bool filter = true;
    bool convection = true;
    SolverOptions solver;
    std::string output_dir = ".";
    std::uint64_t seed = 0;
    /// Forced penalty drop: after the first accepted step with t >= eps_drop_time
    /// the next attempt uses eps/eps_drop_factor (guarded when guard is on).
    std::optional<double> eps_drop_time;
    double eps_drop_factor = 100.0;
    bool check_energy = false;
    long max_steps = 1000000;

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;
};

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

/// Parses `key = value` lines; `#` starts a comment. Unknown keys, repeated
/// keys and malformed values are errors reported with their line number.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);
/// Applies one key with the parser's rules; does not validate the whole config.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// One accepted time level.
struct StepRecord {
    double t = 0.0;
    double k = 0.0;
    double eps = 0.0;
    int order = 1;
    double est_e = 0.0;
    double test1 = 0.0;
    std::optional<double> test2;
    double div_u = 0.0;
    double grad_u = 0.0;
    double ut_norm = 0.0;
    int rejects = 0;
    bool forced = false;
    std::optional<double> u_err_l2;
    std::optional<double> u_err_linf;
    std::optional<double> p_err_linf;
    /// Relative residual of the discrete energy identity (check_energy only).
    std::optional<double> energy_residual;
    /// max_i |(div u + eps p, q_i)| of the accepted solution.
    double penalty_residual = 0.0;
    /// Relative residual of the linear solve.
    double solve_residual = 0.0;
};

struct RunResult {
    std::vector<StepRecord> steps;
    long total_rejects = 0;
    long forced_accepts = 0;
    long solves = 0;
    double t_final = 0.0;
    std::optional<double> u_err_l2;
    std::optional<double> u_err_linf;
    std::optional<double> p_err_linf;
    double wall_seconds = 0.0;
};

using StepObserver = std::function<void(const StepRecord&)>;

/// Runs the configured algorithm in memory without writing files.
RunResult run_simulation(const RunConfig& cfg, const StepObserver& observer = {});

/// Runs and writes timeseries.csv and summary.csv into cfg.output_dir.
RunResult run_experiment(const RunConfig& cfg);

inline constexpr const char* timeseries_header =
    "t,k,eps,order,est_e,test1,test2,div_u,grad_u,ut_norm,rejects,u_err_l2,u_err_linf,p_err_linf";

void write_timeseries(std::ostream& out, const std::vector<StepRecord>& steps);
void write_summary(std::ostream& out, const RunConfig& cfg, const RunResult& result);

struct RateRow {
    double k = 0.0;
    long steps = 0;
    double u_err_l2 = 0.0;
    double u_err_linf = 0.0;
    double p_err_linf = 0.0;
    std::optional<double> rate_l2;
    std::optional<double> rate_linf;
    std::optional<double> rate_p;
};

/// Runs cfg once per step size (k0 replaced, constant-step algorithm kept)
/// and forms successive log2 error ratios normalized by the step ratio.
/// Requires a problem with an exact solution.
std::vector<RateRow> convergence_study(const RunConfig& cfg, const std::vector<double>& ks);

void write_rates(std::ostream& out, const std::vector<RateRow>& rows);

/// convergence_study plus rates.csv in cfg.output_dir.
std::vector<RateRow> run_convergence_study(const RunConfig& cfg, const std::vector<double>& ks);

} // namespace pflow
