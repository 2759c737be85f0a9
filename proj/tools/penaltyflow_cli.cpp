#include "penaltyflow/penaltyflow.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

namespace {

constexpr double forcing_threshold = 1e-6;

struct ConfigDeleter {
    void operator()(pf_config* c) const { pf_config_free(c); }
};
struct RunDeleter {
    void operator()(pf_run* r) const { pf_run_free(r); }
};
using ConfigPtr = std::unique_ptr<pf_config, ConfigDeleter>;
using RunPtr = std::unique_ptr<pf_run, RunDeleter>;

int report(pf_status st) {
    std::fprintf(stderr, "penaltyflow: %s: %s\n", pf_status_string(st), pf_last_error());
    return static_cast<int>(st);
}

std::string num(double x) {
    if (std::isnan(x)) {
        return "-";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// The library reads the cap itself; malformed values are rejected before any work starts.
bool check_thread_env() {
    const char* v = std::getenv("PENALTYFLOW_THREADS");
    if (v == nullptr || *v == '\0') {
        return true;
    }
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1) {
        std::fprintf(stderr, "penaltyflow: PENALTYFLOW_THREADS must be a positive integer, got '%s'\n", v);
        return false;
    }
    return true;
}

int load(const std::string& path, const std::vector<std::string>& overrides, const std::string& output_dir,
         ConfigPtr& cfg) {
    pf_config* raw = nullptr;
    if (pf_status st = pf_config_load(path.c_str(), &raw); st != PF_OK) {
        return report(st);
    }
    cfg.reset(raw);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "penaltyflow: --set expects key=value, got '%s'\n", kv.c_str());
            return PF_ERR_CONFIG;
        }
        if (pf_status st = pf_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
            st != PF_OK) {
            return report(st);
        }
    }
    if (!output_dir.empty()) {
        if (pf_status st = pf_config_set(cfg.get(), "output_dir", output_dir.c_str()); st != PF_OK) {
            return report(st);
        }
    }
    if (pf_status st = pf_config_validate(cfg.get()); st != PF_OK) {
        return report(st);
    }
    return 0;
}

int cmd_run(const std::string& path, const std::vector<std::string>& overrides, const std::string& output_dir,
            bool quiet) {
    ConfigPtr cfg;
    if (int rc = load(path, overrides, output_dir, cfg); rc != 0) {
        return rc;
    }
    pf_run* raw = nullptr;
    if (pf_status st = pf_run_experiment(cfg.get(), &raw); st != PF_OK) {
        return report(st);
    }
    RunPtr run(raw);
    pf_summary s{};
    pf_run_summary(run.get(), &s);
    if (!quiet) {
        std::printf("steps %zu  rejects %ld  forced %ld  t_final %s  wall %.1fs\n", s.steps, s.total_rejects,
                    s.forced_accepts, num(s.t_final).c_str(), s.wall_seconds);
        if (!std::isnan(s.u_err_l2)) {
            std::printf("u_err_l2 %s  u_err_linf %s  p_err_linf %s\n", num(s.u_err_l2).c_str(),
                        num(s.u_err_linf).c_str(), num(s.p_err_linf).c_str());
        }
    }
    return 0;
}

int cmd_rates(const std::string& path, const std::vector<double>& ks, const std::vector<std::string>& overrides,
              const std::string& output_dir) {
    ConfigPtr cfg;
    if (int rc = load(path, overrides, output_dir, cfg); rc != 0) {
        return rc;
    }
    std::vector<pf_rate> rows(ks.size());
    if (pf_status st = pf_convergence_study(cfg.get(), ks.data(), ks.size(), 1, rows.data()); st != PF_OK) {
        return report(st);
    }
    std::printf("%-10s %-7s %-14s %-8s %-14s %-8s\n", "k", "steps", "u_err_l2", "rate", "u_err_linf", "rate");
    for (const auto& r : rows) {
        std::printf("%-10s %-7ld %-14s %-8s %-14s %-8s\n", num(r.k).c_str(), r.steps, num(r.u_err_l2).c_str(),
                    num(r.rate_l2).c_str(), num(r.u_err_linf).c_str(), num(r.rate_linf).c_str());
    }
    return 0;
}

int cmd_verify(const std::string& problem, int samples, std::uint64_t seed) {
    double residual = 0.0;
    if (pf_status st = pf_verify_forcing(problem.c_str(), samples, seed, &residual); st != PF_OK) {
        return report(st);
    }
    const bool ok = residual < forcing_threshold;
    std::printf("%s: forcing residual %.3e (%s, threshold %.0e)\n", problem.c_str(), residual, ok ? "ok" : "FAIL",
                forcing_threshold);
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Penalty-method Navier-Stokes solver with adaptive penalty and time step"};
    app.require_subcommand(1);
    app.set_version_flag("--version", pf_version());

    std::string config;
    std::string output_dir;
    std::vector<std::string> overrides;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "Run a configuration; writes timeseries.csv and summary.csv");
    run->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
    run->add_option("-s,--set", overrides, "Override a config key (key=value), repeatable");
    run->add_option("-o,--output-dir", output_dir, "Output directory (overrides output_dir)");
    run->add_flag("-q,--quiet", quiet, "Print nothing on success");

    std::vector<double> ks;
    auto* rates = app.add_subcommand("rates", "Constant-step convergence study; writes rates.csv");
    rates->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
    rates->add_option("--steps", ks, "Comma-separated step sizes")->required()->delimiter(',')->check(
        CLI::PositiveNumber);
    rates->add_option("-s,--set", overrides, "Override a config key (key=value), repeatable");
    rates->add_option("-o,--output-dir", output_dir, "Output directory (overrides output_dir)");

    std::string problem;
    int samples = 100;
    std::uint64_t seed = 12345;
    auto* verify = app.add_subcommand("verify", "Check a manufactured forcing against its exact solution");
    std::vector<std::string> names;
    for (size_t i = 0; i < pf_problem_count(); ++i) {
        names.emplace_back(pf_problem_name(i));
    }
    verify->add_option("problem", problem, "Problem name")->required()->check(CLI::IsMember(names));
    verify->add_option("-n,--samples", samples, "Random interior points")->check(CLI::PositiveNumber);
    verify->add_option("--seed", seed, "Sampling seed");

    CLI11_PARSE(app, argc, argv);
    if (!check_thread_env()) {
        return PF_ERR_CONFIG;
    }
    if (*run) {
        return cmd_run(config, overrides, output_dir, quiet);
    }
    if (*rates) {
        return cmd_rates(config, ks, overrides, output_dir);
    }
    return cmd_verify(problem, samples, seed);
}
