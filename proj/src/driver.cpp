#include "penaltyflow/driver.hpp"

#include "penaltyflow/mesh.hpp"
#include "penaltyflow/stepper.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace pflow {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v, const std::string& where) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || !std::isfinite(x)) {
        throw ConfigError(where + ": '" + key + "' expects a number, got '" + v + "'");
    }
    return x;
}

long to_long(const std::string& key, const std::string& v, const std::string& where) {
    std::size_t used = 0;
    long x = 0;
    try {
        x = std::stol(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size()) {
        throw ConfigError(where + ": '" + key + "' expects an integer, got '" + v + "'");
    }
    return x;
}

bool to_switch(const std::string& key, const std::string& v, const std::string& where) {
    if (v == "on" || v == "true" || v == "1") {
        return true;
    }
    if (v == "off" || v == "false" || v == "0") {
        return false;
    }
    throw ConfigError(where + ": '" + key + "' expects on/off, got '" + v + "'");
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

Problem configured_problem(const RunConfig& cfg) {
    Problem p = make_problem(cfg.problem);
    if (cfg.nu) {
        if (p.name == "taylor_green") {
            p = taylor_green(*cfg.nu);
        } else if (p.has_exact_solution() && p.name != "quiescent") {
            throw ConfigError("nu override would make the manufactured force of '" + p.name + "' inconsistent");
        } else {
            p.nu = *cfg.nu;
        }
    }
    return p;
}

std::shared_ptr<const Mesh> configured_mesh(const RunConfig& cfg, const Problem& p) {
    if (!cfg.mesh_file.empty()) {
        return std::make_shared<const Mesh>(load_mesh(cfg.mesh_file));
    }
    if (p.domain.needs_mesh_file) {
        throw ConfigError("problem '" + p.name + "' needs a mesh file (key 'mesh')");
    }
    const int ny = cfg.ny > 0 ? cfg.ny : cfg.nx;
    return std::make_shared<const Mesh>(build_rect_mesh(cfg.nx, ny, p.domain.x0, p.domain.y0, p.domain.x1, p.domain.y1,
                                                      cfg.mesh_pattern));
}

// Lumped integration weights of the P1 basis, used for mean values.
Eigen::VectorXd p1_weights(const Mesh& mesh) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.nodes().size()));
    for (std::size_t t = 0; t < mesh.triangles().size(); ++t) {
        const double a = std::abs(mesh.signed_area(t)) / 3.0;
        for (int v : mesh.triangles()[t]) {
            w[v] += a;
        }
    }
    return w;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

void assign(RunConfig& cfg, const std::string& key, const std::string& v, const std::string& where) {
    auto num = [&] { return to_double(key, v, where); };
    if (key == "problem") {
        cfg.problem = v;
    } else if (key == "algorithm") {
        cfg.algorithm = parse_algorithm(v);
    } else if (key == "nx") {
        cfg.nx = static_cast<int>(to_long(key, v, where));
    } else if (key == "ny") {
        cfg.ny = static_cast<int>(to_long(key, v, where));
    } else if (key == "mesh_pattern") {
        if (v == "diagonal") {
            cfg.mesh_pattern = RectPattern::Diagonal;
        } else if (v == "crisscross") {
            cfg.mesh_pattern = RectPattern::CrissCross;
        } else {
            throw ConfigError(where + ": mesh_pattern must be diagonal or crisscross");
        }
    } else if (key == "mesh") {
        cfg.mesh_file = v;
    } else if (key == "nu") {
        cfg.nu = num();
    } else if (key == "k0") {
        cfg.k0 = num();
    } else if (key == "eps0") {
        cfg.eps0 = num();
    } else if (key == "t_end") {
        cfg.t_end = num();
    } else if (key == "tol") {
        cfg.tol.tol = num();
    } else if (key == "min_tol") {
        cfg.tol.min_tol = num();
    } else if (key == "ttol") {
        cfg.tol.ttol = num();
    } else if (key == "min_ttol") {
        cfg.tol.min_ttol = num();
    } else if (key == "eps_min") {
        cfg.tol.eps_min = num();
    } else if (key == "eps_max") {
        cfg.tol.eps_max = num();
    } else if (key == "alpha") {
        cfg.tol.alpha = num();
    } else if (key == "safety") {
        cfg.tol.safety = num();
    } else if (key == "max_rejects") {
        cfg.tol.max_rejects = static_cast<int>(to_long(key, v, where));
    } else if (key == "guard") {
        cfg.guard = to_switch(key, v, where);
    } else if (key == "filter") {
        cfg.filter = to_switch(key, v, where);
    } else if (key == "convection") {
        cfg.convection = to_switch(key, v, where);
    } else if (key == "solver") {
        if (v == "direct") {
            cfg.solver.kind = SolverKind::Direct;
        } else if (v == "gmres") {
            cfg.solver.kind = SolverKind::Gmres;
        } else {
            throw ConfigError(where + ": solver must be direct or gmres");
        }
    } else if (key == "solver_tol") {
        cfg.solver.tol = num();
    } else if (key == "output_dir") {
        cfg.output_dir = v;
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(to_long(key, v, where));
    } else if (key == "eps_drop_time") {
        cfg.eps_drop_time = num();
    } else if (key == "eps_drop_factor") {
        cfg.eps_drop_factor = num();
    } else if (key == "check_energy") {
        cfg.check_energy = to_switch(key, v, where);
    } else if (key == "max_steps") {
        cfg.max_steps = to_long(key, v, where);
    } else {
        throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

} // namespace

std::string algorithm_name(Algorithm a) {
    switch (a) {
    case Algorithm::ConstantStep:
        return "alg1-const-k";
    case Algorithm::FirstOrder:
        return "first-var-k";
    case Algorithm::SecondOrder:
        return "second-var-k";
    case Algorithm::Vsvo:
        return "vsvo";
    }
    return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
    for (auto a : {Algorithm::ConstantStep, Algorithm::FirstOrder, Algorithm::SecondOrder, Algorithm::Vsvo}) {
        if (algorithm_name(a) == name) {
            return a;
        }
    }
    throw ConfigError("unknown algorithm '" + name + "' (expected alg1-const-k, first-var-k, second-var-k or vsvo)");
}

void RunConfig::validate() const {
    try {
        tol.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(k0 > 0.0)) {
        throw ConfigError("k0 must be positive");
    }
    if (!(eps0 >= tol.eps_min && eps0 <= tol.eps_max)) {
        throw ConfigError("eps0 must lie in [eps_min, eps_max]");
    }
    if (mesh_file.empty() && nx < 1) {
        throw ConfigError("nx must be at least 1");
    }
    if (t_end && !(*t_end > 0.0)) {
        throw ConfigError("t_end must be positive");
    }
    if (nu && !(*nu > 0.0)) {
        throw ConfigError("nu must be positive");
    }
    if (!(solver.tol > 0.0)) {
        throw ConfigError("solver_tol must be positive");
    }
    if (!(eps_drop_factor >= 1.0)) {
        throw ConfigError("eps_drop_factor must be at least 1");
    }
    if (max_steps < 1) {
        throw ConfigError("max_steps must be positive");
    }
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    const std::string k = trim(key);
    const std::string v = trim(value);
    if (k.empty() || v.empty()) {
        throw ConfigError("config: key and value must be non-empty");
    }
    assign(cfg, k, v, "config");
}

RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::map<std::string, int> seen;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) {
            raw.erase(hash);
        }
        const std::string text = trim(raw);
        if (text.empty()) {
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line) + ": expected 'key = value'");
        }
        const std::string key = trim(text.substr(0, eq));
        const std::string v = trim(text.substr(eq + 1));
        if (key.empty() || v.empty()) {
            throw ConfigError("config line " + std::to_string(line) + ": expected 'key = value'");
        }
        if (auto [it, inserted] = seen.emplace(key, line); !inserted) {
            throw ConfigError("config line " + std::to_string(line) + ": '" + key + "' already set on line " +
                              std::to_string(it->second));
        }
        assign(cfg, key, v, "config line " + std::to_string(line));
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    RunConfig cfg = parse_config(in);
    // Relative paths in a config file are relative to the file itself.
    const auto base = path.parent_path();
    if (!cfg.mesh_file.empty() && std::filesystem::path(cfg.mesh_file).is_relative()) {
        cfg.mesh_file = (base / cfg.mesh_file).string();
    }
    return cfg;
}

RunResult run_simulation(const RunConfig& cfg, const StepObserver& observer) {
    cfg.validate();
    const auto wall_start = std::chrono::steady_clock::now();
    const Problem problem = configured_problem(cfg);
    const auto mesh = configured_mesh(cfg, problem);
    const SpacePtr V = build_space(mesh, SpaceKind::P2Vector);
    PenaltyStepper stepper(V, problem, cfg.solver, cfg.convection);
    const SpacePtr& Q = stepper.pressure_space();
    const Eigen::VectorXd weights = p1_weights(*mesh);
    const double area = weights.sum();

    const double t_end = cfg.t_end ? *cfg.t_end : std::min(problem.t_end, 1.0);
    const Tolerances& tol = cfg.tol;
    const bool exact = problem.has_exact_solution();
    const bool variable_step = cfg.algorithm != Algorithm::ConstantStep;

    // Startup history: exact data at t = -k0 when available, otherwise a
    // repeated initial state with the filter skipped on the first step.
    Field u_n = exact ? interpolate(V, *problem.exact_u, 0.0) : Field(V);
    Field u_nm1 = exact ? interpolate(V, *problem.exact_u, -cfg.k0) : u_n;
    bool history_real = exact;
    std::optional<Field> d2_prev;

    ControllerState state;
    state.t = 0.0;
    state.k_n = cfg.k0;
    state.k_nm1 = cfg.k0;
    state.eps_n = cfg.eps0;
    double k_try = cfg.k0;
    double eps_try = cfg.eps0;
    bool drop_done = false;

    RunResult result;
    const double t_snap = 1e-10 * t_end;

    while (state.t < t_end - t_snap) {
        if (static_cast<long>(result.steps.size()) >= cfg.max_steps) {
            throw std::runtime_error("max_steps (" + std::to_string(cfg.max_steps) + ") reached at t=" +
                                     std::to_string(state.t));
        }
        const double remaining = t_end - state.t;
        double k = k_try;
        double t_np1 = state.t + k;
        if (std::abs(remaining - k) <= t_snap) {
            t_np1 = t_end;
        } else if (remaining < k) {
            k = remaining;
            t_np1 = t_end;
        } else if (variable_step && remaining < 2.0 * k) {
            // Two equal steps to the end keep consecutive steps within a factor two.
            k = 0.5 * remaining;
            t_np1 = state.t + k;
        }
        state.k_np1 = k;
        state.eps_np1 = eps_try;

        StepInput in;
        in.u_n = &u_n;
        in.u_nm1 = &u_nm1;
        in.k_np1 = k;
        in.k_n = state.k_n;
        in.eps_np1 = eps_try;
        in.t_np1 = t_np1;
        StepResult step = stepper.be_penalty_step(in);
        ++result.solves;

        const Field d2 = compute_D2(step.u1, u_n, u_nm1, k, state.k_n);
        const FilterCoefficients ac = alpha_coeffs(state.k_n / state.k_nm1, k / state.k_n);
        const bool filter_ready = cfg.filter && history_real;
        const Field filtered = filter_ready ? apply_time_filter(step.u1, d2, ac.alpha1) : step.u1;

        Estimates est;
        est.time_ready = history_real;
        est.test1 = est_time_first(d2, ac.alpha1);
        if (d2_prev) {
            est.test2 = est_time_second(d2, *d2_prev, k, state.k_n, state.k_nm1, ac.alpha2);
        }
        const bool keeps_filtered = filter_ready && cfg.algorithm != Algorithm::FirstOrder;
        const Field& candidate = keeps_filtered ? filtered : step.u1;
        est.est_e = est_epsilon(candidate).value;

        const Decision d = decide(cfg.algorithm, est, state, tol, cfg.guard, filter_ready);
        if (d.verdict == Verdict::Reject) {
            ++state.reject_count;
            ++result.total_rejects;
            eps_try = d.eps_next;
            k_try = d.k_next;
            continue;
        }

        const Field& u_new = d.use_filtered ? filtered : step.u1;
        StepRecord rec;
        rec.t = t_np1;
        rec.k = k;
        rec.eps = eps_try;
        rec.order = (cfg.algorithm == Algorithm::ConstantStep) ? (d.use_filtered ? 2 : 1) : d.order_used;
        rec.est_e = &u_new == &candidate ? est.est_e : est_epsilon(u_new).value;
        rec.test1 = est.test1;
        rec.test2 = est.test2;
        rec.div_u = norm(u_new, NormKind::DivL2);
        rec.grad_u = norm(u_new, NormKind::H1Semi);
        rec.ut_norm = discrete_accel(u_new, u_n, k);
        rec.rejects = state.reject_count;
        rec.forced = d.forced;
        rec.solve_residual = step.report.relative_residual();

        const Field p = stepper.recover_pressure(u_new, eps_try);
        rec.penalty_residual = max_abs(stepper.penalty_relation(u_new, p, eps_try));
        if (cfg.check_energy) {
            rec.energy_residual = stepper.energy_balance(step.u1, u_n, k, eps_try, step.load).relative_residual();
        }
        if (exact) {
            const Field ue = interpolate(V, *problem.exact_u, t_np1);
            rec.u_err_l2 = l2_distance(u_new, *problem.exact_u, t_np1);
            rec.u_err_linf = norm(u_new - ue, NormKind::LinfNodal);
            // Pressure is compared up to its mean value.
            const Field pe = interpolate(Q, *problem.exact_p, t_np1);
            const double shift = weights.dot(p.coeffs) / area - weights.dot(pe.coeffs) / area;
            rec.p_err_linf = max_abs((p.coeffs - pe.coeffs).array() - shift);
        }
        if (d.forced) {
            ++result.forced_accepts;
        }

        if (history_real) {
            d2_prev = d2;
        }
        history_real = true;
        u_nm1 = std::move(u_n);
        u_n = u_new;
        state.k_nm1 = state.k_n;
        state.k_n = k;
        state.eps_n = eps_try;
        state.t = t_np1;
        state.reject_count = 0;
        eps_try = d.eps_next;
        k_try = d.k_next;

        if (cfg.eps_drop_time && !drop_done && state.t >= *cfg.eps_drop_time - t_snap) {
            double requested = state.eps_n / cfg.eps_drop_factor;
            if (cfg.guard) {
                requested = guard_epsilon(state.eps_n, requested, k_try, tol.alpha);
            }
            eps_try = std::clamp(requested, tol.eps_min, tol.eps_max);
            drop_done = true;
        }

        if (observer) {
            observer(rec);
        }
        result.steps.push_back(std::move(rec));
    }

    result.t_final = state.t;
    if (!result.steps.empty()) {
        result.u_err_l2 = result.steps.back().u_err_l2;
        result.u_err_linf = result.steps.back().u_err_linf;
        result.p_err_linf = result.steps.back().p_err_linf;
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return result;
}

void write_timeseries(std::ostream& out, const std::vector<StepRecord>& steps) {
    out << timeseries_header << '\n';
    for (const auto& r : steps) {
        out << fmt(r.t) << ',' << fmt(r.k) << ',' << fmt(r.eps) << ',' << r.order << ',' << fmt(r.est_e) << ','
            << fmt(r.test1) << ',' << fmt(r.test2) << ',' << fmt(r.div_u) << ',' << fmt(r.grad_u) << ','
            << fmt(r.ut_norm) << ',' << r.rejects << ',' << fmt(r.u_err_l2) << ',' << fmt(r.u_err_linf) << ','
            << fmt(r.p_err_linf) << '\n';
    }
}

void write_summary(std::ostream& out, const RunConfig& cfg, const RunResult& result) {
    out << "problem,algorithm,steps,rejects,forced_accepts,t_final,u_err_l2,u_err_linf,p_err_linf\n";
    out << cfg.problem << ',' << algorithm_name(cfg.algorithm) << ',' << result.steps.size() << ','
        << result.total_rejects << ',' << result.forced_accepts << ',' << fmt(result.t_final) << ','
        << fmt(result.u_err_l2) << ',' << fmt(result.u_err_linf) << ',' << fmt(result.p_err_linf) << '\n';
}

namespace {

std::ofstream open_output(const std::filesystem::path& dir, const char* name) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream out(dir / name);
    if (!out) {
        throw OutputError("cannot write " + (dir / name).string());
    }
    return out;
}

} // namespace

RunResult run_experiment(const RunConfig& cfg) {
    RunResult result = run_simulation(cfg);
    const std::filesystem::path dir(cfg.output_dir);
    {
        auto out = open_output(dir, "timeseries.csv");
        write_timeseries(out, result.steps);
    }
    {
        auto out = open_output(dir, "summary.csv");
        write_summary(out, cfg, result);
    }
    return result;
}

std::vector<RateRow> convergence_study(const RunConfig& cfg, const std::vector<double>& ks) {
    if (ks.empty()) {
        throw ConfigError("convergence study needs at least one step size");
    }
    if (!make_problem(cfg.problem).has_exact_solution()) {
        throw ConfigError("convergence study needs a problem with an exact solution");
    }
    std::vector<RateRow> rows;
    for (double k : ks) {
        RunConfig c = cfg;
        c.k0 = k;
        if (c.algorithm != Algorithm::ConstantStep) {
            throw ConfigError("convergence study runs the constant-step algorithm only");
        }
        const RunResult r = run_simulation(c);
        RateRow row;
        row.k = k;
        row.steps = static_cast<long>(r.steps.size());
        row.u_err_l2 = r.u_err_l2.value_or(0.0);
        row.u_err_linf = r.u_err_linf.value_or(0.0);
        row.p_err_linf = r.p_err_linf.value_or(0.0);
        if (!rows.empty()) {
            const RateRow& prev = rows.back();
            const double ratio = std::log(prev.k / k);
            auto rate = [ratio](double e_prev, double e) -> std::optional<double> {
                if (e_prev > 0.0 && e > 0.0) {
                    return std::log(e_prev / e) / ratio;
                }
                return std::nullopt;
            };
            row.rate_l2 = rate(prev.u_err_l2, row.u_err_l2);
            row.rate_linf = rate(prev.u_err_linf, row.u_err_linf);
            row.rate_p = rate(prev.p_err_linf, row.p_err_linf);
        }
        rows.push_back(row);
    }
    return rows;
}

void write_rates(std::ostream& out, const std::vector<RateRow>& rows) {
    out << "k,steps,u_err_l2,rate_l2,u_err_linf,rate_linf,p_err_linf,rate_p\n";
    for (const auto& r : rows) {
        out << fmt(r.k) << ',' << r.steps << ',' << fmt(r.u_err_l2) << ',' << fmt(r.rate_l2) << ','
            << fmt(r.u_err_linf) << ',' << fmt(r.rate_linf) << ',' << fmt(r.p_err_linf) << ',' << fmt(r.rate_p)
            << '\n';
    }
}

std::vector<RateRow> run_convergence_study(const RunConfig& cfg, const std::vector<double>& ks) {
    auto rows = convergence_study(cfg, ks);
    auto out = open_output(cfg.output_dir, "rates.csv");
    write_rates(out, rows);
    return rows;
}

} // namespace pflow
