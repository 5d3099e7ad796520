// contact_action_cli: solve / shoot / markov / invariance / shorttime / verify-all /
// export-trajectory on one flat key=value config.
//
// Settings are layered: defaults < --config file < flags < --set key=value, and
// CONTACT_ACTION_OUT (if set) wins for the output directory. Every CSV gets a .meta
// sidecar that is itself a valid config file for the run that produced it.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include "contact_action/contact_action.hpp"

namespace fs = std::filesystem;
using namespace contact_action;

namespace {

struct Flags
{
    std::string config;
    std::optional<std::string> entry;
    std::optional<double> lambda, epsilon, a, T, dt, radius;
    std::optional<int> m;
    std::optional<std::string> out;
    std::optional<unsigned> workers;
    std::vector<std::string> sets;
    std::string source = "flow";
};

RunConfig resolve(const Flags& f)
{
    RunConfig c;
    if (!f.config.empty()) c = parse_config_file(f.config);
    auto put = [&c](const char* key, const auto& opt) {
        if (!opt) return;
        if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, std::string>) {
            apply_setting(c, key, *opt);
        } else {
            apply_setting(c, key, format_real(static_cast<double>(*opt)));
        }
    };
    put("entry", f.entry);
    put("lambda", f.lambda);
    put("epsilon", f.epsilon);
    put("a", f.a);
    put("T", f.T);
    put("dt", f.dt);
    put("shoot_radius", f.radius);
    if (f.m) apply_setting(c, "m", std::to_string(*f.m));
    if (f.workers) apply_setting(c, "workers", std::to_string(*f.workers));
    put("out", f.out);
    for (const auto& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::config, "--set expects key=value, got '" + kv + "'");
        apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    apply_environment(c);
    validate(c);
    return c;
}

using Extras = std::vector<std::pair<std::string, std::string>>;

// <stem>.csv plus <stem>.meta: the resolved config (parseable with --config) followed by
// artifact facts as comments.
void emit(const RunConfig& c, const std::string& command, const std::string& stem,
          const std::function<void(std::ostream&)>& body, const Extras& extras = {})
{
    const fs::path dir(c.out);
    fs::create_directories(dir);
    {
        std::ofstream os(dir / (stem + ".csv"), std::ios::binary);
        if (!os) throw Error(ErrorKind::config, "cannot write to output directory '" + c.out + "'");
        body(os);
    }
    std::ofstream meta(dir / (stem + ".meta"), std::ios::binary);
    for (const auto& [k, v] : c.describe()) meta << k << "=" << v << "\n";
    meta << "# command=" << command << "\n";
    for (const auto& [k, v] : extras) meta << "# " << k << "=" << v << "\n";
}

Extras field_facts(const ActionField& f)
{
    Extras e;
    e.emplace_back("interpolation", ActionField::interpolation());
    e.emplace_back("layers", std::to_string(f.layers()));
    e.emplace_back("scheme", f.scheme);
    e.emplace_back("resolved_v_max", format_real(f.v_max));
    e.emplace_back("resolved_refinement", std::to_string(f.refinement));
    for (const auto& [k, v] : f.metadata) e.emplace_back(k, v);
    return e;
}

std::string where(const RunConfig& c)
{
    std::string s = "(";
    for (double v : c.probe_point().coords()) s += format_short(v) + ", ";
    return s + format_short(c.T) + ")";
}

int cmd_solve(const RunConfig& c)
{
    PicardResult res;
    if (c.scheme == "semigroup") {
        res.field = semigroup_march(c.lagrangian(), c.x0_point(), c.u0, c.T, c.dp_config(), c.workers);
    } else {
        res = picard_iterate(c.lagrangian(), c.x0_point(), c.u0, c.T, c.dp_config(), c.tol_fix, c.max_outer, 0.0, c.workers);
    }
    const double h = res.field.value_at(c.probe_point(), c.T);
    Extras facts = field_facts(res.field);
    facts.emplace_back("h_probe", format_real(h));
    emit(c, "solve", "field", [&](std::ostream& os) { write_field_csv(os, res.field); }, facts);
    if (!res.trace.empty()) {
        emit(c, "solve", "trace", [&](std::ostream& os) {
            os << "iteration,sup_diff\n";
            for (const auto& r : res.trace) os << r.iteration << "," << format_real(r.sup_diff) << "\n";
        });
    }
    std::cout << "solve " << c.entry << ": h" << where(c) << " = " << format_real(h) << "  [" << res.field.scheme;
    if (!res.trace.empty()) std::cout << ", " << res.trace.size() << " iterations";
    std::cout << ", m=" << c.m << " dt=" << format_short(c.dt) << "]\n";
    return 0;
}

int cmd_shoot(const RunConfig& c)
{
    const auto branches = shoot(c.hamiltonian(), c.x0_point(), c.u0, c.probe_point(), c.T, c.shooting_options());
    const auto best = min_over_solutions(branches);
    emit(c, "shoot", "branches", [&](std::ostream& os) { write_branches_csv(os, branches); },
         {{"h_min", format_real(best.h_value)}, {"p0_min", format_point(best.branch.p0.components())}});
    std::cout << "shoot " << c.entry << ": min h" << where(c) << " = " << format_real(best.h_value) << " over "
              << branches.size() << " branch(es)\n";
    return 0;
}

int cmd_markov(const RunConfig& c)
{
    const double t = c.markov_t > 0.0 ? c.markov_t : 0.5 * c.T;
    const double s = c.markov_s > 0.0 ? c.markov_s : c.T - t;
    const int stride = markov_stride_for(c);
    const ActionSolver solver = c.solver();
    const ActionField field = solver.solve(c.x0_point(), c.u0, t + s);
    const auto d = markov_defect(solver, field, t, s, stride);
    const TorusPoint worst = field.node_point(d.worst_node);
    emit(c, "markov", "markov", [&](std::ostream& os) {
        os << "t,s,y_stride,fresh_solves,defect,worst_x\n";
        os << format_real(t) << "," << format_real(s) << "," << stride << "," << d.fresh_solves << ","
           << format_real(d.defect) << "," << format_point(worst.coords()) << "\n";
    });
    std::cout << "markov " << c.entry << ": max defect = " << format_real(d.defect) << " at t=" << format_short(t)
              << " s=" << format_short(s) << " (" << d.fresh_solves << " fresh solves)\n";
    return 0;
}

int cmd_invariance(const RunConfig& c)
{
    const auto res = check_invariance(c.solver(), c.x0_point(), c.u0, c.T, c.R1, c.R2);
    const double bound = 2.0 * c.tol_fix;
    const bool pass = res.difference <= bound;
    emit(c, "invariance", "invariance", [&](std::ostream& os) {
        os << "R1,R2,mu_1,mu_2,observed_bound,difference,threshold,pass\n";
        os << format_real(c.R1) << "," << format_real(c.R2) << "," << format_real(res.mu_1) << ","
           << format_real(res.mu_2) << "," << format_real(res.observed_bound) << "," << format_real(res.difference)
           << "," << format_real(bound) << "," << (pass ? 1 : 0) << "\n";
    });
    std::cout << "invariance " << c.entry << ": |h_R1 - h_R2| = " << format_real(res.difference) << " (threshold "
              << format_short(bound) << ") " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 4;
}

int cmd_shorttime(const RunConfig& c)
{
    const auto res = short_time_gaps(c);
    const double threshold = tolerance_models().at("short_time")(ToleranceModel::grid_of(c));
    double largest = 0.0;
    for (std::size_t j = 0; j < res.eps.size() && res.gap[j] <= threshold; ++j) largest = res.eps[j];
    const bool pass = res.gap.front() <= threshold;
    emit(c, "shorttime", "shorttime", [&](std::ostream& os) {
        os << "eps,max_gap,threshold,pass\n";
        for (std::size_t j = 0; j < res.eps.size(); ++j) {
            os << format_real(res.eps[j]) << "," << format_real(res.gap[j]) << "," << format_real(threshold) << ","
               << (res.gap[j] <= threshold ? 1 : 0) << "\n";
        }
    });
    std::cout << "shorttime " << c.entry << ": max gap = " << format_real(res.gap.front()) << " at eps="
              << format_short(res.eps.front()) << " (threshold " << format_short(threshold)
              << "), largest passing eps = " << format_short(largest) << "\n";
    return pass ? 0 : 4;
}

int cmd_verify_all(const RunConfig& c)
{
    const auto reports = run_all(c);
    std::size_t passed = 0;
    for (const auto& r : reports) passed += r.pass ? 1 : 0;
    emit(c, "verify-all", "report", [&](std::ostream& os) { write_report_csv(os, reports); });
    {
        std::ofstream txt(fs::path(c.out) / "report.txt", std::ios::binary);
        write_report_text(txt, reports);
    }
    for (const auto& r : reports) {
        if (!r.pass) std::cerr << "FAIL " << r.name << " measured=" << format_short(r.measured) << " threshold=" << format_short(r.threshold) << "\n";
    }
    std::cout << "verify-all: " << passed << "/" << reports.size() << " checks passed\n";
    return passed == reports.size() ? 0 : 4;
}

int cmd_export_trajectory(const RunConfig& c, const std::string& source)
{
    if (source == "dp") {
        const ActionField field = c.solver().solve(c.x0_point(), c.u0, c.T);
        const Curve curve = backtrack_calibrated(field, c.lagrangian(), c.probe_point(), c.T);
        const double residual = herglotz_residual(c.lagrangian(), curve, dp_curve_half_window(c.dt));
        emit(c, "export-trajectory", "curve", [&](std::ostream& os) {
            os << "t";
            for (int a = 1; a <= c.dim; ++a) os << ",x_" << a;
            os << ",u";
            for (int a = 1; a <= c.dim; ++a) os << ",v_" << a;
            os << "\n";
            for (const auto& s : curve) {
                os << format_real(s.t) << "," << format_point(s.x.coords()) << "," << format_real(s.u) << ","
                   << format_point(s.v.components()) << "\n";
            }
        }, {{"herglotz_residual", format_real(residual)}});
        std::cout << "export-trajectory " << c.entry << ": backtracked curve to " << where(c) << ", " << curve.size()
                  << " samples, Herglotz residual " << format_short(residual) << "\n";
        return 0;
    }
    if (source != "flow") throw Error(ErrorKind::config, "--source must be 'flow' or 'dp'");
    FiberVector p0(c.dim);
    p0[0] = c.traj_p0;
    const Trajectory tr = integrate(c.hamiltonian(), ContactState{c.x0_point(), c.u0, p0, 0.0}, c.traj_T, c.shoot_dt);
    const ContactState& end = tr.states.back();
    emit(c, "export-trajectory", "trajectory", [&](std::ostream& os) { write_trajectory_csv(os, tr); });
    std::cout << "export-trajectory " << c.entry << ": " << tr.states.size() << " states, end x=("
              << format_point(end.x.coords()) << ") u=" << format_real(end.u) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Implicit action functions of contact Hamiltonians on flat tori"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    app.add_option("--config", f.config, "key=value config file")->check(CLI::ExistingFile);
    app.add_option("--entry", f.entry, "catalog entry (classical, discounted, nonlinear_u)");
    app.add_option("--lambda", f.lambda, "discount rate of the discounted entry");
    app.add_option("--epsilon", f.epsilon, "potential amplitude");
    app.add_option("--a", f.a, "coupling of the nonlinear_u entry");
    app.add_option("--T", f.T, "horizon");
    app.add_option("--m", f.m, "grid points per axis");
    app.add_option("--dt", f.dt, "time step");
    app.add_option("--radius", f.radius, "shooting momentum radius (0 = a priori bound)");
    app.add_option("--out", f.out, "output directory");
    app.add_option("--workers", f.workers, "worker threads (0 = all cores)");
    app.add_option("--set", f.sets, "any config key, as key=value (repeatable)");

    std::string command;
    for (const char* name : {"solve", "shoot", "markov", "invariance", "shorttime", "verify-all", "export-trajectory"}) {
        auto* sub = app.add_subcommand(name);
        sub->callback([&command, name] { command = name; });
        if (std::string(name) == "export-trajectory") {
            sub->add_option("--source", f.source, "flow: contact trajectory from (x0,u0,traj_p0); dp: backtracked DP curve to the probe");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code(ErrorKind::config);
    }

    try {
        const RunConfig c = resolve(f);
        if (command == "solve") return cmd_solve(c);
        if (command == "shoot") return cmd_shoot(c);
        if (command == "markov") return cmd_markov(c);
        if (command == "invariance") return cmd_invariance(c);
        if (command == "shorttime") return cmd_shorttime(c);
        if (command == "verify-all") return cmd_verify_all(c);
        return cmd_export_trajectory(c, f.source);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
