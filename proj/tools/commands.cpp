#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "robustutil/errors.hpp"
#include "robustutil/orlicz.hpp"
#include "robustutil/robust_solver.hpp"
#include "robustutil/scenario.hpp"
#include "robustutil/verifier.hpp"

namespace robustutil::cli {
namespace {

using nlohmann::ordered_json;

constexpr const char* kVersion = "0.3.0";

ordered_json num(double v) {
    if (std::isnan(v)) return nullptr;
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
}

ordered_json nums(const std::vector<double>& v) {
    ordered_json arr = ordered_json::array();
    for (const double x : v) arr.push_back(num(x));
    return arr;
}

std::string g17(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* format_name(Format f) { return f == Format::Json ? "json" : "csv"; }

ordered_json config_json(const RunConfig& cfg) {
    ordered_json c;
    c["command"] = cfg.command;
    c["scenario"] = cfg.scenario;
    c["utility"] = cfg.utility;
    c["wealth"] = num(cfg.wealth);
    c["tol"] = num(cfg.tol);
    c["nodes"] = cfg.nodes;
    c["seed"] = cfg.seed;
    c["format"] = format_name(cfg.format);
    c["threads"] = cfg.threads;
    return c;
}

class Timer {
public:
    explicit Timer(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        if (!enabled_) return 0.0;
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    bool enabled_;
    std::chrono::steady_clock::time_point start_;
};

Scenario load(const RunConfig& cfg) {
    if (cfg.scenario.empty()) throw ValidationError("--scenario is required for '" + cfg.command + "'");
    std::ifstream in(cfg.scenario);
    if (!in) throw ParseError("cannot open scenario file '" + cfg.scenario + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    Scenario sc = parse_scenario(buf.str(), cfg.scenario, cfg.nodes);
    if (sc.generator && cfg.nodes_set && sc.generator->nodes != cfg.nodes) {
        sc.generator->nodes = cfg.nodes;
        sc.market = gauss_hermite_market(*sc.generator);
    }
    return sc;
}

DualOptions dual_options(const RunConfig& cfg) {
    DualOptions o;
    o.tol = cfg.tol;
    o.seed = cfg.seed;
    return o;
}

void emit(const RunConfig& cfg, std::ostream& out, const std::string& text) {
    if (cfg.out.empty()) {
        out << text;
        return;
    }
    std::ofstream file(cfg.out);
    if (!file) throw ValidationError("cannot write output file '" + cfg.out + "'");
    file << text;
}

std::string dump(const ordered_json& doc) { return doc.dump(2) + "\n"; }

ordered_json kkt_json(const KktResiduals& k) {
    ordered_json j;
    j["grad_norm"] = num(k.grad_norm);
    j["normalization_residual"] = num(k.normalization_residual);
    j["constraint_residuals"] = nums(k.constraint_residuals);
    j["complementarity_residuals"] = nums(k.complementarity_residuals);
    return j;
}

int report_infeasible(const FeasibilityReport& fr, std::ostream& err) {
    err << "infeasible: feasible=" << (fr.feasible ? "true" : "false")
        << " strictly_feasible=" << (fr.strictly_feasible ? "true" : "false")
        << " interior_margin=" << fr.interior_margin << "\n";
    return kInfeasible;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const Timer timer(cfg.timing);
    const Scenario sc = load(cfg);
    const auto uf = UtilityFunction::parse(cfg.utility);
    if (!sc.constraints.empty()) {
        const auto fr = feasibility_check(sc.market, sc.constraints, true);
        if (!fr.strictly_feasible) return report_infeasible(fr, err);
    }
    RobustOptions opts;
    opts.dual = dual_options(cfg);
    const auto sol = solve_robust(sc.market, sc.constraints, uf, cfg.wealth, opts);
    const auto& d = sol.diagnostics;

    if (cfg.format == Format::Csv) {
        std::ostringstream os;
        os << "# x=" << g17(sol.x) << ",y_hat=" << g17(sol.y_hat) << ",u=" << g17(sol.u_value)
           << ",v_at_y_hat=" << g17(sol.v_at_y_hat) << ",budget_residual=" << g17(d.budget_residual)
           << "\n";
        os << "state_index,prob";
        for (const auto& [id, values] : sc.market.observables()) os << "," << id;
        os << ",Z_hat,X_hat\n";
        const auto p = sc.market.probs();
        for (std::size_t i = 0; i < p.size(); ++i) {
            os << i << "," << g17(p[i]);
            for (const auto& [id, values] : sc.market.observables()) os << "," << g17(values[i]);
            os << "," << g17(sol.Z_hat[i]) << "," << g17(sol.X_hat[i]) << "\n";
        }
        emit(cfg, out, os.str());
        return kOk;
    }

    ordered_json doc;
    doc["config"] = config_json(cfg);
    ordered_json s;
    s["x"] = num(sol.x);
    s["y_hat"] = num(sol.y_hat);
    s["u"] = num(sol.u_value);
    s["v_at_y_hat"] = num(sol.v_at_y_hat);
    s["Z_hat"] = nums(sol.Z_hat);
    s["X_hat"] = nums(sol.X_hat);
    doc["solution"] = s;
    ordered_json diag;
    diag["kkt"] = kkt_json(d.kkt);
    diag["budget_residual"] = num(d.budget_residual);
    diag["normalization_residual"] = num(d.normalization_residual);
    diag["worst_case_value_residual"] = num(d.worst_case_value_residual);
    diag["saddle_gap"] = num(d.saddle_gap);
    diag["invariants_hold"] = d.invariants_hold;
    diag["iterations"] = d.iterations;
    diag["wall_time_ms"] = num(timer.ms());
    doc["diagnostics"] = diag;
    doc["version"] = kVersion;
    emit(cfg, out, dump(doc));
    return kOk;
}

int cmd_verify_bs(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const Timer timer(cfg.timing);
    const BSOracle oracle{cfg.sigma, cfg.T, cfg.A, cfg.wealth, cfg.s0};
    oracle.validate();
    const double rel_tol = cfg.rel_tol.value_or(bs_default_tolerance(cfg.nodes));
    RobustOptions opts;
    opts.dual = dual_options(cfg);
    const auto result = verify_bs(oracle, cfg.nodes, rel_tol, opts);
    std::optional<BSVerification> baseline;
    if (cfg.nodes != 64) baseline = verify_bs(oracle, 64, bs_default_tolerance(64), opts);

    err << std::left << std::setw(14) << "quantity" << std::setw(24) << "computed" << std::setw(24)
        << "closed_form" << std::setw(12) << "abs_err" << std::setw(12) << "rel_err"
        << "status\n";
    for (const auto& r : result.rows) {
        err << std::left << std::setw(14) << r.quantity << std::setw(24) << g17(r.computed)
            << std::setw(24) << g17(r.expected) << std::setw(12) << std::setprecision(3)
            << std::scientific << r.abs_error << std::setw(12) << r.rel_error << std::defaultfloat
            << (r.pass ? "PASS" : "FAIL") << "\n";
    }
    err << (result.pass ? "PASS" : "FAIL") << " max relative error " << std::scientific
        << result.max_rel_error << " (tolerance " << rel_tol << ", nodes " << cfg.nodes << ")\n"
        << std::defaultfloat;

    if (cfg.format == Format::Csv) {
        std::ostringstream os;
        os << "quantity,computed,expected,abs_error,rel_error,tolerance,pass\n";
        for (const auto& r : result.rows) {
            os << r.quantity << "," << g17(r.computed) << "," << g17(r.expected) << ","
               << g17(r.abs_error) << "," << g17(r.rel_error) << "," << g17(r.tolerance) << ","
               << (r.pass ? "true" : "false") << "\n";
        }
        emit(cfg, out, os.str());
    } else {
        ordered_json doc;
        ordered_json c = config_json(cfg);
        c["sigma"] = num(cfg.sigma);
        c["T"] = num(cfg.T);
        c["A"] = num(cfg.A);
        c["s0"] = num(cfg.s0);
        c["rel_tol"] = num(rel_tol);
        doc["config"] = c;
        ordered_json cf;
        cf["K"] = num(result.closed_form.K);
        cf["u"] = num(result.closed_form.u);
        cf["y_hat"] = num(result.closed_form.y_hat);
        doc["closed_form"] = cf;
        ordered_json rows = ordered_json::array();
        for (const auto& r : result.rows) {
            ordered_json row;
            row["quantity"] = r.quantity;
            row["computed"] = num(r.computed);
            row["expected"] = num(r.expected);
            row["abs_error"] = num(r.abs_error);
            row["rel_error"] = num(r.rel_error);
            row["pass"] = r.pass;
            rows.push_back(row);
        }
        doc["comparisons"] = rows;
        doc["max_rel_error"] = num(result.max_rel_error);
        if (baseline) {
            ordered_json ref;
            ref["baseline_nodes"] = 64;
            ref["baseline_max_rel_error"] = num(baseline->max_rel_error);
            ref["max_rel_error"] = num(result.max_rel_error);
            ref["improved"] = result.max_rel_error <= baseline->max_rel_error;
            doc["refinement"] = ref;
        }
        doc["pass"] = result.pass;
        doc["wall_time_ms"] = num(timer.ms());
        doc["version"] = kVersion;
        emit(cfg, out, dump(doc));
    }
    return result.pass ? kOk : kNonConvergence;
}

int cmd_minimax(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const Scenario sc = load(cfg);
    if (sc.densities.empty()) throw ValidationError("minimax needs a 'densities' array in the scenario");
    const auto uf = UtilityFunction::parse(cfg.utility);
    MinimaxOptions opts;
    opts.seed = cfg.seed;
    opts.threads = cfg.threads;
    const auto r = minimax_check(sc.market, sc.densities, uf, cfg.wealth, opts);
    if (cfg.format == Format::Csv) {
        std::ostringstream os;
        os << "sup_inf,inf_sup,vertex_inf_sup,gap,grid_sup_inf,saddle\n"
           << g17(r.sup_inf) << "," << g17(r.inf_sup) << "," << g17(r.vertex_inf_sup) << ","
           << g17(r.gap) << "," << (r.grid_sup_inf ? g17(*r.grid_sup_inf) : "") << ","
           << (r.saddle ? "true" : "false") << "\n";
        emit(cfg, out, os.str());
        return kOk;
    }
    ordered_json doc;
    doc["config"] = config_json(cfg);
    ordered_json res;
    res["sup_inf"] = num(r.sup_inf);
    res["inf_sup"] = num(r.inf_sup);
    res["vertex_inf_sup"] = num(r.vertex_inf_sup);
    res["gap"] = num(r.gap);
    res["grid_sup_inf"] = r.grid_sup_inf ? num(*r.grid_sup_inf) : ordered_json(nullptr);
    res["hull_weights"] = nums(r.hull_weights);
    res["X_star"] = nums(r.X_star);
    res["j_star"] = r.j_star;
    res["saddle"] = r.saddle;
    doc["minimax"] = res;
    doc["version"] = kVersion;
    emit(cfg, out, dump(doc));
    return kOk;
}

int cmd_norms(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const Scenario sc = load(cfg);
    const auto uf = UtilityFunction::parse(cfg.utility);
    std::map<std::string, std::vector<double>> vectors = sc.vectors;
    if (vectors.empty()) vectors.emplace("ones", std::vector<double>(sc.market.size(), 1.0));
    const Modular mod_i(sc.market, uf, ModularKind::EtaStar);
    const Modular mod_j(sc.market, uf, ModularKind::Eta);

    ordered_json table;
    std::ostringstream csv;
    csv << "vector,modular,luxemburg,amemiya,luxemburg_conjugate,amemiya_conjugate\n";
    for (const auto& [name, z] : vectors) {
        ordered_json row;
        row["modular"] = num(mod_i(z));
        row["luxemburg"] = num(luxemburg_norm(mod_i, z));
        row["amemiya"] = num(amemiya_norm(mod_i, z));
        row["luxemburg_conjugate"] = num(luxemburg_norm(mod_j, z));
        row["amemiya_conjugate"] = num(amemiya_norm(mod_j, z));
        csv << name;
        for (const auto& [key, value] : row.items()) {
            csv << "," << (value.is_number() ? g17(value.get<double>()) : value.dump());
        }
        csv << "\n";
        table[name] = row;
    }
    if (cfg.format == Format::Csv) {
        emit(cfg, out, csv.str());
        return kOk;
    }
    ordered_json doc;
    doc["config"] = config_json(cfg);
    doc["norms"] = table;
    doc["version"] = kVersion;
    emit(cfg, out, dump(doc));
    return kOk;
}

int cmd_vcurve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const Scenario sc = load(cfg);
    const auto uf = UtilityFunction::parse(cfg.utility);
    if (cfg.y_grid.empty()) throw ValidationError("vcurve needs --y with at least one value");
    if (!sc.constraints.empty()) {
        const auto fr = feasibility_check(sc.market, sc.constraints, true);
        if (!fr.strictly_feasible) return report_infeasible(fr, err);
    }
    const auto curve = dual_value_curve(sc.market, sc.constraints, uf, cfg.y_grid,
                                        dual_options(cfg), cfg.threads);
    if (cfg.format == Format::Csv) {
        std::ostringstream os;
        os << "y,v\n";
        for (const auto& p : curve.points) os << g17(p.y) << "," << g17(p.v) << "\n";
        emit(cfg, out, os.str());
        return kOk;
    }
    ordered_json doc;
    doc["config"] = config_json(cfg);
    ordered_json pts = ordered_json::array();
    for (const auto& p : curve.points) pts.push_back({{"y", num(p.y)}, {"v", num(p.v)}});
    doc["curve"] = pts;
    doc["convex"] = curve.convex;
    doc["decreasing"] = curve.decreasing;
    doc["version"] = kVersion;
    emit(cfg, out, dump(doc));
    return kOk;
}

int cmd_feasibility(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const Scenario sc = load(cfg);
    const auto fr = feasibility_check(sc.market, sc.constraints, true);
    if (cfg.format == Format::Csv) {
        std::ostringstream os;
        os << "feasible,strictly_feasible,interior_margin\n"
           << (fr.feasible ? "true" : "false") << "," << (fr.strictly_feasible ? "true" : "false")
           << "," << g17(fr.interior_margin) << "\n";
        emit(cfg, out, os.str());
    } else {
        ordered_json doc;
        doc["config"] = config_json(cfg);
        ordered_json r;
        r["feasible"] = fr.feasible;
        r["strictly_feasible"] = fr.strictly_feasible;
        r["interior_margin"] = num(fr.interior_margin);
        r["witness"] = fr.witness ? nums(*fr.witness) : ordered_json(nullptr);
        doc["feasibility"] = r;
        doc["version"] = kVersion;
        emit(cfg, out, dump(doc));
    }
    if (!fr.strictly_feasible) return report_infeasible(fr, err);
    return kOk;
}

int cmd_gen_scenario(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    LognormalSpec spec{cfg.sigma, cfg.T, cfg.s0, cfg.nodes};
    spec.validate();
    ordered_json doc;
    doc["generator"] = {{"type", "lognormal"},
                        {"sigma", cfg.sigma},
                        {"T", cfg.T},
                        {"s0", cfg.s0},
                        {"nodes", cfg.nodes}};
    doc["constraints"] = ordered_json::array();
    if (cfg.with_constraint) {
        doc["constraints"].push_back({{"observable", "S_T"}, {"kind", "ge"}, {"bound", cfg.A}});
    }
    emit(cfg, out, dump(doc));
    return kOk;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (!(cfg.tol > 0.0)) throw ValidationError("--tol must be positive");
        if (cfg.command == "solve") return cmd_solve(cfg, out, err);
        if (cfg.command == "verify-bs") return cmd_verify_bs(cfg, out, err);
        if (cfg.command == "minimax") return cmd_minimax(cfg, out, err);
        if (cfg.command == "norms") return cmd_norms(cfg, out, err);
        if (cfg.command == "vcurve") return cmd_vcurve(cfg, out, err);
        if (cfg.command == "feasibility") return cmd_feasibility(cfg, out, err);
        if (cfg.command == "gen-scenario") return cmd_gen_scenario(cfg, out, err);
        throw ValidationError("unknown command '" + cfg.command + "'");
    } catch (const InfeasibleModel& e) {
        err << "infeasible: " << e.what() << "\n";
        return kInfeasible;
    } catch (const NonConvergence& e) {
        err << "non-convergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const UnboundedDual& e) {
        err << "unbounded dual: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const BracketFailure& e) {
        err << "non-convergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const ConvergenceError& e) {
        err << "non-convergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    }
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Robust utility maximization under moment-constrained model uncertainty"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string format = "json";

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--scenario", cfg.scenario, "Scenario JSON file");
        sub->add_option("--utility", cfg.utility, "Utility, power:<alpha>");
        sub->add_option("--wealth", cfg.wealth, "Initial wealth x > 0");
        sub->add_option("--tol", cfg.tol, "Dual KKT tolerance");
        sub->add_option("--nodes", cfg.nodes, "Gauss-Hermite nodes for generated markets");
        sub->add_option("--seed", cfg.seed, "Multistart seed");
        sub->add_option("--out", cfg.out, "Output path (default stdout)");
        sub->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--threads", cfg.threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--timing", cfg.timing, "Report measured wall time");
    };
    const auto lognormal = [&](CLI::App* sub) {
        sub->add_option("--sigma", cfg.sigma, "Volatility");
        sub->add_option("--T", cfg.T, "Horizon");
        sub->add_option("--A", cfg.A, "Lower bound on E[Z S_T]");
        sub->add_option("--s0", cfg.s0, "Initial price");
    };

    CLI::App* solve = app.add_subcommand("solve", "Solve the robust problem for a scenario");
    common(solve);
    CLI::App* verify = app.add_subcommand("verify-bs", "Compare with the lognormal closed forms");
    common(verify);
    lognormal(verify);
    verify->add_option("--rel-tol", cfg.rel_tol, "Relative tolerance (default by node count)");
    CLI::App* minimax = app.add_subcommand("minimax", "Check sup-inf = inf-sup on scenario densities");
    common(minimax);
    CLI::App* norms = app.add_subcommand("norms", "Luxemburg and Amemiya norms of scenario vectors");
    common(norms);
    CLI::App* vcurve = app.add_subcommand("vcurve", "Dual value function on a y grid");
    common(vcurve);
    vcurve->add_option("--y", cfg.y_grid, "Comma-separated y values")->delimiter(',');
    CLI::App* feas = app.add_subcommand("feasibility", "Strict feasibility of the constraint set");
    common(feas);
    CLI::App* gen = app.add_subcommand("gen-scenario", "Write a lognormal generator scenario");
    common(gen);
    lognormal(gen);
    bool no_constraint = false;
    gen->add_flag("--no-constraint", no_constraint, "Omit the E[Z S_T] >= A constraint");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }
    for (CLI::App* sub : app.get_subcommands()) cfg.command = sub->get_name();
    cfg.format = format == "csv" ? Format::Csv : Format::Json;
    cfg.with_constraint = !no_constraint;
    for (CLI::App* sub : app.get_subcommands()) {
        cfg.nodes_set = sub->count("--nodes") > 0;
    }
    return run(cfg, out, err);
}

}  // namespace robustutil::cli
