// cylasym: sweeps, refinement studies and hypothesis checks for order-2m
// Dirichlet problems on expanding cylinders.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <cylasym/cylasym.hpp>

namespace {

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != tok.size()) throw cylasym::ConfigError(std::string("malformed ") + what + " list '" + text + "'");
        out.push_back(v);
    }
    if (out.empty()) throw cylasym::ConfigError(std::string("empty ") + what + " list");
    return out;
}

int parse_degree(const std::string& text) {
    if (text == "auto") return 0;
    try {
        std::size_t used = 0;
        int d = std::stoi(text, &used);
        if (used == text.size() && d >= 1) return d;
    } catch (const std::exception&) {
    }
    throw cylasym::ConfigError("degree must be 'auto' or a positive integer");
}

void print_summary(std::ostream& os, const cylasym::ConvergenceReport& r) {
    char buf[160];
    os << "problem " << r.problem << " (" << r.problem_hash << ")\n";
    for (const auto& rec : r.records) {
        std::snprintf(buf, sizeof buf, "  l=%-6g dofs=%-7zu err_Hm=%.3e err_H2m_int=%.3e lemma19=%.4f\n", rec.ell,
                      rec.dofs, rec.err_Hm, rec.err_H2m_interior, rec.lemma19_ratio);
        os << buf;
    }
    auto rate = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a (fewer than 3 points above the floor)");
        char b[32];
        std::snprintf(b, sizeof b, "%.3f", *v);
        return std::string(b);
    };
    os << "  fitted rate H^m:  " << rate(r.fitted_rate_Hm) << "\n";
    os << "  fitted rate H^2m: " << rate(r.fitted_rate_H2m) << "\n";
    os << "  floor detected:   " << (r.floor_detected ? "yes" : "no") << "\n";
    std::snprintf(buf, sizeof buf, "  lemma19 max/min:  %.4f\n", r.lemma19.spread);
    os << buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Asymptotics of elliptic Dirichlet problems on expanding cylinders"};
    app.set_version_flag("--version", std::string(CYLASYM_VERSION));
    app.require_subcommand(1);

    cylasym::SweepPlan plan;
    std::string ells = "2,4,8,16", degree = "auto";
    auto* sweep = app.add_subcommand("sweep", "solve for a sequence of half-lengths and fit decay rates");
    sweep->add_option("--problem", plan.problem, "builtin name or config path")->required();
    sweep->add_option("--l", ells, "comma-separated half-lengths");
    sweep->add_option("--l0", plan.l0, "half-length of the observation window");
    sweep->add_option("--cells-per-unit", plan.cells_per_unit, "spline cells per unit length");
    sweep->add_option("--degree", degree, "spline degree or 'auto' (m+1)");
    sweep->add_option("--interior-margin", plan.interior_margin, "cross-section margin of the interior region");
    sweep->add_option("--workers", plan.workers, "worker threads over half-lengths");
    sweep->add_option("--solver-tol", plan.solver_tol, "relative residual tolerance");
    sweep->add_option("--out-csv", plan.out_csv, "CSV report path");
    sweep->add_option("--out-json", plan.out_json, "JSON report path");
    sweep->add_flag("--csv-timing", plan.csv_timing, "write wall times into the CSV");

    std::string rproblem, rcells = "8,16,32,64", rdegree = "auto", rout;
    double rell = 2;
    auto* refine = app.add_subcommand("refine", "grid refinement of the limit problem against its analytic solution");
    refine->add_option("--problem", rproblem, "builtin name")->required();
    refine->add_option("--l", rell, "half-length recorded with the table");
    refine->add_option("--cells", rcells, "comma-separated resolutions");
    refine->add_option("--degree", rdegree, "spline degree or 'auto' (m+1)");
    refine->add_option("--out-csv", rout, "CSV path (stdout when omitted)");

    std::string vproblem;
    auto* validate = app.add_subcommand("validate", "check the structural hypotheses of a problem");
    validate->add_option("--problem", vproblem, "builtin name or config path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : cylasym::exit_config;
    }

    try {
        if (*sweep) {
            plan.ells = parse_list(ells, "half-length");
            plan.degree = parse_degree(degree);
            plan.workers = cylasym::effective_workers(plan.workers);
            auto report = cylasym::run_sweep(plan);
            if (plan.out_csv.empty()) cylasym::write_csv(std::cout, report, plan.csv_timing);
            print_summary(std::cerr, report);
            return cylasym::exit_ok;
        }
        if (*refine) {
            auto spec = cylasym::resolve_problem(rproblem);
            auto table = cylasym::run_refinement(spec, rell, parse_list(rcells, "resolution"), parse_degree(rdegree));
            if (rout.empty()) {
                cylasym::write_refinement_csv(std::cout, table);
            } else {
                std::ofstream os(rout, std::ios::binary);
                if (!os) throw cylasym::ConfigError("cannot write " + rout);
                cylasym::write_refinement_csv(os, table);
            }
            std::fprintf(stderr, "observed H^%d order: %.3f (degree %d)\n", spec.m, table.observed_order_Hm, table.degree);
            return cylasym::exit_ok;
        }
        if (*validate) {
            auto spec = cylasym::resolve_problem(vproblem);
            spec.check_structure();
            auto out = cylasym::validate_problem(spec);
            nlohmann::json j = cylasym::hypotheses_json(out.hypotheses);
            j["problem"] = spec.name;
            j["discrete_coercivity"] = out.discrete_coercivity ? nlohmann::json(*out.discrete_coercivity) : nlohmann::json();
            std::cout << j.dump(2) << '\n';
            return out.hypotheses.passed() ? cylasym::exit_ok : cylasym::exit_hypothesis;
        }
    } catch (const cylasym::HypothesisFailure& e) {
        std::cerr << "error: " << e.what() << '\n' << cylasym::hypotheses_json(e.report()).dump(2) << '\n';
        return cylasym::exit_hypothesis;
    } catch (const cylasym::SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return cylasym::exit_solver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cylasym::exit_config;
    }
    return cylasym::exit_config;
}
