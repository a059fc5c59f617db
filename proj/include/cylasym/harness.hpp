#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "analysis.hpp"
#include "discretization.hpp"
#include "fdcalc.hpp"
#include "linalg.hpp"
#include "problem.hpp"

namespace cylasym {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_hypothesis = 2, exit_solver = 3 };

class HypothesisFailure : public std::runtime_error {
public:
    explicit HypothesisFailure(HypothesisReport report)
        : std::runtime_error("problem fails the structural hypotheses"), report_(std::move(report)) {}
    const HypothesisReport& report() const noexcept { return report_; }

private:
    HypothesisReport report_;
};

struct SweepPlan {
    std::string problem = "poisson_strip";  // builtin name or config path
    std::vector<double> ells{2, 4, 8, 16};
    double l0 = 1.0;
    double cells_per_unit = 16;
    int degree = 0;  // 0: m + 1
    double interior_margin = 0.25;
    int workers = 1;
    double solver_tol = 1e-12;
    bool localized = true;
    bool csv_timing = false;
    std::string out_csv, out_json;
};

/// Builtin name or path to a config file.
inline ProblemSpec resolve_problem(const std::string& source) {
    if (is_builtin_problem(source)) return builtin_problem(source);
    return load_problem_config(source);
}

inline int resolved_degree(const SweepPlan& plan, int m) { return plan.degree > 0 ? plan.degree : default_degree(m); }

/// (-l0/2, l0/2)^p x omega shrunk by `margin` of its extent on each side.
inline Box interior_region(const ProblemSpec& spec, double l0, double margin) {
    Box inner = spec.omega;
    for (std::size_t k = 0; k < inner.dim(); ++k) {
        double e = spec.omega.extent(k);
        inner.lo[k] += margin * e;
        inner.hi[k] -= margin * e;
    }
    return Box::centered_cube(spec.p, 0.5 * l0).times(inner);
}

inline double lattice_spacing(double cells_per_unit) { return 0.5 / cells_per_unit; }

inline void validate_plan(const SweepPlan& plan, const ProblemSpec& spec) {
    if (plan.ells.empty()) throw ConfigError("no ell values given");
    for (std::size_t i = 1; i < plan.ells.size(); ++i)
        if (!(plan.ells[i] > plan.ells[i - 1])) throw ConfigError("ell values must be strictly increasing");
    if (!(plan.l0 > 0)) throw ConfigError("l0 must be positive");
    if (!(plan.ells.front() > plan.l0)) throw ConfigError("the smallest ell must exceed l0");
    if (!(plan.cells_per_unit >= 2 * spec.m + 1))
        throw ConfigError("resolution must be at least 2m+1 = " + std::to_string(2 * spec.m + 1) + " cells per unit");
    if (plan.degree < 0) throw ConfigError("spline degree must be positive or 0 for auto");
    const int d = resolved_degree(plan, spec.m);
    if (d < spec.m) throw ConfigError("spline degree must be at least m");
    if (!(plan.interior_margin >= 0 && plan.interior_margin < 0.5)) throw ConfigError("interior margin must lie in [0, 0.5)");
    if (plan.workers < 1) throw ConfigError("worker count must be positive");
    if (!(plan.solver_tol > 0)) throw ConfigError("solver tolerance must be positive");
    const double h = lattice_spacing(plan.cells_per_unit);
    auto aligned = [h](double extent) {
        double c = extent / h;
        return std::abs(c - std::round(c)) <= 1e-9 * std::max(1.0, c) && std::round(c) >= 1;
    };
    const Box inner = interior_region(spec, plan.l0, plan.interior_margin);
    const Box base = spec.cylinder(plan.l0);
    for (std::size_t k = 0; k < inner.dim(); ++k)
        if (!aligned(inner.extent(k)) || !aligned(base.extent(k)))
            throw ConfigError("interior regions are not aligned with the difference lattice (h = cell/2)");
    for (double l : plan.ells)
        for (std::size_t k = 0; k < spec.cylinder(l).dim(); ++k) {
            double c = spec.cylinder(l).extent(k) * plan.cells_per_unit;
            if (std::abs(c - std::round(c)) > 1e-9 * std::max(1.0, c))
                throw ConfigError("cylinder extents must be whole multiples of the cell size");
        }
}

/// CYLASYM_WORKERS, when set to a positive integer, replaces `requested`.
inline int effective_workers(int requested) {
    if (const char* env = std::getenv("CYLASYM_WORKERS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    return requested;
}

/// Solves an assembled system and wraps the solution as a field.
inline std::pair<DiscreteField, SolveResult> solve_system(const AssembledSystem& sys, double tol) {
    SolverOptions opt;
    opt.tol = tol;
    SolveResult r = solve(sys.matrix, sys.rhs, sys.symmetric, opt);
    DiscreteField u(sys.basis, r.x);
    return {std::move(u), std::move(r)};
}

/// The per-ell measurements of a sweep, given the shared limit solution.
inline ErrorRecord measure_ell(const ProblemSpec& spec, const SweepPlan& plan, const DiscreteField& u_inf,
                               double norm_uinf, double l) {
    const auto t0 = std::chrono::steady_clock::now();
    const int d = resolved_degree(plan, spec.m);
    const double res = plan.cells_per_unit;
    AssembledSystem sys = assemble_cylinder(spec, l, res, d);
    auto [u_l, sol] = solve_system(sys, plan.solver_tol);

    ErrorRecord rec;
    rec.ell = l;
    rec.dofs = sys.basis->dof_count();
    rec.solver_residual = sol.residual;
    rec.solver_iterations = sol.iterations;
    rec.err_L2 = error_hm(u_l, u_inf, plan.l0, spec.p, 0, res);
    rec.err_Hm = error_hm(u_l, u_inf, plan.l0, spec.p, spec.m, res);
    rec.norm_ul_Hm_full = norm_hm(u_l, u_l.domain(), spec.m, res);
    rec.lemma19_ratio = rec.norm_ul_Hm_full / (std::pow(l, 0.5 * static_cast<double>(spec.p)) * norm_uinf);

    AxialExtension<DiscreteField> ext(u_inf, spec.p);
    Difference<DiscreteField, AxialExtension<DiscreteField>> diff(u_l, ext);
    const double h = lattice_spacing(res);
    const Box base = spec.cylinder(plan.l0);
    const Box inner = interior_region(spec, plan.l0, plan.interior_margin);
    double sq = 0.0;
    for (const auto& g : enumerate_upto(spec.n, spec.m)) {
        double e = interior_derivative_error(diff, g, inner, h, spec.m, spec.p, base);
        rec.interior.push_back({g, e});
        sq += e * e;
    }
    rec.err_H2m_interior = std::sqrt(sq);
    for (const auto& g : enumerate_upto(spec.n, spec.m))
        if (in_N1(g, spec.p, spec.m))
            rec.axial.push_back({g, interior_derivative_error(diff, g, base, h, spec.m, spec.p, u_l.domain())});
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

/// Runs `job(i)` for i in [0, count) on up to `workers` threads. Exceptions
/// are collected per job and the one with the smallest index is rethrown.
template <class Job>
void run_pool(std::size_t count, int workers, Job&& job) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                job(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Fits the rate over a series, recording the mask and whether a floor was hit.
inline std::optional<double> fit_series(const std::vector<ErrorRecord>& recs, double ErrorRecord::*field,
                                        std::vector<bool>& mask, bool& floor) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : recs) pts.emplace_back(r.ell, r.*field);
    mask = floor_mask(pts);
    for (bool b : mask) floor |= !b;
    try {
        return fit_rate(pts).rate;
    } catch (const FitError&) {
        floor = true;
        return std::nullopt;
    }
}

/// Limit solve, per-ell solves over a worker pool, rate fits and reports.
/// Throws ConfigError, HypothesisFailure or SolverError.
inline ConvergenceReport run_sweep(const ProblemSpec& spec, const SweepPlan& plan) {
    const auto t0 = std::chrono::steady_clock::now();
    spec.check_structure();
    validate_plan(plan, spec);
    HypothesisReport hyp = validate_hypotheses(spec);
    if (!hyp.passed()) throw HypothesisFailure(hyp);

    const int d = resolved_degree(plan, spec.m);
    ConvergenceReport report;
    report.problem = spec.name;
    report.problem_hash = hex64(fnv1a(spec.canonical_text()));
    report.hypotheses = hyp;
    report.settings = {{"ells", plan.ells},
                       {"l0", plan.l0},
                       {"cells_per_unit", plan.cells_per_unit},
                       {"degree", d},
                       {"interior_margin", plan.interior_margin},
                       {"lattice_h", lattice_spacing(plan.cells_per_unit)},
                       {"solver_tol", plan.solver_tol},
                       {"workers", plan.workers}};

    AssembledSystem lim = assemble_limit(spec, plan.cells_per_unit, d);
    auto [u_inf, lim_sol] = solve_system(lim, plan.solver_tol);
    report.limit_dofs = lim.basis->dof_count();
    report.limit_residual = lim_sol.residual;
    report.norm_uinf_Hm = norm_hm(u_inf, u_inf.domain(), spec.m, plan.cells_per_unit);

    report.records.resize(plan.ells.size());
    run_pool(plan.ells.size(), plan.workers,
             [&](std::size_t i) { report.records[i] = measure_ell(spec, plan, u_inf, report.norm_uinf_Hm, plan.ells[i]); });

    report.fitted_rate_Hm = fit_series(report.records, &ErrorRecord::err_Hm, report.included_Hm, report.floor_detected);
    report.fitted_rate_H2m =
        fit_series(report.records, &ErrorRecord::err_H2m_interior, report.included_H2m, report.floor_detected);
    report.lemma19 = lemma19_check(report.records);

    if (plan.localized) {
        const double l = plan.ells.back();
        AssembledSystem sys = assemble_cylinder(spec, l, plan.cells_per_unit, d);
        auto [u_l, sol] = solve_system(sys, plan.solver_tol);
        for (int k = 0; k < 4; ++k) {
            double l1 = l / std::ldexp(1.0, k);
            report.localized.emplace_back(l1, localized_energy(u_l, u_inf, l1, spec.p, spec.m, plan.cells_per_unit));
        }
    }
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!plan.out_csv.empty()) {
        std::ofstream os(plan.out_csv, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + plan.out_csv);
        write_csv(os, report, plan.csv_timing);
    }
    if (!plan.out_json.empty()) {
        std::ofstream os(plan.out_json, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + plan.out_json);
        os << to_json(report).dump(2) << '\n';
    }
    return report;
}

inline ConvergenceReport run_sweep(const SweepPlan& plan) { return run_sweep(resolve_problem(plan.problem), plan); }

struct RefinementRow {
    double cells_per_unit;
    std::size_t dofs;
    double err_L2, err_Hm;
    double order_L2, order_Hm;  // NaN on the first row
};

struct RefinementTable {
    std::string problem;
    double ell;
    int degree;
    std::vector<RefinementRow> rows;
    double observed_order_Hm;  // least-squares slope over all rows
};

/// Limit-problem errors against the analytic cross-section solution per
/// resolution. The limit problem does not depend on ell; it is carried along
/// for the table header only.
inline RefinementTable run_refinement(const ProblemSpec& spec, double ell, const std::vector<double>& resolutions,
                                      int degree = 0, double solver_tol = 1e-10) {
    spec.check_structure();
    if (resolutions.size() < 3) throw ConfigError("refinement needs at least 3 resolutions");
    for (std::size_t i = 1; i < resolutions.size(); ++i)
        if (!(resolutions[i] > resolutions[i - 1])) throw ConfigError("resolutions must be strictly increasing");
    if (!spec.exact_limit) throw ConfigError("problem '" + spec.name + "' has no analytic limit solution");
    if (spec.cross_dim() != 1) throw ConfigError("analytic limits are one-dimensional");
    RefinementTable t{spec.name, ell, degree > 0 ? degree : default_degree(spec.m), {}, NAN};
    if (t.degree < spec.m) throw ConfigError("spline degree must be at least m");
    ExactLimit exact(*spec.exact_limit);
    std::vector<std::pair<double, double>> pts;
    for (double res : resolutions) {
        AssembledSystem sys = assemble_limit(spec, res, t.degree);
        auto [u, sol] = solve_system(sys, solver_tol);
        Difference<DiscreteField, ExactLimit> diff(u, exact);
        RefinementRow row{res, sys.basis->dof_count(), norm_hm(diff, spec.omega, 0, res),
                          norm_hm(diff, spec.omega, spec.m, res), NAN, NAN};
        if (!t.rows.empty()) {
            const auto& prev = t.rows.back();
            double r = std::log(res / prev.cells_per_unit);
            row.order_L2 = std::log(prev.err_L2 / row.err_L2) / r;
            row.order_Hm = std::log(prev.err_Hm / row.err_Hm) / r;
        }
        t.rows.push_back(row);
        pts.emplace_back(res, row.err_Hm);
    }
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [r, e] : pts) {
        if (!(e > 0)) continue;
        double x = std::log(r), y = std::log(e);
        n += 1;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    if (n >= 2) t.observed_order_Hm = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
    return t;
}

inline void write_refinement_csv(std::ostream& os, const RefinementTable& t) {
    using detail::fmt_double;
    os << "cells_per_unit,dofs,err_L2,err_Hm,order_L2,order_Hm\n";
    for (const auto& r : t.rows)
        os << fmt_double(r.cells_per_unit) << ',' << r.dofs << ',' << fmt_double(r.err_L2) << ','
           << fmt_double(r.err_Hm) << ',' << (std::isnan(r.order_L2) ? std::string() : fmt_double(r.order_L2)) << ','
           << (std::isnan(r.order_Hm) ? std::string() : fmt_double(r.order_Hm)) << '\n';
}

struct ValidationOutcome {
    HypothesisReport hypotheses;
    std::optional<double> discrete_coercivity;  // smallest Ritz value of the cylinder matrix at ell = 2
};

/// Hypothesis report plus a discrete coercivity probe; the probe only warns.
inline ValidationOutcome validate_problem(const ProblemSpec& spec, double cells_per_unit = 8) {
    ValidationOutcome out;
    out.hypotheses = validate_hypotheses(spec);
    try {
        AssembledSystem sys = assemble_cylinder(spec, 2.0, std::max(cells_per_unit, 2.0 * spec.m + 1), default_degree(spec.m));
        if (!sys.symmetric) {
            out.hypotheses.warnings.push_back("coercivity probe skipped: the form is not symmetric");
        } else {
            out.discrete_coercivity = smallest_ritz_estimate(sys.matrix, 20, 1e-10);
            if (!(*out.discrete_coercivity > 0))
                out.hypotheses.warnings.push_back("discrete coercivity probe found a non-positive Ritz value");
        }
    } catch (const std::exception& e) {
        out.hypotheses.warnings.push_back(std::string("coercivity probe failed: ") + e.what());
    }
    return out;
}

}  // namespace cylasym
