#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "box.hpp"
#include "discretization.hpp"
#include "multiindex.hpp"
#include "problem.hpp"

namespace cylasym {

/// sqrt(sum_{|alpha|<=m} ||D^alpha u||^2_{L2(box)}) by composite 3-point
/// Gauss quadrature on round(extent * cells_per_unit) cells per axis.
template <PointEvaluator E>
double norm_hm(const E& u, const Box& box, int m, double cells_per_unit) {
    if (m < 0) throw std::invalid_argument("norm order must be nonnegative");
    if (!(cells_per_unit > 0)) throw std::invalid_argument("quadrature resolution must be positive");
    const std::size_t nd = box.dim();
    const auto alphas = enumerate_upto(nd, m);
    const GaussRule rule(3);
    std::vector<std::vector<double>> xs(nd), ws(nd);
    for (std::size_t k = 0; k < nd; ++k) {
        long cells = std::max(1L, std::lround(box.extent(k) * cells_per_unit));
        double h = box.extent(k) / static_cast<double>(cells);
        for (long c = 0; c < cells; ++c) {
            double a = box.lo[k] + h * static_cast<double>(c);
            for (std::size_t q = 0; q < rule.size(); ++q) {
                xs[k].push_back(a + 0.5 * h * (1.0 + rule.nodes[q]));
                ws[k].push_back(0.5 * h * rule.weights[q]);
            }
        }
    }
    std::vector<std::size_t> idx(nd, 0);
    std::vector<double> x(nd), vals(alphas.size());
    double total = 0.0;
    for (;;) {
        double w = 1.0;
        for (std::size_t k = 0; k < nd; ++k) {
            x[k] = xs[k][idx[k]];
            w *= ws[k][idx[k]];
        }
        u(std::span<const double>(x), std::span<const MultiIndex>(alphas), std::span<double>(vals));
        double s = 0.0;
        for (double v : vals) s += v * v;
        if (!std::isfinite(s)) throw std::domain_error("evaluator returned a non-finite value");
        total += w * s;
        std::size_t k = nd;
        while (k-- > 0) {
            if (idx[k] + 1 < xs[k].size()) {
                ++idx[k];
                break;
            }
            idx[k] = 0;
        }
        if (k == static_cast<std::size_t>(-1)) break;
    }
    return std::sqrt(total);
}

/// ||u_l - u_inf||_{H^m(Omega_l0)} with u_inf read as constant in X1.
template <PointEvaluator Cyl, PointEvaluator Lim>
double error_hm(const Cyl& u_l, const Box& cyl_domain, const Lim& u_inf, const Box& omega, double l0, std::size_t p,
                int m, double cells_per_unit) {
    const Box region = Box::centered_cube(p, l0).times(omega);
    if (!cyl_domain.contains(region)) throw std::domain_error("Omega_l0 is not contained in the field's domain");
    AxialExtension<Lim> ext(u_inf, p);
    Difference<Cyl, AxialExtension<Lim>> diff(u_l, ext);
    return norm_hm(diff, region, m, cells_per_unit);
}

inline double error_hm(const DiscreteField& u_l, const DiscreteField& u_inf, double l0, std::size_t p, int m,
                       double cells_per_unit) {
    return error_hm(u_l, u_l.domain(), u_inf, u_inf.domain(), l0, p, m, cells_per_unit);
}

namespace detail {

/// Smoothstep of order m: S(0)=0, S(1)=1, S^(k)(0)=S^(k)(1)=0 for 1<=k<=m.
inline Polynomial1D smoothstep(int m) {
    Polynomial1D s;
    s.coeffs.assign(static_cast<std::size_t>(2 * m + 2), 0.0);
    for (int k = 0; k <= m; ++k) {
        double c = static_cast<double>(binomial(m + k, k) * binomial(2 * m + 1, m - k));
        s.coeffs[static_cast<std::size_t>(m + 1 + k)] = (k % 2 == 0 ? c : -c);
    }
    return s;
}

/// k-th derivative of the even 1D bump: 1 on [-1/2,1/2], 0 outside (-1,1).
inline double bump_1d(const Polynomial1D& step, double t, int k) {
    const double a = std::abs(t);
    if (a >= 1.0) return 0.0;
    if (a <= 0.5) return k == 0 ? 1.0 : 0.0;
    double v = -std::ldexp(step(2.0 * a - 1.0, k), k);
    if (k == 0) v += 1.0;
    return (t < 0 && k % 2 == 1) ? -v : v;
}

}  // namespace detail

/// D^alpha of rho(X1 / l1), rho the tensor product of C^m bumps.
inline double cutoff_rho(double l1, std::span<const double> X1, const MultiIndex& alpha, int m) {
    if (!(l1 > 0)) throw std::invalid_argument("cutoff scale must be positive");
    if (alpha.size() != X1.size()) throw std::invalid_argument("multi-index dimension does not match the point");
    if (alpha.max_entry() > m) throw std::invalid_argument("cutoff is only C^m");
    const Polynomial1D step = detail::smoothstep(m);
    double v = 1.0;
    for (std::size_t k = 0; k < X1.size() && v != 0.0; ++k)
        v *= detail::bump_1d(step, X1[k] / l1, alpha[k]) * std::pow(l1, -alpha[k]);
    return v;
}

/// w(x) * rho(X1 / l1), differentiated with the Leibniz rule.
template <PointEvaluator W>
class CutoffProduct {
public:
    CutoffProduct(const W& w, double l1, std::size_t p, int m) : w_(w), l1_(l1), p_(p), m_(m) {}

    void operator()(std::span<const double> x, std::span<const MultiIndex> alphas, std::span<double> out) const {
        std::vector<MultiIndex> need;
        for (const auto& a : alphas)
            for (const auto& b : sub_indices(a, false))
                if (std::find(need.begin(), need.end(), b) == need.end()) need.push_back(b);
        std::vector<double> wv(need.size());
        w_(x, std::span<const MultiIndex>(need), std::span<double>(wv));
        const auto X1 = x.first(p_);
        for (std::size_t s = 0; s < alphas.size(); ++s) {
            double acc = 0.0;
            for (const auto& b : sub_indices(alphas[s], false)) {
                const MultiIndex rest = alphas[s] - b;
                bool axial = true;
                for (std::size_t k = p_; k < rest.size(); ++k) axial &= rest[k] == 0;
                if (!axial) continue;
                double r = cutoff_rho(l1_, X1, rest.slice(0, p_), m_);
                if (r == 0.0) continue;
                auto it = std::find(need.begin(), need.end(), b);
                acc += static_cast<double>(multi_binom(alphas[s], b)) * wv[static_cast<std::size_t>(it - need.begin())] * r;
            }
            out[s] = acc;
        }
    }

private:
    const W& w_;
    double l1_;
    std::size_t p_;
    int m_;
};

/// ||(u_l - u_inf) rho(X1/l1)||_{H^m(Omega_l1)}.
inline double localized_energy(const DiscreteField& u_l, const DiscreteField& u_inf, double l1, std::size_t p, int m,
                               double cells_per_unit, bool apply_cutoff = true) {
    const Box region = Box::centered_cube(p, l1).times(u_inf.domain());
    if (!u_l.domain().contains(region)) throw std::domain_error("l1 exceeds the cylinder half-length");
    AxialExtension<DiscreteField> ext(u_inf, p);
    Difference<DiscreteField, AxialExtension<DiscreteField>> diff(u_l, ext);
    if (!apply_cutoff) return norm_hm(diff, region, m, cells_per_unit);
    CutoffProduct<decltype(diff)> prod(diff, l1, p, m);
    return norm_hm(prod, region, m, cells_per_unit);
}

struct InteriorEstimate {
    MultiIndex gamma;
    double value;
};

struct ErrorRecord {
    double ell = 0.0;
    std::size_t dofs = 0;
    double err_L2 = 0.0;
    double err_Hm = 0.0;
    double err_H2m_interior = 0.0;
    double norm_ul_Hm_full = 0.0;
    double lemma19_ratio = 0.0;  // ||u_l||_{H^m(Omega_l)} / (l^{p/2} ||u_inf||_{H^m(omega)})
    double solver_residual = 0.0;
    int solver_iterations = 0;
    double wall_time_s = 0.0;
    std::vector<InteriorEstimate> interior;  // all |gamma| <= m, strict interior region
    std::vector<InteriorEstimate> axial;     // gamma in N1, |gamma| <= m, on Omega_l0
};

struct FloorPolicy {
    double max_ratio = 0.9;
    double min_error = 1e-12;
};

struct RateFit {
    double rate;
    std::vector<bool> included;
};

class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, std::vector<bool> included)
        : std::runtime_error(what), included_(std::move(included)) {}
    const std::vector<bool>& included() const noexcept { return included_; }

private:
    std::vector<bool> included_;
};

/// Floor mask: a point is flagged when it is below min_error or when its
/// ratio to the previous point exceeds max_ratio; once flagged, every later
/// point is flagged too.
inline std::vector<bool> floor_mask(std::span<const std::pair<double, double>> points, const FloorPolicy& policy = {}) {
    std::vector<bool> ok(points.size(), true);
    bool floored = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double e = points[i].second;
        if (e < policy.min_error) floored = true;
        if (i > 0 && e / points[i - 1].second > policy.max_ratio) floored = true;
        ok[i] = !floored;
    }
    return ok;
}

/// Least-squares slope of log(error) against log(ell) over the points that
/// are not floor-flagged; returns minus the slope. Zero errors sit below the
/// floor.
inline RateFit fit_rate(std::span<const std::pair<double, double>> points, const FloorPolicy& policy = {}) {
    if (points.size() < 3) throw FitError("rate fit needs at least 3 points", std::vector<bool>(points.size(), false));
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!(points[i].second >= 0) || !std::isfinite(points[i].second))
            throw std::invalid_argument("errors must be nonnegative and finite");
        if (!(points[i].first > 0) || (i > 0 && !(points[i].first > points[i - 1].first)))
            throw std::invalid_argument("ell values must be positive and strictly increasing");
    }
    RateFit fit{0.0, floor_mask(points, policy)};
    double n = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (fit.included[i]) {
            n += 1;
            sx += std::log(points[i].first);
            sy += std::log(points[i].second);
        }
    if (n < 3) throw FitError("fewer than 3 points above the error floor", fit.included);
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (fit.included[i]) {
            double dx = std::log(points[i].first) - mx;
            sxx += dx * dx;
            sxy += dx * (std::log(points[i].second) - my);
        }
    fit.rate = -sxy / sxx;
    return fit;
}

struct Lemma19Result {
    std::vector<double> ratios;
    double max_ratio = 0.0;
    double spread = 1.0;  // max / min
    bool pass = true;
};

/// Boundedness of the normalized norm ratios: pass when the maximum stays within 3x
/// of the first record's value.
inline Lemma19Result lemma19_check(std::span<const ErrorRecord> records) {
    Lemma19Result r;
    if (records.empty()) return r;
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& rec : records) {
        const double v = rec.lemma19_ratio;
        if (!std::isfinite(v)) r.pass = false;
        r.ratios.push_back(v);
        r.max_ratio = std::max(r.max_ratio, v);
        lo = std::min(lo, v);
    }
    r.spread = lo > 0 ? r.max_ratio / lo : std::numeric_limits<double>::infinity();
    r.pass = r.pass && r.max_ratio <= 3.0 * r.ratios.front();
    return r;
}

struct ConvergenceReport {
    std::string problem;
    std::string problem_hash;
    std::vector<ErrorRecord> records;
    std::optional<double> fitted_rate_Hm;
    std::optional<double> fitted_rate_H2m;
    std::vector<bool> included_Hm, included_H2m;
    bool floor_detected = false;
    double norm_uinf_Hm = 0.0;
    std::size_t limit_dofs = 0;
    double limit_residual = 0.0;
    Lemma19Result lemma19;
    std::vector<std::pair<double, double>> localized;  // (l1, energy) at the largest ell
    HypothesisReport hypotheses;
    nlohmann::json settings = nlohmann::json::object();
    double wall_time_s = 0.0;
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json estimates_json(const std::vector<InteriorEstimate>& es) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& e : es) j[e.gamma.code()] = e.value;
    return j;
}

}  // namespace detail

inline const char* csv_header() {
    return "ell,dofs,err_L2,err_Hm,err_H2m_interior,norm_ul_Hm_full,lemma19_ratio,solver_residual,wall_time_s";
}

/// One record per row. Timings are written as 0 unless `with_timing`, so
/// repeated runs give identical bytes.
inline void write_csv(std::ostream& os, const ConvergenceReport& report, bool with_timing = false) {
    using detail::fmt_double;
    os << csv_header() << '\n';
    for (const auto& r : report.records) {
        os << fmt_double(r.ell) << ',' << r.dofs << ',' << fmt_double(r.err_L2) << ',' << fmt_double(r.err_Hm) << ','
           << fmt_double(r.err_H2m_interior) << ',' << fmt_double(r.norm_ul_Hm_full) << ','
           << fmt_double(r.lemma19_ratio) << ',' << fmt_double(r.solver_residual) << ','
           << fmt_double(with_timing ? r.wall_time_s : 0.0) << '\n';
    }
}

inline nlohmann::json hypotheses_json(const HypothesisReport& h) {
    nlohmann::json sup = nlohmann::json::object();
    for (const auto& [key, v] : h.sup_bounds) sup[key] = v;
    return {{"forcing_x1_independent", h.forcing_x1_independent},
            {"coefficients_x1_independent", h.coefficients_x1_independent},
            {"x1_dependent_fields", h.x1_dependent_fields},
            {"lambda_hat", detail::number_or_null(h.lambda_hat)},
            {"elliptic", h.elliptic},
            {"bounded", h.bounded},
            {"sup_bounds", sup},
            {"warnings", h.warnings},
            {"sample_count", h.sample_count},
            {"seed", h.seed},
            {"passed", h.passed()}};
}

inline nlohmann::json to_json(const ConvergenceReport& report) {
    using nlohmann::json;
    json recs = json::array();
    for (std::size_t i = 0; i < report.records.size(); ++i) {
        const auto& r = report.records[i];
        recs.push_back({{"ell", r.ell},
                        {"dofs", r.dofs},
                        {"err_L2", r.err_L2},
                        {"err_Hm", r.err_Hm},
                        {"err_H2m_interior", r.err_H2m_interior},
                        {"norm_ul_Hm_full", r.norm_ul_Hm_full},
                        {"lemma19_ratio", r.lemma19_ratio},
                        {"solver_residual", r.solver_residual},
                        {"solver_iterations", r.solver_iterations},
                        {"wall_time_s", r.wall_time_s},
                        {"interior_differences", detail::estimates_json(r.interior)},
                        {"axial_differences_on_omega_l0", detail::estimates_json(r.axial)},
                        {"fit_included_Hm", i < report.included_Hm.size() && report.included_Hm[i]},
                        {"fit_included_H2m", i < report.included_H2m.size() && report.included_H2m[i]}});
    }
    json localized = json::array();
    for (const auto& [l1, e] : report.localized) localized.push_back({{"l1", l1}, {"energy", e}});
    return {{"tool", "cylasym"},
            {"version", CYLASYM_VERSION},
            {"problem", report.problem},
            {"problem_hash", report.problem_hash},
            {"settings", report.settings},
            {"hypotheses", hypotheses_json(report.hypotheses)},
            {"limit", {{"dofs", report.limit_dofs}, {"norm_Hm", report.norm_uinf_Hm}, {"solver_residual", report.limit_residual}}},
            {"records", recs},
            {"fitted_rate_Hm", report.fitted_rate_Hm ? json(*report.fitted_rate_Hm) : json()},
            {"fitted_rate_H2m", report.fitted_rate_H2m ? json(*report.fitted_rate_H2m) : json()},
            {"floor_detected", report.floor_detected},
            {"lemma19", {{"ratios", report.lemma19.ratios}, {"max_ratio", report.lemma19.max_ratio},
                         {"spread", detail::number_or_null(report.lemma19.spread)}, {"pass", report.lemma19.pass}}},
            {"localized_energy", localized},
            {"difference_quotient_convention", "divided differences without a 1/alpha! factor"},
            {"wall_time_s", report.wall_time_s}};
}

}  // namespace cylasym
