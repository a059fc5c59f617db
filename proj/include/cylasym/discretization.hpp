#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bspline.hpp"
#include "linalg.hpp"
#include "multiindex.hpp"
#include "problem.hpp"

namespace cylasym {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes, weights;

    explicit GaussRule(int points) {
        if (points < 1) throw std::invalid_argument("quadrature needs at least one point");
        const int n = points;
        nodes.resize(static_cast<std::size_t>(n));
        weights.resize(static_cast<std::size_t>(n));
        // P_n(x) and P_n'(x) by the three-term recurrence
        auto legendre = [n](double x, double& dp) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            return p1;
        };
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double dx = legendre(x, dp) / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            legendre(x, dp);
            double w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[static_cast<std::size_t>(i)] = -x;
            nodes[static_cast<std::size_t>(n - 1 - i)] = x;
            weights[static_cast<std::size_t>(i)] = w;
            weights[static_cast<std::size_t>(n - 1 - i)] = w;
        }
        if (n % 2 == 1) nodes[static_cast<std::size_t>(n / 2)] = 0.0;
    }

    std::size_t size() const noexcept { return nodes.size(); }
};

/// One term a(x) D^trial u D^test v of a bilinear form, with multi-indices
/// over the coordinates of the basis the form is assembled on.
struct FormTerm {
    MultiIndex trial, test;
    const ScalarField* coefficient;
};

/// Bilinear form plus load functional on a tensor basis. `embed` maps a point
/// of the basis domain to the coordinates the fields are written in.
struct FormSpec {
    std::vector<FormTerm> terms;
    const ScalarField* forcing = nullptr;
    std::function<void(std::span<const double>, std::vector<double>&)> embed;
    bool symmetric = false;
};

struct AssembledSystem {
    std::shared_ptr<const TensorBasis> basis;
    CsrMatrix matrix;
    std::vector<double> rhs;
    bool symmetric = false;
};

/// Sparsity of the Galerkin matrix: dofs interact when their per-axis indices
/// differ by at most the degree.
inline CsrMatrix galerkin_pattern(const TensorBasis& basis) {
    const std::size_t nd = basis.dim();
    const int d = basis.degree();
    std::vector<std::size_t> rp{0}, cols;
    std::vector<int> lo(nd), hi(nd), cur(nd);
    for (std::size_t row = 0; row < basis.dof_count(); ++row) {
        auto idx = basis.unflatten(row);
        for (std::size_t k = 0; k < nd; ++k) {
            lo[k] = std::max(0, idx[k] - d);
            hi[k] = std::min(basis.factor(k).size() - 1, idx[k] + d);
            cur[k] = lo[k];
        }
        for (;;) {
            std::size_t col = 0;
            for (std::size_t k = 0; k < nd; ++k) col += static_cast<std::size_t>(cur[k]) * basis.stride(k);
            cols.push_back(col);
            std::size_t k = nd;
            while (k-- > 0) {
                if (cur[k] < hi[k]) {
                    ++cur[k];
                    break;
                }
                cur[k] = lo[k];
            }
            if (k == static_cast<std::size_t>(-1)) break;
        }
        rp.push_back(cols.size());
    }
    return CsrMatrix(basis.dof_count(), std::move(rp), std::move(cols));
}

namespace detail {

/// Per-cell scratch: quadrature points, weights, and derivatives of the local
/// tensor functions.
class CellKernel {
public:
    CellKernel(const TensorBasis& basis, int max_order, int points_per_axis)
        : basis_(basis), rule_(points_per_axis), max_order_(max_order) {
        nd_ = basis.dim();
        w_ = static_cast<std::size_t>(basis.degree() + 1);
        local_ = 1;
        for (std::size_t k = 0; k < nd_; ++k) local_ *= w_;
    }

    std::size_t local_count() const noexcept { return local_; }
    std::size_t points_per_axis() const noexcept { return rule_.size(); }

    /// Loops over every cell in row-major order.
    template <class F>
    void for_each_cell(F&& f) const {
        std::vector<int> cell(nd_, 0);
        for (;;) {
            f(std::as_const(cell));
            std::size_t k = nd_;
            while (k-- > 0) {
                if (cell[k] + 1 < basis_.factor(k).cells()) {
                    ++cell[k];
                    break;
                }
                cell[k] = 0;
            }
            if (k == static_cast<std::size_t>(-1)) break;
        }
    }

    /// Global dof of each local function on `cell` (-1 when constrained out).
    void local_dofs(const std::vector<int>& cell, std::vector<long>& out) const {
        out.assign(local_, -1);
        std::vector<int> j(nd_, 0);
        for (std::size_t l = 0; l < local_; ++l) {
            long g = 0;
            bool ok = true;
            std::size_t rem = l;
            for (std::size_t k = nd_; k-- > 0;) {
                j[k] = static_cast<int>(rem % w_);
                rem /= w_;
            }
            for (std::size_t k = 0; k < nd_ && ok; ++k) {
                int i = basis_.factor(k).local_to_index(cell[k], j[k]);
                if (i < 0) ok = false;
                g += static_cast<long>(i) * static_cast<long>(basis_.stride(k));
            }
            out[l] = ok ? g : -1;
        }
    }

    /// Loops over the tensor quadrature points of `cell`; f(x, weight, ders)
    /// where ders[k] holds the 1D derivative table along axis k.
    template <class F>
    void for_each_point(const std::vector<int>& cell, F&& f) const {
        const std::size_t q = rule_.size();
        std::vector<std::vector<double>> xs(nd_), ws(nd_);
        std::vector<std::vector<std::vector<double>>> tables(nd_);
        for (std::size_t k = 0; k < nd_; ++k) {
            const auto& fac = basis_.factor(k);
            double a = fac.breakpoint(cell[k]), b = fac.breakpoint(cell[k] + 1);
            xs[k].resize(q);
            ws[k].resize(q);
            tables[k].resize(q);
            for (std::size_t i = 0; i < q; ++i) {
                xs[k][i] = 0.5 * (a + b) + 0.5 * (b - a) * rule_.nodes[i];
                ws[k][i] = 0.5 * (b - a) * rule_.weights[i];
                fac.derivatives(cell[k], xs[k][i], max_order_, tables[k][i]);
            }
        }
        std::vector<std::size_t> qi(nd_, 0);
        std::vector<double> x(nd_);
        std::vector<const std::vector<double>*> ders(nd_);
        for (;;) {
            double weight = 1.0;
            for (std::size_t k = 0; k < nd_; ++k) {
                x[k] = xs[k][qi[k]];
                weight *= ws[k][qi[k]];
                ders[k] = &tables[k][qi[k]];
            }
            f(std::as_const(x), weight, std::as_const(ders));
            std::size_t k = nd_;
            while (k-- > 0) {
                if (qi[k] + 1 < q) {
                    ++qi[k];
                    break;
                }
                qi[k] = 0;
            }
            if (k == static_cast<std::size_t>(-1)) break;
        }
    }

    /// D^alpha of every local function, from the per-axis tables.
    void local_derivative(const std::vector<const std::vector<double>*>& ders, const MultiIndex& alpha,
                          std::vector<double>& out) const {
        out.assign(local_, 1.0);
        for (std::size_t l = 0; l < local_; ++l) {
            std::size_t rem = l;
            double v = 1.0;
            for (std::size_t k = nd_; k-- > 0;) {
                std::size_t j = rem % w_;
                rem /= w_;
                v *= (*ders[k])[static_cast<std::size_t>(alpha[k]) * w_ + j];
            }
            out[l] = v;
        }
    }

private:
    const TensorBasis& basis_;
    GaussRule rule_;
    int max_order_;
    std::size_t nd_, w_, local_;
};

inline int max_term_order(const std::vector<FormTerm>& terms) {
    int m = 0;
    for (const auto& t : terms) m = std::max({m, t.trial.max_entry(), t.test.max_entry()});
    return m;
}

}  // namespace detail

/// A[i][j] = a(phi_j, phi_i), F[i] = (f, phi_i), cell by cell with d+1 Gauss
/// points per axis. Serial and in a fixed order, so the result is reproducible.
inline AssembledSystem assemble(std::shared_ptr<const TensorBasis> basis, const FormSpec& form) {
    if (basis->dof_count() == 0) throw std::invalid_argument("empty basis");
    AssembledSystem sys;
    sys.basis = basis;
    sys.matrix = galerkin_pattern(*basis);
    sys.rhs.assign(basis->dof_count(), 0.0);
    sys.symmetric = form.symmetric;

    const int order = detail::max_term_order(form.terms);
    detail::CellKernel kernel(*basis, order, basis->degree() + 1);
    const std::size_t L = kernel.local_count();

    std::vector<MultiIndex> needed;
    for (const auto& t : form.terms) {
        if (t.trial.max_entry() > basis->degree() || t.test.max_entry() > basis->degree())
            throw std::invalid_argument("form term differentiates beyond the spline degree");
        for (const MultiIndex* a : {&t.trial, &t.test})
            if (std::find(needed.begin(), needed.end(), *a) == needed.end()) needed.push_back(*a);
    }
    std::vector<std::size_t> trial_slot, test_slot;
    for (const auto& t : form.terms) {
        trial_slot.push_back(static_cast<std::size_t>(std::find(needed.begin(), needed.end(), t.trial) - needed.begin()));
        test_slot.push_back(static_cast<std::size_t>(std::find(needed.begin(), needed.end(), t.test) - needed.begin()));
    }
    MultiIndex zero(basis->dim());

    std::vector<double> K(L * L), Fl(L), coef(form.terms.size());
    std::vector<std::vector<double>> D(needed.size());
    std::vector<double> phi;
    std::vector<long> dofs;
    std::vector<double> field_x;

    kernel.for_each_cell([&](const std::vector<int>& cell) {
        std::fill(K.begin(), K.end(), 0.0);
        std::fill(Fl.begin(), Fl.end(), 0.0);
        kernel.for_each_point(cell, [&](const std::vector<double>& x, double w,
                                        const std::vector<const std::vector<double>*>& ders) {
            form.embed(x, field_x);
            for (std::size_t t = 0; t < form.terms.size(); ++t) {
                coef[t] = (*form.terms[t].coefficient)(field_x);
                if (!std::isfinite(coef[t])) throw std::domain_error("coefficient is not finite at a quadrature point");
            }
            for (std::size_t s = 0; s < needed.size(); ++s) kernel.local_derivative(ders, needed[s], D[s]);
            for (std::size_t t = 0; t < form.terms.size(); ++t) {
                const double a = w * coef[t];
                if (a == 0.0) continue;
                const auto& Dtr = D[trial_slot[t]];
                const auto& Dte = D[test_slot[t]];
                for (std::size_t i = 0; i < L; ++i) {
                    const double ai = a * Dte[i];
                    if (ai == 0.0) continue;
                    for (std::size_t j = 0; j < L; ++j) K[i * L + j] += ai * Dtr[j];
                }
            }
            if (form.forcing) {
                double f = (*form.forcing)(field_x);
                if (!std::isfinite(f)) throw std::domain_error("forcing is not finite at a quadrature point");
                if (f != 0.0) {
                    kernel.local_derivative(ders, zero, phi);
                    for (std::size_t i = 0; i < L; ++i) Fl[i] += w * f * phi[i];
                }
            }
        });
        kernel.local_dofs(cell, dofs);
        for (std::size_t i = 0; i < L; ++i) {
            if (dofs[i] < 0) continue;
            const auto gi = static_cast<std::size_t>(dofs[i]);
            sys.rhs[gi] += Fl[i];
            for (std::size_t j = 0; j < L; ++j)
                if (dofs[j] >= 0) sys.matrix.add(gi, static_cast<std::size_t>(dofs[j]), K[i * L + j]);
        }
    });
    return sys;
}

/// Point evaluator contract used across the analysis code:
///   eval(x, alphas, out) writes D^alphas[k] u(x) into out[k].
template <class E>
concept PointEvaluator = requires(const E& e, std::span<const double> x, std::span<const MultiIndex> a,
                                  std::span<double> out) {
    { e(x, a, out) };
};

/// Residual functional r_i = a(w, phi_i) for a trial function given by a
/// point evaluator (in basis coordinates), integrated like `assemble`.
template <PointEvaluator Trial>
std::vector<double> apply_form(const TensorBasis& basis, const FormSpec& form, const Trial& trial) {
    std::vector<double> out(basis.dof_count(), 0.0);
    const int order = detail::max_term_order(form.terms);
    detail::CellKernel kernel(basis, order, basis.degree() + 1);
    const std::size_t L = kernel.local_count();
    std::vector<MultiIndex> trial_idx;
    for (const auto& t : form.terms) trial_idx.push_back(t.trial);
    std::vector<double> trial_vals(trial_idx.size()), rl(L), Dte, field_x;
    std::vector<long> dofs;
    kernel.for_each_cell([&](const std::vector<int>& cell) {
        std::fill(rl.begin(), rl.end(), 0.0);
        kernel.for_each_point(cell, [&](const std::vector<double>& x, double w,
                                        const std::vector<const std::vector<double>*>& ders) {
            form.embed(x, field_x);
            trial(std::span<const double>(x), std::span<const MultiIndex>(trial_idx), std::span<double>(trial_vals));
            for (std::size_t t = 0; t < form.terms.size(); ++t) {
                double a = w * (*form.terms[t].coefficient)(field_x) * trial_vals[t];
                if (a == 0.0) continue;
                kernel.local_derivative(ders, form.terms[t].test, Dte);
                for (std::size_t i = 0; i < L; ++i) rl[i] += a * Dte[i];
            }
        });
        kernel.local_dofs(cell, dofs);
        for (std::size_t i = 0; i < L; ++i)
            if (dofs[i] >= 0) out[static_cast<std::size_t>(dofs[i])] += rl[i];
    });
    return out;
}

/// Bilinear form of the cylinder problem on Omega_l: every configured term.
inline FormSpec cylinder_form(const ProblemSpec& spec) {
    FormSpec form;
    for (const auto& [key, field] : spec.coefficients) form.terms.push_back({key.first, key.second, &field});
    form.forcing = &spec.forcing;
    form.embed = [](std::span<const double> x, std::vector<double>& out) { out.assign(x.begin(), x.end()); };
    form.symmetric = spec.symmetric(false);
    return form;
}

/// Bilinear form of the cross-section problem: terms with both indices in
/// N2, restricted to the cross-section coordinates; fields read X1 = 0.
inline FormSpec limit_form(const ProblemSpec& spec) {
    FormSpec form;
    const std::size_t p = spec.p, q = spec.cross_dim();
    for (const auto& [key, field] : spec.coefficients)
        if (in_N2(key.first, p, spec.m) && in_N2(key.second, p, spec.m))
            form.terms.push_back({key.first.slice(p, q), key.second.slice(p, q), &field});
    form.forcing = &spec.forcing;
    form.embed = [p](std::span<const double> x, std::vector<double>& out) {
        out.assign(p, 0.0);
        out.insert(out.end(), x.begin(), x.end());
    };
    form.symmetric = spec.symmetric(true);
    return form;
}

inline int default_degree(int m) { return m + 1; }

/// Galerkin system of the cylinder problem on (-l,l)^p x omega.
inline AssembledSystem assemble_cylinder(const ProblemSpec& spec, double l, double cells_per_unit, int degree) {
    if (!(l > 0)) throw std::invalid_argument("half-length must be positive");
    auto basis = std::make_shared<const TensorBasis>(TensorBasis::on_box(spec.cylinder(l), cells_per_unit, degree, spec.m));
    return assemble(basis, cylinder_form(spec));
}

/// Galerkin system of the limit problem on omega.
inline AssembledSystem assemble_limit(const ProblemSpec& spec, double cells_per_unit, int degree) {
    auto basis = std::make_shared<const TensorBasis>(TensorBasis::on_box(spec.omega, cells_per_unit, degree, spec.m));
    return assemble(basis, limit_form(spec));
}

/// Spline function: coefficient vector over a tensor basis.
class DiscreteField {
public:
    DiscreteField() = default;
    DiscreteField(std::shared_ptr<const TensorBasis> basis, std::vector<double> coeffs)
        : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
        if (!basis_ || coeffs_.size() != basis_->dof_count())
            throw std::invalid_argument("coefficient vector does not match the basis");
    }

    const TensorBasis& basis() const { return *basis_; }
    std::shared_ptr<const TensorBasis> basis_ptr() const { return basis_; }
    const std::vector<double>& coeffs() const noexcept { return coeffs_; }
    std::size_t dim() const { return basis_->dim(); }
    Box domain() const { return basis_->domain(); }

    /// D^alphas[k] u(x) for every requested multi-index.
    void operator()(std::span<const double> x, std::span<const MultiIndex> alphas, std::span<double> out) const {
        const std::size_t nd = basis_->dim();
        if (x.size() != nd) throw std::invalid_argument("point has the wrong dimension");
        const int d = basis_->degree();
        const std::size_t w = static_cast<std::size_t>(d + 1);
        int order = 0;
        for (const auto& a : alphas) {
            if (a.size() != nd) throw std::invalid_argument("multi-index has the wrong dimension");
            if (a.max_entry() > d)
                throw std::invalid_argument("derivative order " + std::to_string(a.max_entry()) +
                                            " exceeds the spline degree " + std::to_string(d));
            order = std::max(order, a.max_entry());
        }
        thread_local std::vector<std::vector<double>> tables;
        thread_local std::vector<int> cells;
        tables.resize(nd);
        cells.resize(nd);
        for (std::size_t k = 0; k < nd; ++k) {
            const auto& f = basis_->factor(k);
            if (!f.contains(x[k])) throw std::out_of_range("evaluation point outside the field's domain");
            cells[k] = f.cell_of(x[k]);
            f.derivatives(cells[k], x[k], order, tables[k]);
        }
        std::size_t local = 1;
        for (std::size_t k = 0; k < nd; ++k) local *= w;
        std::fill(out.begin(), out.end(), 0.0);
        thread_local std::vector<int> j;
        j.assign(nd, 0);
        for (std::size_t l = 0; l < local; ++l) {
            std::size_t rem = l;
            for (std::size_t k = nd; k-- > 0;) {
                j[k] = static_cast<int>(rem % w);
                rem /= w;
            }
            long g = 0;
            bool ok = true;
            for (std::size_t k = 0; k < nd && ok; ++k) {
                int i = basis_->factor(k).local_to_index(cells[k], j[k]);
                if (i < 0) ok = false;
                g += static_cast<long>(i) * static_cast<long>(basis_->stride(k));
            }
            if (!ok) continue;
            const double c = coeffs_[static_cast<std::size_t>(g)];
            if (c == 0.0) continue;
            for (std::size_t s = 0; s < alphas.size(); ++s) {
                double v = c;
                for (std::size_t k = 0; k < nd; ++k)
                    v *= tables[k][static_cast<std::size_t>(alphas[s][k]) * w + static_cast<std::size_t>(j[k])];
                out[s] += v;
            }
        }
    }

    double eval(std::span<const double> x, const MultiIndex& alpha) const {
        double v = 0.0;
        (*this)(x, std::span<const MultiIndex>(&alpha, 1), std::span<double>(&v, 1));
        return v;
    }

private:
    std::shared_ptr<const TensorBasis> basis_;
    std::vector<double> coeffs_;
};

/// The limit solution read on the cylinder: constant in X1, so every
/// derivative with an axial component vanishes.
template <PointEvaluator Limit>
class AxialExtension {
public:
    AxialExtension(const Limit& limit, std::size_t p) : limit_(limit), p_(p) {}

    void operator()(std::span<const double> x, std::span<const MultiIndex> alphas, std::span<double> out) const {
        thread_local std::vector<MultiIndex> reduced;
        thread_local std::vector<std::size_t> slot;
        thread_local std::vector<double> vals;
        reduced.clear();
        slot.clear();
        const std::size_t q = x.size() - p_;
        for (const auto& a : alphas) {
            bool axial = false;
            for (std::size_t k = 0; k < p_; ++k) axial |= a[k] != 0;
            if (axial) {
                slot.push_back(static_cast<std::size_t>(-1));
            } else {
                slot.push_back(reduced.size());
                reduced.push_back(a.slice(p_, q));
            }
        }
        vals.assign(reduced.size(), 0.0);
        if (!reduced.empty()) {
            std::vector<MultiIndex> local(reduced);  // the callee may reuse thread-local scratch
            limit_(x.subspan(p_), std::span<const MultiIndex>(local), std::span<double>(vals));
        }
        for (std::size_t s = 0; s < alphas.size(); ++s)
            out[s] = slot[s] == static_cast<std::size_t>(-1) ? 0.0 : vals[slot[s]];
    }

private:
    const Limit& limit_;
    std::size_t p_;
};

/// Analytic limit solution of a builtin problem, on the 1D cross-section.
class ExactLimit {
public:
    explicit ExactLimit(Polynomial1D poly) : poly_(std::move(poly)) {}
    void operator()(std::span<const double> x, std::span<const MultiIndex> alphas, std::span<double> out) const {
        for (std::size_t s = 0; s < alphas.size(); ++s) out[s] = poly_(x[0], alphas[s][0]);
    }

private:
    Polynomial1D poly_;
};

/// Pointwise difference of two evaluators.
template <PointEvaluator A, PointEvaluator B>
class Difference {
public:
    Difference(const A& a, const B& b) : a_(a), b_(b) {}
    void operator()(std::span<const double> x, std::span<const MultiIndex> alphas, std::span<double> out) const {
        std::vector<double> tmp(alphas.size());
        a_(x, alphas, out);
        b_(x, alphas, std::span<double>(tmp));
        for (std::size_t s = 0; s < alphas.size(); ++s) out[s] -= tmp[s];
    }

private:
    const A& a_;
    const B& b_;
};

}  // namespace cylasym
