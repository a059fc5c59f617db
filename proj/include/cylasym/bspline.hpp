#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "box.hpp"

namespace cylasym {

/// Uniform clamped B-spline basis on [a,b] of degree d. With bc_order m > 0
/// the first and last m functions are dropped, leaving functions whose
/// derivatives of order 0..m-1 vanish at both endpoints.
class SplineBasis1D {
public:
    SplineBasis1D(double a, double b, int cells, int degree, int bc_order)
        : a_(a), b_(b), cells_(cells), degree_(degree), bc_order_(bc_order) {
        if (!(a < b)) throw std::invalid_argument("spline interval is empty");
        if (degree < 0 || cells < 1 || bc_order < 0) throw std::invalid_argument("invalid spline parameters");
        if (degree < bc_order) throw std::invalid_argument("spline degree must be at least the boundary order m");
        if (size() <= 0) throw std::invalid_argument("constrained spline basis has dimension <= 0");
        knots_.assign(static_cast<std::size_t>(degree + 1), a);
        for (int k = 1; k < cells; ++k) knots_.push_back(a + (b - a) * k / cells);
        knots_.insert(knots_.end(), static_cast<std::size_t>(degree + 1), b);
    }

    double lower() const noexcept { return a_; }
    double upper() const noexcept { return b_; }
    int cells() const noexcept { return cells_; }
    int degree() const noexcept { return degree_; }
    int bc_order() const noexcept { return bc_order_; }
    double cell_width() const noexcept { return (b_ - a_) / cells_; }
    double breakpoint(int k) const { return k == cells_ ? b_ : a_ + (b_ - a_) * k / cells_; }
    const std::vector<double>& knots() const noexcept { return knots_; }

    /// Number of unconstrained B-splines.
    int full_size() const noexcept { return cells_ + degree_; }
    /// Number of retained functions: cells + d - 2m.
    int size() const noexcept { return cells_ + degree_ - 2 * bc_order_; }

    bool contains(double x, double tol = 1e-12) const {
        double t = tol * std::max(1.0, b_ - a_);
        return x >= a_ - t && x <= b_ + t;
    }

    /// Cell holding x; the right endpoint belongs to the last cell.
    int cell_of(double x) const {
        if (!contains(x)) throw std::out_of_range("point outside the spline interval");
        int c = static_cast<int>(std::floor((x - a_) / (b_ - a_) * cells_));
        return std::clamp(c, 0, cells_ - 1);
    }

    /// Retained index of the j-th local function on `cell`, or -1 when it was
    /// removed by the boundary constraint.
    int local_to_index(int cell, int j) const {
        int g = cell + j;
        if (g < bc_order_ || g >= full_size() - bc_order_) return -1;
        return g - bc_order_;
    }

    /// Derivatives 0..nder of the d+1 B-splines supported on `cell`, at x.
    /// out[k*(d+1) + j] = k-th derivative of local function j. Orders above
    /// the degree are zero.
    void derivatives(int cell, double x, int nder, std::vector<double>& out) const {
        const int p = degree_;
        const std::size_t w = static_cast<std::size_t>(p + 1);
        out.assign(static_cast<std::size_t>(nder + 1) * w, 0.0);
        const int span = cell + p;
        const auto& U = knots_;

        thread_local std::vector<double> ndu, left, right, arow;
        ndu.assign(w * w, 0.0);
        left.assign(w, 0.0);
        right.assign(w, 0.0);
        auto NDU = [&](int r, int c) -> double& { return ndu[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)]; };

        NDU(0, 0) = 1.0;
        for (int j = 1; j <= p; ++j) {
            left[static_cast<std::size_t>(j)] = x - U[static_cast<std::size_t>(span + 1 - j)];
            right[static_cast<std::size_t>(j)] = U[static_cast<std::size_t>(span + j)] - x;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                NDU(j, r) = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
                double temp = NDU(r, j - 1) / NDU(j, r);
                NDU(r, j) = saved + right[static_cast<std::size_t>(r + 1)] * temp;
                saved = left[static_cast<std::size_t>(j - r)] * temp;
            }
            NDU(j, j) = saved;
        }
        for (int j = 0; j <= p; ++j) out[static_cast<std::size_t>(j)] = NDU(j, p);

        const int top = std::min(nder, p);
        arow.assign(2 * w, 0.0);
        auto A = [&](int s, int c) -> double& { return arow[static_cast<std::size_t>(s) * w + static_cast<std::size_t>(c)]; };
        for (int r = 0; r <= p; ++r) {
            int s1 = 0, s2 = 1;
            A(0, 0) = 1.0;
            for (int k = 1; k <= top; ++k) {
                double d = 0.0;
                int rk = r - k, pk = p - k;
                if (r >= k) {
                    A(s2, 0) = A(s1, 0) / NDU(pk + 1, rk);
                    d = A(s2, 0) * NDU(rk, pk);
                }
                int j1 = rk >= -1 ? 1 : -rk;
                int j2 = (r - 1 <= pk) ? k - 1 : p - r;
                for (int j = j1; j <= j2; ++j) {
                    A(s2, j) = (A(s1, j) - A(s1, j - 1)) / NDU(pk + 1, rk + j);
                    d += A(s2, j) * NDU(rk + j, pk);
                }
                if (r <= pk) {
                    A(s2, k) = -A(s1, k - 1) / NDU(pk + 1, r);
                    d += A(s2, k) * NDU(r, pk);
                }
                out[static_cast<std::size_t>(k) * w + static_cast<std::size_t>(r)] = d;
                std::swap(s1, s2);
            }
        }
        double fac = p;
        for (int k = 1; k <= top; ++k) {
            for (std::size_t j = 0; j < w; ++j) out[static_cast<std::size_t>(k) * w + j] *= fac;
            fac *= (p - k);
        }
    }

    /// k-th derivative of retained function `index` at x (slow path, for tests).
    double eval(int index, double x, int k = 0) const {
        int cell = cell_of(x);
        std::vector<double> d;
        derivatives(cell, x, k, d);
        for (int j = 0; j <= degree_; ++j)
            if (local_to_index(cell, j) == index) return d[static_cast<std::size_t>(k * (degree_ + 1) + j)];
        return 0.0;
    }

private:
    double a_, b_;
    int cells_, degree_, bc_order_;
    std::vector<double> knots_;
};

/// Tensor product of 1D factors; dof index is row-major with the last
/// coordinate fastest.
class TensorBasis {
public:
    explicit TensorBasis(std::vector<SplineBasis1D> factors) : factors_(std::move(factors)) {
        if (factors_.empty()) throw std::invalid_argument("tensor basis needs at least one factor");
        degree_ = factors_.front().degree();
        for (const auto& f : factors_)
            if (f.degree() != degree_) throw std::invalid_argument("tensor factors must share the degree");
        strides_.assign(factors_.size(), 1);
        for (std::size_t k = factors_.size() - 1; k-- > 0;)
            strides_[k] = strides_[k + 1] * static_cast<std::size_t>(factors_[k + 1].size());
        dofs_ = strides_[0] * static_cast<std::size_t>(factors_[0].size());
    }

    /// Uniform basis of the given degree on `box` with `cells_per_unit`
    /// cells per unit length along every axis.
    static TensorBasis on_box(const Box& box, double cells_per_unit, int degree, int bc_order) {
        std::vector<SplineBasis1D> f;
        for (std::size_t k = 0; k < box.dim(); ++k) {
            long cells = std::lround(box.extent(k) * cells_per_unit);
            if (cells < 2 * bc_order + 1)
                throw std::invalid_argument("resolution gives fewer than 2m+1 cells along axis " + std::to_string(k + 1));
            f.emplace_back(box.lo[k], box.hi[k], static_cast<int>(cells), degree, bc_order);
        }
        return TensorBasis(std::move(f));
    }

    std::size_t dim() const noexcept { return factors_.size(); }
    int degree() const noexcept { return degree_; }
    std::size_t dof_count() const noexcept { return dofs_; }
    const SplineBasis1D& factor(std::size_t k) const { return factors_[k]; }
    const std::vector<SplineBasis1D>& factors() const noexcept { return factors_; }
    std::size_t stride(std::size_t k) const { return strides_[k]; }

    Box domain() const {
        std::vector<double> lo, hi;
        for (const auto& f : factors_) {
            lo.push_back(f.lower());
            hi.push_back(f.upper());
        }
        return Box(lo, hi);
    }

    std::size_t cell_count() const {
        std::size_t c = 1;
        for (const auto& f : factors_) c *= static_cast<std::size_t>(f.cells());
        return c;
    }

    /// Per-axis dof indices of a flat dof index.
    std::vector<int> unflatten(std::size_t dof) const {
        std::vector<int> idx(dim());
        for (std::size_t k = 0; k < dim(); ++k) {
            idx[k] = static_cast<int>(dof / strides_[k]);
            dof %= strides_[k];
        }
        return idx;
    }

    /// Box covering the support of a dof.
    Box support(std::size_t dof) const {
        auto idx = unflatten(dof);
        std::vector<double> lo, hi;
        for (std::size_t k = 0; k < dim(); ++k) {
            const auto& f = factors_[k];
            int g = idx[k] + f.bc_order();  // first knot span index of the global function
            int c0 = std::max(0, g - f.degree());
            int c1 = std::min(f.cells(), g + 1);
            lo.push_back(f.breakpoint(c0));
            hi.push_back(f.breakpoint(c1));
        }
        return Box(lo, hi);
    }

private:
    std::vector<SplineBasis1D> factors_;
    std::vector<std::size_t> strides_;
    std::size_t dofs_ = 0;
    int degree_ = 0;
};

}  // namespace cylasym
