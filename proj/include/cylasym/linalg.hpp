#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cylasym {

/// Square sparse matrix in compressed row layout. Columns within a row are
/// strictly ascending; the pattern is fixed at construction.
class CsrMatrix {
public:
    CsrMatrix() = default;

    /// Builds an all-zero matrix with the given pattern. Each row's column
    /// list must be strictly ascending.
    CsrMatrix(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::size_t> cols)
        : n_(n), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), vals_(cols_.size(), 0.0) {
        if (row_ptr_.size() != n_ + 1 || row_ptr_.back() != cols_.size())
            throw std::invalid_argument("inconsistent CSR row offsets");
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                if (cols_[k] >= n_) throw std::invalid_argument("CSR column out of range");
                if (k > row_ptr_[i] && cols_[k] <= cols_[k - 1])
                    throw std::invalid_argument("CSR columns must be strictly ascending");
            }
    }

    static CsrMatrix identity(std::size_t n) {
        std::vector<std::size_t> rp(n + 1), c(n);
        for (std::size_t i = 0; i < n; ++i) {
            rp[i] = i;
            c[i] = i;
        }
        rp[n] = n;
        CsrMatrix m(n, std::move(rp), std::move(c));
        std::fill(m.vals_.begin(), m.vals_.end(), 1.0);
        return m;
    }

    /// From a dense row-major matrix, keeping every nonzero and the diagonal.
    static CsrMatrix from_dense(std::size_t n, std::span<const double> a) {
        std::vector<std::size_t> rp{0}, c;
        std::vector<double> v;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j)
                if (a[i * n + j] != 0.0 || i == j) {
                    c.push_back(j);
                    v.push_back(a[i * n + j]);
                }
            rp.push_back(c.size());
        }
        CsrMatrix m(n, std::move(rp), std::move(c));
        m.vals_ = std::move(v);
        return m;
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t nonzeros() const noexcept { return cols_.size(); }
    const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<std::size_t>& cols() const noexcept { return cols_; }
    const std::vector<double>& values() const noexcept { return vals_; }
    std::vector<double>& values() noexcept { return vals_; }

    /// Position of (i,j) in the value array; throws when outside the pattern.
    std::size_t locate(std::size_t i, std::size_t j) const {
        auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
        auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
        auto it = std::lower_bound(first, last, j);
        if (it == last || *it != j) throw std::out_of_range("entry outside the sparsity pattern");
        return static_cast<std::size_t>(it - cols_.begin());
    }

    void add(std::size_t i, std::size_t j, double v) { vals_[locate(i, j)] += v; }

    double at(std::size_t i, std::size_t j) const {
        auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
        auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
        auto it = std::lower_bound(first, last, j);
        return (it == last || *it != j) ? 0.0 : vals_[static_cast<std::size_t>(it - cols_.begin())];
    }

    /// y = A x
    void multiply(std::span<const double> x, std::span<double> y) const {
        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += vals_[k] * x[cols_[k]];
            y[i] = s;
        }
    }

    std::vector<double> operator*(std::span<const double> x) const {
        std::vector<double> y(n_);
        multiply(x, y);
        return y;
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) d[i] = at(i, i);
        return d;
    }

    bool is_symmetric(double rel_tol = 0.0) const {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                double a = vals_[k], b = at(cols_[k], i);
                if (std::abs(a - b) > rel_tol * std::max(std::abs(a), std::abs(b))) return false;
            }
        return true;
    }

    std::vector<double> to_dense() const {
        std::vector<double> a(n_ * n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) a[i * n_ + cols_[k]] = vals_[k];
        return a;
    }

    /// Plain-text triplets, one `row col value` line per stored entry.
    void write_triplets(std::ostream& os) const {
        char buf[64];
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                std::snprintf(buf, sizeof buf, "%.17g", vals_[k]);
                os << i << ' ' << cols_[k] << ' ' << buf << '\n';
            }
    }

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> cols_;
    std::vector<double> vals_;
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

struct SolveResult {
    std::vector<double> x;
    double residual = 0.0;  // ||b - A x|| / ||b||
    int iterations = 0;
};

struct SolverOptions {
    double tol = 1e-10;
    int max_iter = 100000;
    int restart = 50;  // Krylov dimension of the non-symmetric path
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double relative_residual(const CsrMatrix& A, std::span<const double> x, std::span<const double> b) {
    std::vector<double> r = A * x;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    double nb = norm2(b);
    return nb == 0.0 ? norm2(r) : norm2(r) / nb;
}

namespace detail {

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline std::vector<double> jacobi_inverse(const CsrMatrix& A) {
    std::vector<double> d = A.diagonal();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(d[i] != 0.0) || !std::isfinite(d[i]))
            throw SolverError("breakdown: zero or non-finite diagonal in row " + std::to_string(i), NAN, 0);
        d[i] = 1.0 / d[i];
    }
    return d;
}

inline void require_finite(std::span<const double> v, double residual, int it) {
    for (double e : v)
        if (!std::isfinite(e)) throw SolverError("breakdown: non-finite iterate", residual, it);
}

}  // namespace detail

/// Jacobi-preconditioned conjugate gradients.
inline SolveResult solve_pcg(const CsrMatrix& A, std::span<const double> b, const SolverOptions& opt = {}) {
    const std::size_t n = A.size();
    if (b.size() != n) throw std::invalid_argument("right-hand side does not match the matrix");
    SolveResult res;
    res.x.assign(n, 0.0);
    const double nb = norm2(b);
    if (nb == 0.0) return res;
    const std::vector<double> dinv = detail::jacobi_inverse(A);

    std::vector<double> r(b.begin(), b.end()), z(n), p(n), q(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
    p = z;
    double rho = dot(r, z);
    double rnorm = nb;
    double best_true = std::numeric_limits<double>::infinity();
    int it = 0, stalled = 0;
    while (it < opt.max_iter) {
        A.multiply(p, q);
        double pq = dot(p, q);
        if (!(pq > 0.0) || !std::isfinite(pq)) throw SolverError("breakdown: matrix is not positive definite", rnorm / nb, it);
        double alpha = rho / pq;
        for (std::size_t i = 0; i < n; ++i) {
            res.x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        ++it;
        rnorm = norm2(r);
        if (!std::isfinite(rnorm)) throw SolverError("breakdown: non-finite residual", rnorm, it);
        bool restart = false;
        if (rnorm <= opt.tol * nb) {
            // the recursive residual drifts from the true one: confirm, and
            // restart from the true residual when they disagree
            std::vector<double> ax = A * res.x;
            for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
            const double true_res = norm2(r) / nb;
            if (true_res <= opt.tol) break;
            stalled = true_res < 0.5 * best_true ? 0 : stalled + 1;
            best_true = std::min(best_true, true_res);
            if (stalled >= 5) break;
            restart = true;
        }
        for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
        double rho_new = dot(r, z);
        double beta = restart ? 0.0 : rho_new / rho;
        rho = rho_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    detail::require_finite(res.x, rnorm / nb, it);
    res.iterations = it;
    res.residual = relative_residual(A, res.x, b);
    if (res.residual > opt.tol)
        throw SolverError("conjugate gradients did not converge (relative residual " + detail::sci(res.residual) + ")",
                          res.residual, it);
    return res;
}

/// Restarted GMRES with right Jacobi preconditioning; minimizes the true
/// residual within each cycle.
inline SolveResult solve_gmres(const CsrMatrix& A, std::span<const double> b, const SolverOptions& opt = {}) {
    const std::size_t n = A.size();
    if (b.size() != n) throw std::invalid_argument("right-hand side does not match the matrix");
    SolveResult res;
    res.x.assign(n, 0.0);
    const double nb = norm2(b);
    if (nb == 0.0) return res;
    const std::vector<double> dinv = detail::jacobi_inverse(A);
    const int k_max = std::max(1, opt.restart);

    std::vector<std::vector<double>> V(static_cast<std::size_t>(k_max + 1), std::vector<double>(n));
    std::vector<double> H(static_cast<std::size_t>((k_max + 1) * k_max), 0.0);
    std::vector<double> cs(static_cast<std::size_t>(k_max)), sn(static_cast<std::size_t>(k_max)),
        g(static_cast<std::size_t>(k_max + 1)), w(n), t(n);
    auto h = [&](int i, int j) -> double& { return H[static_cast<std::size_t>(i * k_max + j)]; };

    int it = 0;
    double rel = 1.0;
    while (it < opt.max_iter) {
        std::vector<double> r = A * res.x;
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        double beta = norm2(r);
        rel = beta / nb;
        if (rel <= opt.tol) break;
        for (std::size_t i = 0; i < n; ++i) V[0][i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;
        int j = 0;
        for (; j < k_max && it < opt.max_iter; ++j, ++it) {
            for (std::size_t i = 0; i < n; ++i) t[i] = dinv[i] * V[static_cast<std::size_t>(j)][i];
            A.multiply(t, w);
            for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
                h(i, j) = dot(w, V[static_cast<std::size_t>(i)]);
                for (std::size_t q = 0; q < n; ++q) w[q] -= h(i, j) * V[static_cast<std::size_t>(i)][q];
            }
            h(j + 1, j) = norm2(w);
            if (!std::isfinite(h(j + 1, j))) throw SolverError("breakdown: non-finite Krylov vector", rel, it);
            for (int i = 0; i < j; ++i) {
                double tmp = cs[static_cast<std::size_t>(i)] * h(i, j) + sn[static_cast<std::size_t>(i)] * h(i + 1, j);
                h(i + 1, j) = -sn[static_cast<std::size_t>(i)] * h(i, j) + cs[static_cast<std::size_t>(i)] * h(i + 1, j);
                h(i, j) = tmp;
            }
            double denom = std::hypot(h(j, j), h(j + 1, j));
            if (denom == 0.0) throw SolverError("breakdown: singular Hessenberg matrix", rel, it);
            cs[static_cast<std::size_t>(j)] = h(j, j) / denom;
            sn[static_cast<std::size_t>(j)] = h(j + 1, j) / denom;
            double hj1 = h(j + 1, j);
            h(j, j) = denom;
            h(j + 1, j) = 0.0;
            g[static_cast<std::size_t>(j + 1)] = -sn[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(j)];
            g[static_cast<std::size_t>(j)] *= cs[static_cast<std::size_t>(j)];
            bool done = std::abs(g[static_cast<std::size_t>(j + 1)]) <= opt.tol * nb * 0.5 || hj1 == 0.0;
            if (!done)
                for (std::size_t q = 0; q < n; ++q) V[static_cast<std::size_t>(j + 1)][q] = w[q] / hj1;
            if (done) {
                ++j;
                ++it;
                break;
            }
        }
        // back substitution and update x += M^{-1} V y
        std::vector<double> y(static_cast<std::size_t>(j));
        for (int i = j - 1; i >= 0; --i) {
            double s = g[static_cast<std::size_t>(i)];
            for (int k = i + 1; k < j; ++k) s -= h(i, k) * y[static_cast<std::size_t>(k)];
            y[static_cast<std::size_t>(i)] = s / h(i, i);
        }
        std::fill(t.begin(), t.end(), 0.0);
        for (int i = 0; i < j; ++i)
            for (std::size_t q = 0; q < n; ++q) t[q] += y[static_cast<std::size_t>(i)] * V[static_cast<std::size_t>(i)][q];
        for (std::size_t q = 0; q < n; ++q) res.x[q] += dinv[q] * t[q];
        detail::require_finite(res.x, rel, it);
    }
    res.iterations = it;
    res.residual = relative_residual(A, res.x, b);
    if (res.residual > opt.tol)
        throw SolverError("GMRES did not converge (relative residual " + detail::sci(res.residual) + ")", res.residual,
                          it);
    return res;
}

/// Symmetric systems go to PCG, the rest to restarted GMRES.
inline SolveResult solve(const CsrMatrix& A, std::span<const double> b, bool symmetric, const SolverOptions& opt = {}) {
    return symmetric ? solve_pcg(A, b, opt) : solve_gmres(A, b, opt);
}

/// Gaussian elimination with partial pivoting; meant for small oracle checks.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    if (a.size() != n * n) throw std::invalid_argument("dense system size mismatch");
    if (n > 2000) throw std::invalid_argument("dense fallback is limited to 2000 unknowns");
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
        if (a[piv * n + c] == 0.0) throw SolverError("singular matrix in dense solve", NAN, 0);
        if (piv != c) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
            std::swap(b[c], b[piv]);
        }
        for (std::size_t r = c + 1; r < n; ++r) {
            double f = a[r * n + c] / a[c * n + c];
            if (f == 0.0) continue;
            for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i * n + k] * x[k];
        x[i] = s / a[i * n + i];
    }
    return x;
}

/// Lower-eigenvalue estimate of a symmetric positive definite matrix by a
/// fixed number of inverse power steps from the normalized all-ones vector.
/// Returns the final Rayleigh quotient.
inline double smallest_ritz_estimate(const CsrMatrix& A, int iterations, double inner_tol = 1e-13) {
    const std::size_t n = A.size();
    if (n == 0) throw std::invalid_argument("empty matrix");
    std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
    SolverOptions opt;
    opt.tol = inner_tol;
    for (int k = 0; k < iterations; ++k) {
        SolveResult r;
        try {
            r = solve_pcg(A, x, opt);
        } catch (const SolverError& e) {
            throw SolverError(std::string("inverse iteration failed: ") + e.what(), e.residual(), e.iterations());
        }
        double nr = norm2(r.x);
        for (std::size_t i = 0; i < n; ++i) x[i] = r.x[i] / nr;
    }
    std::vector<double> ax = A * x;
    return dot(x, ax);
}

}  // namespace cylasym
