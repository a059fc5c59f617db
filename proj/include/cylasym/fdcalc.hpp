#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "box.hpp"
#include "discretization.hpp"
#include "multiindex.hpp"

namespace cylasym {

/// Values on the lattice origin + i*h, i_k in [0, extent_k). Row-major with
/// the last axis fastest.
class GridSample {
public:
    GridSample() = default;
    GridSample(std::vector<double> origin, std::vector<double> spacing, std::vector<std::size_t> extents)
        : origin_(std::move(origin)), h_(std::move(spacing)), ext_(std::move(extents)) {
        if (origin_.size() != h_.size() || h_.size() != ext_.size() || ext_.empty())
            throw std::invalid_argument("grid sample dimensions disagree");
        for (double h : h_)
            if (!(h > 0)) throw std::invalid_argument("grid spacing must be positive");
        std::size_t total = 1;
        for (auto e : ext_) total *= e;
        values_.assign(total, 0.0);
    }

    /// Samples f(x) on the lattice.
    template <class F>
    static GridSample sample(std::vector<double> origin, std::vector<double> spacing, std::vector<std::size_t> extents,
                             F&& f) {
        GridSample s(std::move(origin), std::move(spacing), std::move(extents));
        std::vector<double> x(s.dim());
        for (std::size_t flat = 0; flat < s.size(); ++flat) {
            s.point(flat, x);
            s.values_[flat] = f(std::span<const double>(x));
        }
        return s;
    }

    std::size_t dim() const noexcept { return ext_.size(); }
    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<double>& origin() const noexcept { return origin_; }
    const std::vector<double>& spacing() const noexcept { return h_; }
    const std::vector<std::size_t>& extents() const noexcept { return ext_; }
    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    std::size_t stride(std::size_t k) const {
        std::size_t s = 1;
        for (std::size_t j = k + 1; j < dim(); ++j) s *= ext_[j];
        return s;
    }

    std::vector<std::size_t> unflatten(std::size_t flat) const {
        std::vector<std::size_t> idx(dim());
        for (std::size_t k = dim(); k-- > 0;) {
            idx[k] = flat % ext_[k];
            flat /= ext_[k];
        }
        return idx;
    }

    std::size_t flatten(std::span<const std::size_t> idx) const {
        std::size_t f = 0;
        for (std::size_t k = 0; k < dim(); ++k) f = f * ext_[k] + idx[k];
        return f;
    }

    void point(std::size_t flat, std::vector<double>& x) const {
        x.resize(dim());
        for (std::size_t k = dim(); k-- > 0;) {
            x[k] = origin_[k] + static_cast<double>(flat % ext_[k]) * h_[k];
            flat /= ext_[k];
        }
    }

    double operator[](std::size_t flat) const { return values_[flat]; }
    double& operator[](std::size_t flat) { return values_[flat]; }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    double cell_volume() const {
        double v = 1.0;
        for (double h : h_) v *= h;
        return v;
    }

    /// Debug dump: `x1,...,xn,value` rows.
    void write_csv(std::ostream& os) const {
        for (std::size_t k = 0; k < dim(); ++k) os << 'x' << k + 1 << ',';
        os << "value\n";
        std::vector<double> x;
        char buf[64];
        for (std::size_t flat = 0; flat < size(); ++flat) {
            point(flat, x);
            for (double c : x) {
                std::snprintf(buf, sizeof buf, "%.17g,", c);
                os << buf;
            }
            std::snprintf(buf, sizeof buf, "%.17g\n", values_[flat]);
            os << buf;
        }
    }

private:
    std::vector<double> origin_, h_;
    std::vector<std::size_t> ext_;
    std::vector<double> values_;
};

enum class Direction { forward, backward };

/// First divided difference along axis k. Forward: (v(x+h e_k) - v(x))/h,
/// dropping the last layer; backward: (v(x) - v(x-h e_k))/h, dropping the
/// first layer.
inline GridSample delta_k(const GridSample& s, std::size_t k, Direction dir = Direction::forward) {
    if (k >= s.dim()) throw std::invalid_argument("difference axis out of range");
    if (s.extents()[k] < 2) throw std::invalid_argument("insufficient extent for a difference along axis " + std::to_string(k + 1));
    std::vector<double> origin = s.origin();
    std::vector<std::size_t> ext = s.extents();
    ext[k] -= 1;
    const double h = s.spacing()[k];
    if (dir == Direction::backward) origin[k] += h;
    GridSample out(origin, s.spacing(), ext);
    const std::size_t in_stride = s.stride(k);
    // out index (.., i_k, ..) reads input (.., i_k, ..) and (.., i_k+1, ..)
    std::size_t outer = 1, inner = in_stride;
    for (std::size_t j = 0; j < k; ++j) outer *= s.extents()[j];
    const std::size_t n_out = ext[k];
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < n_out; ++i)
            for (std::size_t r = 0; r < inner; ++r) {
                std::size_t src = (o * s.extents()[k] + i) * inner + r;
                std::size_t dst = (o * n_out + i) * inner + r;
                out[dst] = (s[src + in_stride] - s[src]) / h;
            }
    return out;
}

/// delta^alpha = delta^{alpha_1} ... delta^{alpha_n}; the last axis is
/// differenced first.
inline GridSample delta_alpha(const GridSample& s, const MultiIndex& alpha, Direction dir = Direction::forward) {
    if (alpha.size() != s.dim()) throw std::invalid_argument("multi-index dimension does not match the sample");
    for (std::size_t k = 0; k < s.dim(); ++k)
        if (s.extents()[k] < static_cast<std::size_t>(alpha[k]) + 1)
            throw std::invalid_argument("insufficient extent for delta^" + alpha.code());
    GridSample cur = s;
    for (std::size_t k = s.dim(); k-- > 0;)
        for (int r = 0; r < alpha[k]; ++r) cur = delta_k(cur, k, dir);
    return cur;
}

/// |sum f delta_h^alpha eta - (-1)^|alpha| sum delta_{-h}^alpha f eta| times
/// the lattice cell volume. eta must vanish within |alpha| layers of every
/// face.
inline double summation_by_parts_defect(const GridSample& f, const GridSample& eta, const MultiIndex& alpha) {
    if (f.extents() != eta.extents() || f.spacing() != eta.spacing() || f.origin() != eta.origin())
        throw std::invalid_argument("f and eta must share the lattice");
    const std::size_t nd = f.dim();
    for (std::size_t flat = 0; flat < eta.size(); ++flat) {
        if (eta[flat] == 0.0) continue;
        auto idx = eta.unflatten(flat);
        const auto a = static_cast<std::size_t>(alpha.length());
        for (std::size_t k = 0; k < nd; ++k) {
            if (idx[k] < a || idx[k] + a >= eta.extents()[k])
                throw std::invalid_argument("eta does not vanish on a margin of width |alpha|");
        }
    }
    GridSample d_eta = delta_alpha(eta, alpha, Direction::forward);  // lattice points 0..N-1-alpha
    GridSample d_f = delta_alpha(f, alpha, Direction::backward);     // lattice points alpha..N-1

    double lhs = 0.0;
    for (std::size_t flat = 0; flat < d_eta.size(); ++flat) {
        auto idx = d_eta.unflatten(flat);
        lhs += f[f.flatten(idx)] * d_eta[flat];
    }
    double rhs = 0.0;
    for (std::size_t flat = 0; flat < d_f.size(); ++flat) {
        auto idx = d_f.unflatten(flat);
        for (std::size_t k = 0; k < nd; ++k) idx[k] += static_cast<std::size_t>(alpha[k]);
        rhs += d_f[flat] * eta[eta.flatten(idx)];
    }
    const double sign = alpha.length() % 2 == 0 ? 1.0 : -1.0;
    return std::abs(lhs - sign * rhs) * f.cell_volume();
}

/// Max-norm gap between delta^alpha(fg) and
/// sum_{beta<=alpha} C(alpha,beta) delta^beta f(x+(alpha-beta)h) delta^{alpha-beta} g(x).
inline double leibniz_defect(const GridSample& f, const GridSample& g, const MultiIndex& alpha) {
    if (f.extents() != g.extents() || f.spacing() != g.spacing() || f.origin() != g.origin())
        throw std::invalid_argument("f and g must share the lattice");
    GridSample fg = f;
    for (std::size_t i = 0; i < fg.size(); ++i) fg[i] = f[i] * g[i];
    GridSample lhs = delta_alpha(fg, alpha);
    std::vector<double> rhs(lhs.size(), 0.0);
    for (const auto& beta : sub_indices(alpha, false)) {
        const double c = static_cast<double>(multi_binom(alpha, beta));
        const MultiIndex shift = alpha - beta;
        GridSample df = delta_alpha(f, beta);
        GridSample dg = delta_alpha(g, shift);
        for (std::size_t flat = 0; flat < lhs.size(); ++flat) {
            auto idx = lhs.unflatten(flat);
            double gv = dg[dg.flatten(idx)];
            for (std::size_t k = 0; k < idx.size(); ++k) idx[k] += static_cast<std::size_t>(shift[k]);
            rhs[flat] += c * df[df.flatten(idx)] * gv;
        }
    }
    double defect = 0.0;
    for (std::size_t i = 0; i < lhs.size(); ++i) defect = std::max(defect, std::abs(lhs[i] - rhs[i]));
    return defect;
}

/// Smooth test function with analytic derivatives: f(x, alpha) = D^alpha f(x).
using SmoothFunction = std::function<double(std::span<const double>, const MultiIndex&)>;

struct MeanValueResult {
    double difference;  // delta_h^alpha f(x)
    double lo, hi;      // range of D^alpha f over the stencil hull
    bool contained() const { return difference >= lo - 1e-12 * std::max(1.0, std::abs(difference)) &&
                                    difference <= hi + 1e-12 * std::max(1.0, std::abs(difference)); }
};

/// delta_h^alpha f(x) from its stencil, and the range of D^alpha f over the
/// box [x, x + alpha h] sampled on `samples` points per non-degenerate axis.
/// No 1/alpha! factor: the divided difference tends to D^alpha f itself.
inline MeanValueResult mean_value_check(const SmoothFunction& f, std::span<const double> x, const MultiIndex& alpha,
                                        double h, int samples = 65) {
    const std::size_t nd = x.size();
    if (alpha.size() != nd) throw std::invalid_argument("multi-index dimension does not match the point");
    MeanValueResult r{0.0, 0.0, 0.0};
    MultiIndex zero(nd);
    std::vector<double> y(nd);
    for (const auto& beta : sub_indices(alpha, false)) {
        for (std::size_t k = 0; k < nd; ++k) y[k] = x[k] + beta[k] * h;
        double sign = (alpha.length() - beta.length()) % 2 == 0 ? 1.0 : -1.0;
        r.difference += sign * static_cast<double>(multi_binom(alpha, beta)) * f(y, zero);
    }
    r.difference /= std::pow(h, alpha.length());

    r.lo = std::numeric_limits<double>::infinity();
    r.hi = -std::numeric_limits<double>::infinity();
    std::vector<int> cnt(nd);
    for (std::size_t k = 0; k < nd; ++k) cnt[k] = alpha[k] > 0 ? samples : 1;
    std::vector<int> cur(nd, 0);
    for (;;) {
        for (std::size_t k = 0; k < nd; ++k)
            y[k] = x[k] + (cnt[k] > 1 ? alpha[k] * h * cur[k] / (cnt[k] - 1) : 0.0);
        double v = f(y, alpha);
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
        std::size_t k = nd;
        while (k-- > 0) {
            if (cur[k] + 1 < cnt[k]) {
                ++cur[k];
                break;
            }
            cur[k] = 0;
        }
        if (k == static_cast<std::size_t>(-1)) break;
    }
    return r;
}

/// Lattice estimate of ||delta_h^gamma (u_l - u_inf)||_{H^m(region)}: samples
/// D^alpha w, |alpha| <= m, on the lattice over `region` extended by gamma_k
/// layers on the advancing side, differences it, and integrates the squares
/// with trapezoid weights. The extended region must lie in `container`, and
/// strictly inside it when gamma has a cross-sectional component.
template <PointEvaluator W>
double interior_derivative_error(const W& w, const MultiIndex& gamma, const Box& region, double h, int m,
                                 std::size_t p, const Box& container) {
    const std::size_t nd = region.dim();
    if (gamma.size() != nd) throw std::invalid_argument("multi-index dimension does not match the region");
    if (!(h > 0)) throw std::invalid_argument("lattice spacing must be positive");
    Box grown = region;
    std::vector<std::size_t> ext(nd);
    for (std::size_t k = 0; k < nd; ++k) {
        double cells = region.extent(k) / h;
        long nc = std::lround(cells);
        if (nc < 1 || std::abs(cells - static_cast<double>(nc)) > 1e-9 * std::max(1.0, cells))
            throw std::invalid_argument("region extent is not a multiple of the lattice spacing");
        ext[k] = static_cast<std::size_t>(nc) + 1 + static_cast<std::size_t>(gamma[k]);
        grown.hi[k] += gamma[k] * h;
    }
    if (!container.contains(grown)) throw std::domain_error("region inflated by the stencil leaves the domain");
    if (!in_N1(gamma, p, gamma.length())) {
        const double tol = 1e-12;
        for (std::size_t k = 0; k < nd; ++k)
            if (grown.lo[k] <= container.lo[k] + tol || grown.hi[k] >= container.hi[k] - tol)
                throw std::domain_error("difference with a cross-sectional component needs a strictly interior region");
    }

    const auto alphas = enumerate_upto(nd, m);
    std::vector<GridSample> samples;
    samples.reserve(alphas.size());
    for (std::size_t s = 0; s < alphas.size(); ++s)
        samples.emplace_back(region.lo, std::vector<double>(nd, h), ext);
    std::vector<double> x, vals(alphas.size());
    for (std::size_t flat = 0; flat < samples[0].size(); ++flat) {
        samples[0].point(flat, x);
        w(std::span<const double>(x), std::span<const MultiIndex>(alphas), std::span<double>(vals));
        for (std::size_t s = 0; s < alphas.size(); ++s) samples[s][flat] = vals[s];
    }

    double total = 0.0;
    for (std::size_t s = 0; s < alphas.size(); ++s) {
        GridSample d = delta_alpha(samples[s], gamma);
        for (std::size_t flat = 0; flat < d.size(); ++flat) {
            auto idx = d.unflatten(flat);
            double weight = 1.0;
            for (std::size_t k = 0; k < nd; ++k)
                weight *= (idx[k] == 0 || idx[k] + 1 == d.extents()[k]) ? 0.5 * h : h;
            total += weight * d[flat] * d[flat];
        }
    }
    return std::sqrt(total);
}

}  // namespace cylasym
