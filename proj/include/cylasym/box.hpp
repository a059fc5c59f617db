#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cylasym {

/// Axis-aligned box [lo_1,hi_1] x ... x [lo_n,hi_n].
struct Box {
    std::vector<double> lo, hi;

    Box() = default;
    Box(std::vector<double> lo_, std::vector<double> hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
        if (lo.size() != hi.size()) throw std::invalid_argument("box bounds have different dimensions");
        for (std::size_t k = 0; k < lo.size(); ++k)
            if (!(lo[k] < hi[k])) throw std::invalid_argument("box has empty extent along axis " + std::to_string(k + 1));
    }

    std::size_t dim() const noexcept { return lo.size(); }
    double extent(std::size_t k) const { return hi[k] - lo[k]; }

    double volume() const {
        double v = 1.0;
        for (std::size_t k = 0; k < dim(); ++k) v *= extent(k);
        return v;
    }

    bool contains(const Box& inner, double tol = 1e-12) const {
        if (inner.dim() != dim()) return false;
        for (std::size_t k = 0; k < dim(); ++k)
            if (inner.lo[k] < lo[k] - tol || inner.hi[k] > hi[k] + tol) return false;
        return true;
    }

    /// Cartesian product this x other.
    Box times(const Box& other) const {
        Box b = *this;
        b.lo.insert(b.lo.end(), other.lo.begin(), other.lo.end());
        b.hi.insert(b.hi.end(), other.hi.begin(), other.hi.end());
        return b;
    }

    /// (-l, l)^p.
    static Box centered_cube(std::size_t p, double l) {
        return Box(std::vector<double>(p, -l), std::vector<double>(p, l));
    }
};

}  // namespace cylasym
