#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cylasym {

/// Derivative orders per coordinate, alpha = (alpha_1, ..., alpha_n).
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::size_t n) : entries_(n, 0) {}
    MultiIndex(std::initializer_list<int> entries) : entries_(entries) { check(); }
    explicit MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) { check(); }

    static MultiIndex unit(std::size_t n, std::size_t k, int order = 1) {
        MultiIndex e(n);
        e.entries_.at(k) = order;
        return e;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    int operator[](std::size_t k) const { return entries_[k]; }
    int& operator[](std::size_t k) { return entries_[k]; }
    const std::vector<int>& entries() const noexcept { return entries_; }

    /// |alpha|
    int length() const noexcept { return std::accumulate(entries_.begin(), entries_.end(), 0); }
    bool is_zero() const noexcept { return length() == 0; }
    int max_entry() const noexcept {
        return entries_.empty() ? 0 : *std::max_element(entries_.begin(), entries_.end());
    }

    /// Componentwise alpha' <= alpha.
    bool dominated_by(const MultiIndex& other) const {
        if (size() != other.size()) return false;
        for (std::size_t k = 0; k < size(); ++k)
            if (entries_[k] > other.entries_[k]) return false;
        return true;
    }

    MultiIndex operator+(const MultiIndex& o) const {
        require_same_size(o);
        MultiIndex r = *this;
        for (std::size_t k = 0; k < size(); ++k) r.entries_[k] += o.entries_[k];
        return r;
    }
    MultiIndex operator-(const MultiIndex& o) const {
        require_same_size(o);
        MultiIndex r = *this;
        for (std::size_t k = 0; k < size(); ++k) {
            r.entries_[k] -= o.entries_[k];
            if (r.entries_[k] < 0) throw std::invalid_argument("multi-index difference is negative");
        }
        return r;
    }

    /// Sub-index over coordinates [first, first+count).
    MultiIndex slice(std::size_t first, std::size_t count) const {
        return MultiIndex(std::vector<int>(entries_.begin() + static_cast<std::ptrdiff_t>(first),
                                           entries_.begin() + static_cast<std::ptrdiff_t>(first + count)));
    }

    bool operator==(const MultiIndex&) const = default;

    /// Graded lexicographic order: by |alpha|, then lexicographically on the
    /// entries, so that (0,1) precedes (1,0).
    std::strong_ordering operator<=>(const MultiIndex& o) const {
        if (auto c = length() <=> o.length(); c != 0) return c;
        if (auto c = size() <=> o.size(); c != 0) return c;
        for (std::size_t k = 0; k < size(); ++k)
            if (auto c = entries_[k] <=> o.entries_[k]; c != 0) return c;
        return std::strong_ordering::equal;
    }

    /// Underscore-joined digits, e.g. "2_0".
    std::string code() const {
        std::string s;
        for (std::size_t k = 0; k < size(); ++k) {
            if (k) s += '_';
            s += std::to_string(entries_[k]);
        }
        return s;
    }

private:
    void check() const {
        for (int e : entries_)
            if (e < 0) throw std::invalid_argument("multi-index entries must be non-negative");
    }
    void require_same_size(const MultiIndex& o) const {
        if (size() != o.size()) throw std::invalid_argument("multi-index dimension mismatch");
    }

    std::vector<int> entries_;
};

/// All alpha in N^n with |alpha| <= m, in graded lexicographic order.
inline std::vector<MultiIndex> enumerate_upto(std::size_t n, int m) {
    if (n == 0) throw std::invalid_argument("enumerate_upto: n must be >= 1");
    if (m < 0) throw std::invalid_argument("enumerate_upto: m must be >= 0");
    std::vector<MultiIndex> out;
    MultiIndex cur(n);
    // odometer over the box {0..m}^n, filtered by total order
    for (;;) {
        if (cur.length() <= m) out.push_back(cur);
        std::size_t k = 0;
        while (k < n && cur[k] == m) cur[k++] = 0;
        if (k == n) break;
        ++cur[k];
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// All alpha with |alpha| == m exactly.
inline std::vector<MultiIndex> enumerate_exact(std::size_t n, int m) {
    std::vector<MultiIndex> out;
    for (auto& a : enumerate_upto(n, m))
        if (a.length() == m) out.push_back(a);
    return out;
}

/// Axial-only indices: entries p+1..n vanish.
inline bool in_N1(const MultiIndex& a, std::size_t p, int m) {
    for (std::size_t k = p; k < a.size(); ++k)
        if (a[k] != 0) return false;
    return a.length() <= m;
}

/// Cross-sectional-only indices: entries 1..p vanish.
inline bool in_N2(const MultiIndex& a, std::size_t p, int m) {
    for (std::size_t k = 0; k < p && k < a.size(); ++k)
        if (a[k] != 0) return false;
    return a.length() <= m;
}

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
}

/// prod_i C(alpha_i, sub_i); the Leibniz-rule coefficient.
inline std::uint64_t multi_binom(const MultiIndex& alpha, const MultiIndex& sub) {
    if (!sub.dominated_by(alpha)) throw std::invalid_argument("multi_binom: sub-index is not dominated by alpha");
    std::uint64_t r = 1;
    for (std::size_t k = 0; k < alpha.size(); ++k) r *= binomial(alpha[k], sub[k]);
    return r;
}

/// All alpha' <= alpha (alpha' < alpha when strict), graded lexicographic.
inline std::vector<MultiIndex> sub_indices(const MultiIndex& alpha, bool strict) {
    std::vector<MultiIndex> out;
    if (alpha.size() == 0) return out;
    MultiIndex cur(alpha.size());
    for (;;) {
        if (!(strict && cur == alpha)) out.push_back(cur);
        std::size_t k = 0;
        while (k < alpha.size() && cur[k] == alpha[k]) cur[k++] = 0;
        if (k == alpha.size()) break;
        ++cur[k];
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Parses "2_0" (exactly n entries) into a multi-index.
inline MultiIndex parse_multiindex(std::string_view code, std::size_t n) {
    std::vector<int> e;
    std::size_t pos = 0;
    while (pos <= code.size()) {
        std::size_t next = code.find('_', pos);
        if (next == std::string_view::npos) next = code.size();
        std::string_view tok = code.substr(pos, next - pos);
        if (tok.empty() || tok.find_first_not_of("0123456789") != std::string_view::npos)
            throw std::invalid_argument("malformed multi-index '" + std::string(code) + "'");
        e.push_back(std::stoi(std::string(tok)));
        pos = next + 1;
    }
    if (e.size() != n)
        throw std::invalid_argument("multi-index '" + std::string(code) + "' does not have " + std::to_string(n) +
                                    " entries");
    return MultiIndex(std::move(e));
}

}  // namespace cylasym
