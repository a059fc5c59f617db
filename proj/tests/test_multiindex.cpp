#include <gtest/gtest.h>

#include <cylasym/multiindex.hpp>

using cylasym::MultiIndex;

TEST(MultiIndex, EnumerateCounts) {
    EXPECT_EQ(cylasym::enumerate_upto(2, 0).size(), 1u);
    EXPECT_EQ(cylasym::enumerate_upto(2, 1).size(), 3u);
    EXPECT_EQ(cylasym::enumerate_upto(2, 2).size(), 6u);
    EXPECT_EQ(cylasym::enumerate_upto(3, 2).size(), 10u);
    // C(n+m, m)
    for (std::size_t n = 1; n <= 4; ++n)
        for (int m = 0; m <= 4; ++m)
            EXPECT_EQ(cylasym::enumerate_upto(n, m).size(), cylasym::binomial(static_cast<int>(n) + m, m));
    EXPECT_EQ(cylasym::enumerate_exact(2, 2).size(), 3u);
}

TEST(MultiIndex, GradedOrder) {
    auto all = cylasym::enumerate_upto(2, 2);
    std::vector<MultiIndex> want{{0, 0}, {0, 1}, {1, 0}, {0, 2}, {1, 1}, {2, 0}};
    EXPECT_EQ(all, want);
    EXPECT_LT(MultiIndex({0, 1}), MultiIndex({1, 0}));
    EXPECT_LT(MultiIndex({2, 0}), MultiIndex({0, 3}));
}

TEST(MultiIndex, Arithmetic) {
    MultiIndex a{2, 1}, b{1, 1};
    EXPECT_EQ(a + b, MultiIndex({3, 2}));
    EXPECT_EQ(a - b, MultiIndex({1, 0}));
    EXPECT_THROW(b - a, std::invalid_argument);
    EXPECT_EQ(a.length(), 3);
    EXPECT_TRUE(b.dominated_by(a));
    EXPECT_FALSE(a.dominated_by(b));
    EXPECT_EQ(a.code(), "2_1");
    EXPECT_EQ(MultiIndex::unit(3, 1, 2), MultiIndex({0, 2, 0}));
    EXPECT_EQ(MultiIndex({1, 2, 3}).slice(1, 2), MultiIndex({2, 3}));
    EXPECT_THROW(MultiIndex({1, -1}), std::invalid_argument);
}

TEST(MultiIndex, AxialAndCrossSets) {
    EXPECT_TRUE(cylasym::in_N1(MultiIndex{2, 0}, 1, 2));
    EXPECT_FALSE(cylasym::in_N1(MultiIndex{1, 1}, 1, 2));
    EXPECT_TRUE(cylasym::in_N2(MultiIndex{0, 2}, 1, 2));
    EXPECT_FALSE(cylasym::in_N2(MultiIndex{1, 0}, 1, 2));
    EXPECT_FALSE(cylasym::in_N2(MultiIndex{0, 3}, 1, 2));
    EXPECT_TRUE(cylasym::in_N1(MultiIndex{0, 0}, 1, 1));
    EXPECT_TRUE(cylasym::in_N2(MultiIndex{0, 0}, 1, 1));
}

TEST(MultiIndex, Binomials) {
    EXPECT_EQ(cylasym::binomial(5, 2), 10u);
    EXPECT_EQ(cylasym::binomial(5, 6), 0u);
    EXPECT_EQ(cylasym::multi_binom(MultiIndex{2, 1}, MultiIndex{1, 1}), 2u);
    EXPECT_EQ(cylasym::multi_binom(MultiIndex{3, 2}, MultiIndex{1, 1}), 6u);
    EXPECT_THROW(cylasym::multi_binom(MultiIndex{1, 0}, MultiIndex{0, 1}), std::invalid_argument);
    // Vandermonde: sum_{beta <= alpha} C(alpha, beta) = 2^|alpha|
    for (const auto& a : cylasym::enumerate_upto(3, 4)) {
        std::uint64_t s = 0;
        for (const auto& b : cylasym::sub_indices(a, false)) s += cylasym::multi_binom(a, b);
        EXPECT_EQ(s, 1u << a.length());
    }
}

TEST(MultiIndex, SubIndices) {
    auto s = cylasym::sub_indices(MultiIndex{1, 1}, false);
    EXPECT_EQ(s.size(), 4u);
    auto st = cylasym::sub_indices(MultiIndex{1, 1}, true);
    EXPECT_EQ(st.size(), 3u);
    for (const auto& b : st) EXPECT_NE(b, MultiIndex({1, 1}));
}

TEST(MultiIndex, Parse) {
    EXPECT_EQ(cylasym::parse_multiindex("2_0", 2), MultiIndex({2, 0}));
    EXPECT_EQ(cylasym::parse_multiindex("0_1_3", 3), MultiIndex({0, 1, 3}));
    EXPECT_THROW(cylasym::parse_multiindex("2_0", 3), std::invalid_argument);
    EXPECT_THROW(cylasym::parse_multiindex("2__0", 3), std::invalid_argument);
    EXPECT_THROW(cylasym::parse_multiindex("a_0", 2), std::invalid_argument);
}
