#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <cylasym/expression.hpp>

#include "corpus.hpp"

using cylasym::Expression;
using cylasym::ParseError;

TEST(Expression, GoldenCorpus) {
    auto cases = cylasym::testing::load_corpus(std::string(CYLASYM_TEST_DATA) + "/expression_corpus.tsv");
    ASSERT_EQ(cases.size(), 50u);
    for (const auto& c : cases) {
        auto r = cylasym::testing::run_case(c);
        EXPECT_TRUE(r.ok) << "line " << c.line << ": '" << c.input << "' expected " << c.expected << ", got " << r.got;
    }
}

TEST(Expression, Evaluation) {
    double x[] = {0.3, 0.7};
    EXPECT_DOUBLE_EQ(Expression::parse("x1 + x2")(x), 1.0);
    EXPECT_DOUBLE_EQ(Expression::parse("sin(pi*x2)")(x), std::sin(std::numbers::pi * 0.7));
    EXPECT_DOUBLE_EQ(Expression::parse("2^3^2")(x), 512.0);
    EXPECT_DOUBLE_EQ(Expression::constant(2.5)(x), 2.5);
}

TEST(Expression, VariableQueries) {
    auto e = Expression::parse("x1*x3 + 1");
    EXPECT_EQ(e.max_variable(), 3);
    EXPECT_TRUE(e.references_any(1, 1));
    EXPECT_FALSE(e.references_any(2, 2));
    EXPECT_FALSE(e.is_constant());
    EXPECT_TRUE(Expression::parse("pi^2").is_constant());
}

TEST(Expression, ErrorOffsets) {
    try {
        Expression::parse("1 + 2 * (x1 - )");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.kind(), ParseError::Kind::syntax);
        EXPECT_EQ(e.offset(), 14u);
    }
    try {
        Expression::parse("x1 + bogus");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.kind(), ParseError::Kind::unknown_identifier);
        EXPECT_EQ(e.offset(), 5u);
    }
}

namespace {

std::string random_expr(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 9);
    switch (pick(rng)) {
        case 0: return std::to_string(std::uniform_int_distribution<int>(0, 9)(rng));
        case 1: return "x" + std::to_string(std::uniform_int_distribution<int>(1, 3)(rng));
        case 2: return "pi";
        case 3: return "-" + random_expr(rng, depth - 1);
        case 4: return random_expr(rng, depth - 1) + " + " + random_expr(rng, depth - 1);
        case 5: return random_expr(rng, depth - 1) + "-" + random_expr(rng, depth - 1);
        case 6: return random_expr(rng, depth - 1) + "*" + random_expr(rng, depth - 1);
        case 7: return "(" + random_expr(rng, depth - 1) + ")/(" + random_expr(rng, depth - 1) + ")";
        case 8: return "(" + random_expr(rng, depth - 1) + ")^2";
        default: {
            const char* fns[] = {"sin", "cos", "exp"};
            return std::string(fns[std::uniform_int_distribution<int>(0, 2)(rng)]) + "(" + random_expr(rng, depth - 1) + ")";
        }
    }
}

}  // namespace

TEST(Expression, PrintParseRoundTrip) {
    std::mt19937_64 rng(11);
    double x[] = {0.4, -1.3, 2.1};
    for (int i = 0; i < 300; ++i) {
        std::string s = random_expr(rng, 4);
        Expression e = Expression::parse(s);
        Expression back = Expression::parse(e.print());
        EXPECT_EQ(back, e) << s;
        EXPECT_EQ(back.print(), e.print());
        double a = e(x), b = back(x);
        if (std::isfinite(a)) {
            EXPECT_EQ(a, b) << s;
        }
    }
}
