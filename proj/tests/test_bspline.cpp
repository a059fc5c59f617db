#include <gtest/gtest.h>

#include <cmath>

#include <cylasym/bspline.hpp>

using namespace cylasym;

TEST(Spline1D, Dimension) {
    for (int d = 1; d <= 4; ++d)
        for (int m = 0; m <= std::min(d, 3); ++m) {
            SplineBasis1D b(0.0, 1.0, 8, d, m);
            EXPECT_EQ(b.size(), 8 + d - 2 * m);
            EXPECT_EQ(b.full_size(), 8 + d);
        }
    EXPECT_THROW(SplineBasis1D(0.0, 1.0, 1, 1, 1), std::invalid_argument);
    EXPECT_THROW(SplineBasis1D(1.0, 0.0, 4, 2, 1), std::invalid_argument);
}

TEST(Spline1D, PartitionOfUnity) {
    SplineBasis1D b(-1.0, 2.0, 7, 3, 0);
    for (double x = -1.0; x <= 2.0; x += 0.01) {
        double s = 0, ds = 0;
        for (int i = 0; i < b.size(); ++i) {
            s += b.eval(i, x);
            ds += b.eval(i, x, 1);
        }
        EXPECT_NEAR(s, 1.0, 1e-14);
        EXPECT_NEAR(ds, 0.0, 1e-12);
    }
}

TEST(Spline1D, DerivativesMatchDifferences) {
    SplineBasis1D b(0.0, 1.0, 5, 4, 0);
    const double h = 1e-5;
    for (int i = 0; i < b.size(); ++i)
        for (double x : {0.13, 0.41, 0.77, 0.95})
            for (int k = 0; k < 3; ++k) {
                double fd = (b.eval(i, x + h, k) - b.eval(i, x - h, k)) / (2 * h);
                EXPECT_NEAR(b.eval(i, x, k + 1), fd, 1e-5 * std::max(1.0, std::abs(fd)));
            }
}

TEST(Spline1D, BoundaryConditions) {
    for (int m = 1; m <= 3; ++m) {
        SplineBasis1D b(0.0, 1.0, 9, m + 1, m);
        for (int i = 0; i < b.size(); ++i)
            for (int k = 0; k < m; ++k) {
                EXPECT_NEAR(b.eval(i, 0.0, k), 0.0, 1e-12) << "m=" << m << " i=" << i << " k=" << k;
                EXPECT_NEAR(b.eval(i, 1.0, k), 0.0, 1e-12);
            }
    }
}

TEST(Spline1D, ReproducesPolynomials) {
    // sum_i c_i N_i = x^2 via least squares collocation would be indirect; use the
    // Greville/marsden identity for x: sum (knot average) N_i = x
    SplineBasis1D b(0.0, 2.0, 6, 3, 0);
    const auto& U = b.knots();
    for (double x = 0.0; x <= 2.0; x += 0.05) {
        double s = 0;
        for (int i = 0; i < b.size(); ++i) {
            double g = (U[static_cast<std::size_t>(i + 1)] + U[static_cast<std::size_t>(i + 2)] +
                        U[static_cast<std::size_t>(i + 3)]) / 3.0;
            s += g * b.eval(i, x);
        }
        EXPECT_NEAR(s, x, 1e-13);
    }
}

TEST(Spline1D, HigherDerivativesVanish) {
    SplineBasis1D b(0.0, 1.0, 4, 2, 0);
    std::vector<double> out;
    b.derivatives(1, 0.3, 4, out);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(out[3 * 3 + j], 0.0);
        EXPECT_EQ(out[4 * 3 + j], 0.0);
    }
}

TEST(TensorBasis, LayoutAndSupport) {
    Box box({-2.0, 0.0}, {2.0, 1.0});
    TensorBasis t = TensorBasis::on_box(box, 4, 2, 1);
    EXPECT_EQ(t.factor(0).cells(), 16);
    EXPECT_EQ(t.factor(1).cells(), 4);
    EXPECT_EQ(t.dof_count(), static_cast<std::size_t>((16 + 2 - 2) * (4 + 2 - 2)));
    EXPECT_EQ(t.stride(1), 1u);
    EXPECT_EQ(t.stride(0), 4u);
    auto idx = t.unflatten(9);
    EXPECT_EQ(idx[0], 2);
    EXPECT_EQ(idx[1], 1);
    Box s = t.support(0);
    EXPECT_DOUBLE_EQ(s.lo[0], -2.0);
    EXPECT_DOUBLE_EQ(s.hi[0], -1.5);
    EXPECT_TRUE(box.contains(t.support(t.dof_count() - 1)));
    EXPECT_THROW(TensorBasis::on_box(box, 1, 2, 1), std::invalid_argument);
}
