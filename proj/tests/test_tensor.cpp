#include <gtest/gtest.h>

#include "mtbr/errors.hpp"
#include "mtbr/tensor.hpp"

using mtbr::DimensionError;
using mtbr::Tensor;

TEST(Tensor, ShapeAndFill) {
    Tensor t({2, 3}, 1.5);
    EXPECT_EQ(t.rank(), 2u);
    EXPECT_EQ(t.numel(), 6u);
    EXPECT_EQ(t.rows(), 2u);
    EXPECT_EQ(t.cols(), 3u);
    for (double v : t.data()) EXPECT_EQ(v, 1.5);
}

TEST(Tensor, DataLengthMustMatchShape) {
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
    EXPECT_NO_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3, 4}));
}

TEST(Tensor, ZeroDimensionRejected) {
    EXPECT_THROW(Tensor({0, 3}), DimensionError);
    EXPECT_THROW(Tensor({3, 0}, std::vector<double>{}), DimensionError);
}

TEST(Tensor, RowMajorIndexing) {
    const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(m.at(0, 2), 3.0);
    EXPECT_EQ(m.at(1, 0), 4.0);
    EXPECT_EQ(m[4], 5.0);
}

TEST(Tensor, VectorReadsAsOneRow) {
    const Tensor v = Tensor::vector({7, 8, 9});
    EXPECT_EQ(v.rows(), 1u);
    EXPECT_EQ(v.cols(), 3u);
    EXPECT_EQ(v.at(0, 1), 8.0);
}

TEST(Tensor, RowsColsNeedMatrix) {
    const Tensor t({2, 2, 2});
    EXPECT_THROW(t.rows(), DimensionError);
    EXPECT_THROW(t.cols(), DimensionError);
}

TEST(Tensor, FiniteCheck) {
    Tensor t({3});
    EXPECT_TRUE(t.all_finite());
    t[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(t.all_finite());
    t[1] = std::numeric_limits<double>::infinity();
    EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, EqualityComparesShapeAndValues) {
    EXPECT_EQ(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(1, 2, {1, 2}));
    EXPECT_FALSE(Tensor::matrix(1, 2, {1, 2}) == Tensor::vector({1, 2}));
    EXPECT_FALSE(Tensor::vector({1, 2}) == Tensor::vector({1, 3}));
}
