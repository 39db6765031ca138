#include <gtest/gtest.h>

#include "support.hpp"

namespace vanka {
namespace {

TEST(SparseMatrix, FromTripletsSumsDuplicatesAndSortsColumns) {
  const auto m = SparseMatrix::from_triplets(2, 3, {{0, 2, 1.0}, {0, 0, 2.0}, {0, 2, 0.5}, {1, 1, -1.0}});
  EXPECT_EQ(m.nonzeros(), 3u);
  EXPECT_DOUBLE_EQ(m.coeff(0, 2), 1.5);
  EXPECT_DOUBLE_EQ(m.coeff(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(m.coeff(0, 1), 0.0);
  EXPECT_FALSE(m.has_entry(0, 1));
  const auto c = m.row_cols(0);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], 0);
  EXPECT_EQ(c[1], 2);
}

TEST(SparseMatrix, ExplicitZerosStayStructural) {
  const auto m = SparseMatrix::from_triplets(1, 2, {{0, 1, 1.0}, {0, 1, -1.0}});
  EXPECT_TRUE(m.has_entry(0, 1));
  EXPECT_EQ(m.coeff(0, 1), 0.0);
}

TEST(SparseMatrix, RejectsOutOfRangeTriplets) {
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), DimensionError);
}

TEST(SparseMatrix, SpmvMatchesDense) {
  const auto m = SparseMatrix::from_triplets(3, 3, {{0, 0, 4}, {0, 1, -1}, {1, 0, -1}, {1, 1, 4}, {1, 2, -1}, {2, 1, -1}, {2, 2, 4}});
  const Vector x{1.0, 2.0, 3.0};
  const auto y = spmv(m, x);
  const auto yd = m.to_dense().multiply(x);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(y[i], yd[i]);
  EXPECT_DOUBLE_EQ(y[0], 2.0);
  EXPECT_DOUBLE_EQ(y[1], 4.0);
  EXPECT_DOUBLE_EQ(y[2], 10.0);
  const auto r = residual(m, x, Vector{2.0, 4.0, 10.0});
  EXPECT_EQ(norm_inf(r), 0.0);
}

TEST(SparseMatrix, SpmvRejectsSizeMismatch) {
  const auto m = SparseMatrix::identity(3);
  EXPECT_THROW(spmv(m, Vector{1.0, 2.0}), DimensionError);
}

TEST(SparseMatrix, TransposeIsEntrywise) {
  const auto m = SparseMatrix::from_triplets(2, 3, {{0, 2, 1.0}, {1, 0, 2.0}, {1, 2, 3.0}});
  const auto t = m.transposed();
  EXPECT_EQ(t.rows(), 3);
  EXPECT_EQ(t.cols(), 2);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j) EXPECT_EQ(m.coeff(i, j), t.coeff(j, i));
}

TEST(SparseMatrix, ExtractSubmatrix) {
  const auto m = SparseMatrix::from_triplets(3, 3, {{0, 0, 1}, {0, 2, 2}, {1, 1, 3}, {2, 0, 4}, {2, 2, 5}});
  const std::vector<Index> idx{0, 2};
  const auto s = extract_submatrix(m, idx, idx);
  EXPECT_EQ(s(0, 0), 1.0);
  EXPECT_EQ(s(0, 1), 2.0);
  EXPECT_EQ(s(1, 0), 4.0);
  EXPECT_EQ(s(1, 1), 5.0);
}

TEST(Norms, Euclidean) {
  EXPECT_DOUBLE_EQ(norm2(Vector{3.0, 4.0}), 5.0);
  EXPECT_DOUBLE_EQ(norm_inf(Vector{3.0, -4.0}), 4.0);
}

TEST(DenseLU, SolvesSmallSystemExactly) {
  DenseMatrix a(2, 2);
  a.row(0)[0] = 0.0;
  a.row(0)[1] = 2.0;
  a.row(1)[0] = 1.0;
  a.row(1)[1] = 1.0;
  const auto lu = lu_factor(a);
  const auto x = lu_solve(lu, Vector{4.0, 3.0});
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_DOUBLE_EQ(x[1], 2.0);
}

TEST(DenseLU, SingularMatrixNamesSubdomainAndPivot) {
  DenseMatrix a(2, 2);
  a.row(0)[0] = 1.0;
  a.row(0)[1] = 2.0;
  a.row(1)[0] = 2.0;
  a.row(1)[1] = 4.0;
  try {
    lu_factor(a, 7);
    FAIL() << "expected SingularLocalSystem";
  } catch (const SingularLocalSystem& e) {
    EXPECT_EQ(e.subdomain(), 7);
    EXPECT_EQ(e.pivot(), 1);
  }
}

TEST(DenseLU, ZeroMatrixIsSingular) { EXPECT_THROW(lu_factor(DenseMatrix(3, 3)), SingularLocalSystem); }

// Conjugate gradients as an independent oracle on an SPD matrix.
Vector conjugate_gradient(const DenseMatrix& a, const Vector& b) {
  const auto n = b.size();
  Vector x(n, 0.0), r = b, p = b;
  double rr = 0.0;
  for (double v : r) rr += v * v;
  for (std::size_t it = 0; it < 10 * n && rr > 1e-30; ++it) {
    const auto ap = a.multiply(p);
    double pap = 0.0;
    for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    const double alpha = rr / pap;
    double rr_new = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rr_new += r[i] * r[i];
    }
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + rr_new / rr * p[i];
    rr = rr_new;
  }
  return x;
}

TEST(DenseLU, AgreesWithConjugateGradientsOnSpdMatrix) {
  const Index n = 12;
  const auto g = testing::random_vector(n * n, 3);
  DenseMatrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m.row(i)[j] = g[i * n + j];
  auto spd = m.transposed().multiply(m);
  for (Index i = 0; i < n; ++i) spd.row(i)[i] += n;
  const auto b = testing::random_vector(n, 4);
  const auto x_lu = lu_solve(lu_factor(spd), b);
  const auto x_cg = conjugate_gradient(spd, b);
  for (Index i = 0; i < n; ++i) EXPECT_NEAR(x_lu[i], x_cg[i], 1e-10);
}

TEST(DenseLU, TransposedSolveMatchesExplicitTranspose) {
  const Index n = 9;
  const auto g = testing::random_vector(n * n, 11);
  DenseMatrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m.row(i)[j] = g[i * n + j] + (i == j ? 3.0 : 0.0);
  const auto b = testing::random_vector(n, 12);
  const auto x1 = lu_solve_transposed(lu_factor(m), b);
  const auto x2 = lu_solve(lu_factor(m.transposed()), b);
  for (Index i = 0; i < n; ++i) EXPECT_NEAR(x1[i], x2[i], 1e-12);
}

TEST(DenseLU, IndefiniteSaddlePointBlock) {
  // Symmetric indefinite, zero (2,2) entry.
  DenseMatrix a(3, 3);
  const double v[3][3] = {{2, 0, 1}, {0, 2, 1}, {1, 1, 0}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a.row(i)[j] = v[i][j];
  const Vector e{1.0, -2.0, 0.5};
  const auto b = a.multiply(e);
  const auto x = lu_solve(lu_factor(a), b);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(x[i], e[i], 1e-14);
}

}  // namespace
}  // namespace vanka
