#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <random>
#include <vector>

#include "dqt/kernels.hpp"

namespace k = dqt::kernels;
namespace ref = dqt::kernels::reference;

namespace {

std::vector<double> randv(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-12) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_NEAR(a[i], b[i], tol * std::max(1.0, std::abs(b[i]))) << "index " << i;
  }
}

// Shapes that hit remainder paths of blocked loops.
const std::size_t kShapes[][3] = {{1, 1, 1}, {3, 5, 7}, {17, 33, 9}, {64, 81, 108}, {130, 7, 257}};

}  // namespace

TEST(Kernels, ReferenceGemmMatchesTripleLoop) {
  const std::size_t M = 5, N = 6, K = 7;
  const auto A = randv(M * K, 1), B = randv(K * N, 2);
  std::vector<double> C(M * N), want(M * N, 0.0);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t p = 0; p < K; ++p) want[i * N + j] += A[i * K + p] * B[p * N + j];
  ref::gemm(M, N, K, A.data(), K, B.data(), N, C.data(), N, false);
  expect_close(C, want);
}

TEST(Kernels, GemmVariantsMatchReference) {
  for (const auto& s : kShapes) {
    const std::size_t M = s[0], N = s[1], K = s[2];
    const auto A = randv(M * K, 3), B = randv(K * N, 4), Bt = randv(N * K, 5), At = randv(K * M, 6);
    const auto C0 = randv(M * N, 7);
    for (bool acc : {false, true}) {
      auto c1 = C0, c2 = C0;
      k::gemm(M, N, K, A.data(), K, B.data(), N, c1.data(), N, acc);
      ref::gemm(M, N, K, A.data(), K, B.data(), N, c2.data(), N, acc);
      expect_close(c1, c2);
      c1 = C0, c2 = C0;
      k::gemm_nt(M, N, K, A.data(), K, Bt.data(), K, c1.data(), N, acc);
      ref::gemm_nt(M, N, K, A.data(), K, Bt.data(), K, c2.data(), N, acc);
      expect_close(c1, c2);
      c1 = C0, c2 = C0;
      k::gemm_tn(M, N, K, At.data(), M, B.data(), N, c1.data(), N, acc);
      ref::gemm_tn(M, N, K, At.data(), M, B.data(), N, c2.data(), N, acc);
      expect_close(c1, c2);
    }
  }
}

TEST(Kernels, GemmRespectsLeadingDimensions) {
  const std::size_t M = 4, N = 3, K = 5, lda = 8, ldb = 6, ldc = 7;
  const auto A = randv(M * lda, 8), B = randv(K * ldb, 9);
  std::vector<double> c1(M * ldc, -1.0), c2(M * ldc, -1.0);
  k::gemm(M, N, K, A.data(), lda, B.data(), ldb, c1.data(), ldc, false);
  ref::gemm(M, N, K, A.data(), lda, B.data(), ldb, c2.data(), ldc, false);
  expect_close(c1, c2);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = N; j < ldc; ++j) EXPECT_EQ(c1[i * ldc + j], -1.0);  // padding untouched
}

TEST(Kernels, GemvAndTransposeMatchNaive) {
  for (const auto& s : kShapes) {
    const std::size_t M = s[0] * 3, N = s[2];
    const auto A = randv(M * N, 10), x = randv(N, 11), xt = randv(M, 12);
    std::vector<double> y(M, 0.5), want(M, 0.5), yt(N, 0.25), want_t(N, 0.25);
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < N; ++j) {
        want[i] += A[i * N + j] * x[j];
        want_t[j] += A[i * N + j] * xt[i];
      }
    k::gemv(M, N, A.data(), x.data(), y.data(), true);
    k::gemv_t(M, N, A.data(), xt.data(), yt.data(), true);
    expect_close(y, want);
    expect_close(yt, want_t);
    std::vector<double> r(M);
    ref::gemv(M, N, A.data(), x.data(), r.data(), false);
    k::gemv(M, N, A.data(), x.data(), y.data(), false);
    expect_close(y, r);
  }
}

TEST(Kernels, GerAndLinearBackward) {
  const std::size_t M = 37, N = 23;
  const auto W = randv(M * N, 13), x = randv(N, 14), dy = randv(M, 15);
  auto dW1 = randv(M * N, 16), dW2 = dW1;
  std::vector<double> dx1(N, 1.0), dx2(N, 1.0);
  k::linear_backward(M, N, W.data(), x.data(), dy.data(), dW1.data(), dx1.data());
  ref::ger(M, N, dy.data(), x.data(), dW2.data());
  ref::gemv_t(M, N, W.data(), dy.data(), dx2.data(), true);
  expect_close(dW1, dW2);
  expect_close(dx1, dx2);
  auto dW3 = randv(M * N, 16);
  k::linear_backward(M, N, W.data(), x.data(), dy.data(), dW3.data(), nullptr);
  expect_close(dW3, dW2);
  auto g1 = randv(M * N, 17), g2 = g1;
  k::ger(M, N, dy.data(), x.data(), g1.data());
  ref::ger(M, N, dy.data(), x.data(), g2.data());
  expect_close(g1, g2);
}

TEST(Kernels, Im2colMatchesDirectIndexing) {
  const std::size_t C = 3, H = 9, W = 9, kk = 3;
  for (std::size_t pad : {0u, 1u}) {
    for (std::size_t stride : {1u, 2u}) {
      const auto img = randv(C * H * W, 18);
      const std::size_t Ho = k::conv_out_extent(H, kk, stride, pad), Wo = k::conv_out_extent(W, kk, stride, pad);
      std::vector<double> col(C * kk * kk * Ho * Wo), rcol(col.size());
      k::im2col(C, H, W, kk, stride, pad, img.data(), col.data());
      ref::im2col(C, H, W, kk, stride, pad, img.data(), rcol.data());
      EXPECT_EQ(col, rcol);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t di = 0; di < kk; ++di)
          for (std::size_t dj = 0; dj < kk; ++dj)
            for (std::size_t oi = 0; oi < Ho; ++oi)
              for (std::size_t oj = 0; oj < Wo; ++oj) {
                const long r = static_cast<long>(oi * stride + di) - static_cast<long>(pad);
                const long q = static_cast<long>(oj * stride + dj) - static_cast<long>(pad);
                const double want = (r < 0 || q < 0 || r >= long(H) || q >= long(W)) ? 0.0 : img[c * H * W + r * W + q];
                ASSERT_EQ(col[((c * kk + di) * kk + dj) * Ho * Wo + oi * Wo + oj], want);
              }
    }
  }
}

TEST(Kernels, Col2imIsAdjointOfIm2col) {
  // <im2col(x), y> == <x, col2im(y)>
  const std::size_t C = 4, H = 9, W = 9, kk = 3, stride = 1, pad = 1;
  const std::size_t Ho = k::conv_out_extent(H, kk, stride, pad), Wo = k::conv_out_extent(W, kk, stride, pad);
  const auto x = randv(C * H * W, 19), y = randv(C * kk * kk * Ho * Wo, 20);
  std::vector<double> col(y.size()), back(x.size(), 0.0), rback(x.size(), 0.0);
  k::im2col(C, H, W, kk, stride, pad, x.data(), col.data());
  k::col2im(C, H, W, kk, stride, pad, y.data(), back.data());
  ref::col2im(C, H, W, kk, stride, pad, y.data(), rback.data());
  expect_close(back, rback);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += col[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));
}

TEST(Kernels, ElementwiseMatchReference) {
  const std::size_t n = 10007;
  auto p1 = randv(n, 21), p2 = p1, m1 = randv(n, 22), m2 = m1, v1 = randv(n, 23), v2 = v1;
  for (auto* v : {&v1, &v2})
    for (double& x : *v) x = x * x;
  const auto g = randv(n, 24);
  const k::AdamWStep st{1e-3, 0.9, 0.999, 1e-8, 1e-2, 1 - 0.9, 1 - 0.999};
  k::adamw(p1, g, m1, v1, st);
  ref::adamw(p2, g, m2, v2, st);
  expect_close(p1, p2, 1e-14);
  expect_close(m1, m2, 1e-14);
  expect_close(v1, v2, 1e-14);

  auto t1 = randv(n, 25), t2 = t1;
  const auto o = randv(n, 26);
  k::polyak(t1, o, 0.005);
  ref::polyak(t2, o, 0.005);
  expect_close(t1, t2, 1e-15);

  EXPECT_NEAR(k::sum_squares(o), ref::sum_squares(o), 1e-11 * ref::sum_squares(o));
  auto s1 = o, s2 = o;
  k::scale(s1, 0.3);
  ref::scale(s2, 0.3);
  EXPECT_EQ(s1, s2);
}

TEST(Kernels, ThreadCountDoesNotChangeResults) {
  const std::size_t M = 1024, N = 256;
  const auto A = randv(M * N, 27), x = randv(N, 28), big = randv(300001, 29);
  const int saved = omp_get_max_threads();
  std::vector<std::vector<double>> ys;
  std::vector<double> sums;
  for (int threads : {1, 2, 3}) {
    omp_set_num_threads(threads);
    std::vector<double> y(M);
    k::gemv(M, N, A.data(), x.data(), y.data(), false);
    ys.push_back(y);
    sums.push_back(k::sum_squares(big));
  }
  omp_set_num_threads(saved);
  EXPECT_EQ(ys[0], ys[1]);
  EXPECT_EQ(ys[0], ys[2]);
  EXPECT_EQ(sums[0], sums[1]);
  EXPECT_EQ(sums[0], sums[2]);
}
