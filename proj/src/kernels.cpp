#include "dqt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dqt::kernels {

namespace {

constexpr std::size_t kMr = 4;
constexpr std::size_t kNr = 16;
constexpr std::size_t kChunk = 4096;  // fixed reduction chunk, independent of thread count

void micro_tile(std::size_t K, const double* A, std::size_t lda, const double* B, std::size_t ldb, double* C,
                std::size_t ldc, bool accumulate) {
  double acc[kMr][kNr];
  for (std::size_t i = 0; i < kMr; ++i) {
#pragma omp simd
    for (std::size_t j = 0; j < kNr; ++j) acc[i][j] = accumulate ? C[i * ldc + j] : 0.0;
  }
  for (std::size_t k = 0; k < K; ++k) {
    const double* b = B + k * ldb;
    for (std::size_t i = 0; i < kMr; ++i) {
      const double a = A[i * lda + k];
#pragma omp simd
      for (std::size_t j = 0; j < kNr; ++j) acc[i][j] += a * b[j];
    }
  }
  for (std::size_t i = 0; i < kMr; ++i) {
#pragma omp simd
    for (std::size_t j = 0; j < kNr; ++j) C[i * ldc + j] = acc[i][j];
  }
}

void edge_tile(std::size_t mr, std::size_t nr, std::size_t K, const double* A, std::size_t lda, const double* B,
               std::size_t ldb, double* C, std::size_t ldc, bool accumulate) {
  double acc[kMr][kNr] = {};
  for (std::size_t i = 0; i < mr; ++i) {
    for (std::size_t j = 0; j < nr; ++j) acc[i][j] = accumulate ? C[i * ldc + j] : 0.0;
  }
  for (std::size_t k = 0; k < K; ++k) {
    const double* b = B + k * ldb;
    for (std::size_t i = 0; i < mr; ++i) {
      const double a = A[i * lda + k];
      for (std::size_t j = 0; j < nr; ++j) acc[i][j] += a * b[j];
    }
  }
  for (std::size_t i = 0; i < mr; ++i) {
    for (std::size_t j = 0; j < nr; ++j) C[i * ldc + j] = acc[i][j];
  }
}

void transpose(std::size_t rows, std::size_t cols, const double* a, std::size_t lda, double* out) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t r1 = std::min(rows, r0 + kBlock), c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = a[r * lda + c];
      }
    }
  }
}

std::vector<double>& scratch() {
  thread_local std::vector<double> buf;
  return buf;
}

}  // namespace

void gemm(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
          std::size_t ldb, double* C, std::size_t ldc, bool accumulate) {
  const long m_blocks = static_cast<long>((M + kMr - 1) / kMr);
#pragma omp parallel for schedule(static)
  for (long mb = 0; mb < m_blocks; ++mb) {
    const std::size_t i0 = static_cast<std::size_t>(mb) * kMr;
    const std::size_t mr = std::min(kMr, M - i0);
    for (std::size_t j0 = 0; j0 < N; j0 += kNr) {
      const std::size_t nr = std::min(kNr, N - j0);
      if (mr == kMr && nr == kNr) {
        micro_tile(K, A + i0 * lda, lda, B + j0, ldb, C + i0 * ldc + j0, ldc, accumulate);
      } else {
        edge_tile(mr, nr, K, A + i0 * lda, lda, B + j0, ldb, C + i0 * ldc + j0, ldc, accumulate);
      }
    }
  }
}

void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
             std::size_t ldb, double* C, std::size_t ldc, bool accumulate) {
  auto& bt = scratch();
  bt.resize(K * N);
  transpose(N, K, B, ldb, bt.data());
  gemm(M, N, K, A, lda, bt.data(), N, C, ldc, accumulate);
}

void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
             std::size_t ldb, double* C, std::size_t ldc, bool accumulate) {
  auto& at = scratch();
  at.resize(M * K);
  transpose(K, M, A, lda, at.data());
  gemm(M, N, K, at.data(), K, B, ldb, C, ldc, accumulate);
}

namespace {

// Dot products of four rows with x, eight lanes per row.
void dot4(std::size_t N, const double* r0, const double* r1, const double* r2, const double* r3, const double* x,
          double out[4]) {
  double l0[8] = {}, l1[8] = {}, l2[8] = {}, l3[8] = {};
  std::size_t j = 0;
  for (; j + 8 <= N; j += 8) {
#pragma omp simd
    for (std::size_t l = 0; l < 8; ++l) {
      const double xv = x[j + l];
      l0[l] += r0[j + l] * xv;
      l1[l] += r1[j + l] * xv;
      l2[l] += r2[j + l] * xv;
      l3[l] += r3[j + l] * xv;
    }
  }
  for (; j < N; ++j) {
    l0[0] += r0[j] * x[j];
    l1[0] += r1[j] * x[j];
    l2[0] += r2[j] * x[j];
    l3[0] += r3[j] * x[j];
  }
  const auto fold = [](const double* l) { return ((l[0] + l[1]) + (l[2] + l[3])) + ((l[4] + l[5]) + (l[6] + l[7])); };
  out[0] = fold(l0);
  out[1] = fold(l1);
  out[2] = fold(l2);
  out[3] = fold(l3);
}

}  // namespace

void gemv(std::size_t M, std::size_t N, const double* A, const double* x, double* y, bool accumulate) {
  const long groups = static_cast<long>((M + 3) / 4);
#pragma omp parallel for schedule(static)
  for (long g = 0; g < groups; ++g) {
    const std::size_t i0 = static_cast<std::size_t>(g) * 4;
    const double* rows[4];
    for (std::size_t r = 0; r < 4; ++r) rows[r] = A + std::min(i0 + r, M - 1) * N;
    double s[4];
    dot4(N, rows[0], rows[1], rows[2], rows[3], x, s);
    for (std::size_t r = 0; r < 4 && i0 + r < M; ++r) y[i0 + r] = accumulate ? y[i0 + r] + s[r] : s[r];
  }
}

void gemv_t(std::size_t M, std::size_t N, const double* A, const double* x, double* y, bool accumulate) {
  constexpr std::size_t kCols = 512;
  const long blocks = static_cast<long>((N + kCols - 1) / kCols);
#pragma omp parallel for schedule(static)
  for (long b = 0; b < blocks; ++b) {
    const std::size_t j0 = static_cast<std::size_t>(b) * kCols, j1 = std::min(N, j0 + kCols);
    if (!accumulate) std::fill(y + j0, y + j1, 0.0);
    for (std::size_t i = 0; i < M; ++i) {
      const double xi = x[i];
      const double* row = A + i * N;
#pragma omp simd
      for (std::size_t j = j0; j < j1; ++j) y[j] += row[j] * xi;
    }
  }
}

void ger(std::size_t M, std::size_t N, const double* x, const double* y, double* A) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(M); ++i) {
    const double xi = x[i];
    double* row = A + static_cast<std::size_t>(i) * N;
#pragma omp simd
    for (std::size_t j = 0; j < N; ++j) row[j] += xi * y[j];
  }
}

void linear_backward(std::size_t M, std::size_t N, const double* W, const double* x, const double* dy, double* dW,
                     double* dx) {
  constexpr std::size_t kCols = 512;
  const long blocks = static_cast<long>((N + kCols - 1) / kCols);
#pragma omp parallel for schedule(static)
  for (long b = 0; b < blocks; ++b) {
    const std::size_t j0 = static_cast<std::size_t>(b) * kCols, j1 = std::min(N, j0 + kCols);
    for (std::size_t i = 0; i < M; ++i) {
      const double g = dy[i];
      if (g == 0.0) continue;
      double* wrow = dW + i * N;
      if (dx) {
        const double* row = W + i * N;
#pragma omp simd
        for (std::size_t j = j0; j < j1; ++j) {
          wrow[j] += g * x[j];
          dx[j] += row[j] * g;
        }
      } else {
#pragma omp simd
        for (std::size_t j = j0; j < j1; ++j) wrow[j] += g * x[j];
      }
    }
  }
}

void im2col(std::size_t C, std::size_t H, std::size_t W, std::size_t k, std::size_t stride, std::size_t pad,
            const double* image, double* col) {
  const std::size_t Ho = conv_out_extent(H, k, stride, pad), Wo = conv_out_extent(W, k, stride, pad);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < static_cast<long>(C); ++c) {
    const double* plane = image + static_cast<std::size_t>(c) * H * W;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* out = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * Ho * Wo;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          double* dst = out + oy * Wo;
          if (iy < 0 || iy >= static_cast<long>(H)) {
            std::fill(dst, dst + Wo, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * W;
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            dst[ox] = (ix >= 0 && ix < static_cast<long>(W)) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(std::size_t C, std::size_t H, std::size_t W, std::size_t k, std::size_t stride, std::size_t pad,
            const double* col, double* image_grad) {
  const std::size_t Ho = conv_out_extent(H, k, stride, pad), Wo = conv_out_extent(W, k, stride, pad);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < static_cast<long>(C); ++c) {
    double* plane = image_grad + static_cast<std::size_t>(c) * H * W;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* in = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * Ho * Wo;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * W;
          const double* src = in + oy * Wo;
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            if (ix >= 0 && ix < static_cast<long>(W)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

void adamw(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
           const AdamWStep& s) {
  const long n = static_cast<long>(param.size());
  double* p = param.data();
  const double* g = grad.data();
  double* mm = m.data();
  double* vv = v.data();
  const double inv_bc1 = 1.0 / s.bias_correction1, inv_bc2 = 1.0 / s.bias_correction2;
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) {
    const double mi = s.beta1 * mm[i] + (1.0 - s.beta1) * g[i];
    const double vi = s.beta2 * vv[i] + (1.0 - s.beta2) * g[i] * g[i];
    mm[i] = mi;
    vv[i] = vi;
    p[i] -= s.lr * ((mi * inv_bc1) / (std::sqrt(vi * inv_bc2) + s.eps) + s.weight_decay * p[i]);
  }
}

void polyak(std::span<double> target, std::span<const double> online, double tau) {
  const long n = static_cast<long>(target.size());
  double* t = target.data();
  const double* o = online.data();
  const double keep = 1.0 - tau;
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) t[i] = keep * t[i] + tau * o[i];
}

double sum_squares(std::span<const double> x) {
  const std::size_t chunks = (x.size() + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks, 0.0);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < static_cast<long>(chunks); ++c) {
    const std::size_t b = static_cast<std::size_t>(c) * kChunk, e = std::min(x.size(), b + kChunk);
    // Eight independent lanes so the loop vectorizes without reassociation flags.
    double lane[8] = {};
    std::size_t i = b;
    for (; i + 8 <= e; i += 8) {
#pragma omp simd
      for (std::size_t l = 0; l < 8; ++l) lane[l] += x[i + l] * x[i + l];
    }
    for (; i < e; ++i) lane[0] += x[i] * x[i];
    partial[static_cast<std::size_t>(c)] =
        ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

void scale(std::span<double> x, double factor) {
  const long n = static_cast<long>(x.size());
  double* p = x.data();
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) p[i] *= factor;
}

}  // namespace dqt::kernels
