#include <cmath>

#include "dqt/kernels.hpp"

namespace dqt::kernels::reference {

void gemm(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
          std::size_t ldb, double* C, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      double s = accumulate ? C[i * ldc + j] : 0.0;
      for (std::size_t k = 0; k < K; ++k) s += A[i * lda + k] * B[k * ldb + j];
      C[i * ldc + j] = s;
    }
  }
}

void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
             std::size_t ldb, double* C, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      double s = accumulate ? C[i * ldc + j] : 0.0;
      for (std::size_t k = 0; k < K; ++k) s += A[i * lda + k] * B[j * ldb + k];
      C[i * ldc + j] = s;
    }
  }
}

void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
             std::size_t ldb, double* C, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      double s = accumulate ? C[i * ldc + j] : 0.0;
      for (std::size_t k = 0; k < K; ++k) s += A[k * lda + i] * B[k * ldb + j];
      C[i * ldc + j] = s;
    }
  }
}

void gemv(std::size_t M, std::size_t N, const double* A, const double* x, double* y, bool accumulate) {
  for (std::size_t i = 0; i < M; ++i) {
    double s = accumulate ? y[i] : 0.0;
    for (std::size_t j = 0; j < N; ++j) s += A[i * N + j] * x[j];
    y[i] = s;
  }
}

void gemv_t(std::size_t M, std::size_t N, const double* A, const double* x, double* y, bool accumulate) {
  for (std::size_t j = 0; j < N; ++j) {
    double s = accumulate ? y[j] : 0.0;
    for (std::size_t i = 0; i < M; ++i) s += A[i * N + j] * x[i];
    y[j] = s;
  }
}

void ger(std::size_t M, std::size_t N, const double* x, const double* y, double* A) {
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) A[i * N + j] += x[i] * y[j];
  }
}

void linear_backward(std::size_t M, std::size_t N, const double* W, const double* x, const double* dy, double* dW,
                     double* dx) {
  ger(M, N, dy, x, dW);
  if (dx) gemv_t(M, N, W, dy, dx, true);
}

void im2col(std::size_t C, std::size_t H, std::size_t W, std::size_t k, std::size_t stride, std::size_t pad,
            const double* image, double* col) {
  const std::size_t Ho = conv_out_extent(H, k, stride, pad), Wo = conv_out_extent(W, k, stride, pad);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const std::size_t row = (c * k + ky) * k + kx;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(H) && ix < static_cast<long>(W);
            col[row * Ho * Wo + oy * Wo + ox] = inside ? image[(c * H + iy) * W + ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(std::size_t C, std::size_t H, std::size_t W, std::size_t k, std::size_t stride, std::size_t pad,
            const double* col, double* image_grad) {
  const std::size_t Ho = conv_out_extent(H, k, stride, pad), Wo = conv_out_extent(W, k, stride, pad);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const std::size_t row = (c * k + ky) * k + kx;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            if (iy >= 0 && ix >= 0 && iy < static_cast<long>(H) && ix < static_cast<long>(W)) {
              image_grad[(c * H + iy) * W + ix] += col[row * Ho * Wo + oy * Wo + ox];
            }
          }
        }
      }
    }
  }
}

void adamw(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
           const AdamWStep& s) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / s.bias_correction1;
    const double v_hat = v[i] / s.bias_correction2;
    param[i] -= s.lr * (m_hat / (std::sqrt(v_hat) + s.eps) + s.weight_decay * param[i]);
  }
}

void polyak(std::span<double> target, std::span<const double> online, double tau) {
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = (1.0 - tau) * target[i] + tau * online[i];
}

double sum_squares(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

void scale(std::span<double> x, double factor) {
  for (double& v : x) v *= factor;
}

}  // namespace dqt::kernels::reference
