#pragma once

// Dense kernels behind the differentiable layers. Two implementations share
// one signature set:
//   dqt::kernels::reference  straightforward serial loops, kept as the oracle
//   dqt::kernels             blocked, OpenMP-parallel versions used in training
// Parallel loops partition output elements only, so results do not depend on
// the thread count.
//
// Matrices are row-major with explicit leading dimensions.

#include <cstddef>
#include <span>

namespace dqt::kernels {

/// C = A(MxK) * B(KxN), or C += when `accumulate`.
void gemm(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
          std::size_t ldb, double* C, std::size_t ldc, bool accumulate);
/// C(MxN) (+)= A(MxK) * B(NxK)^T
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
             std::size_t ldb, double* C, std::size_t ldc, bool accumulate);
/// C(MxN) (+)= A(KxM)^T * B(KxN)
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
             std::size_t ldb, double* C, std::size_t ldc, bool accumulate);

/// y (+)= A(MxN) x
void gemv(std::size_t M, std::size_t N, const double* A, const double* x, double* y, bool accumulate);
/// y (+)= A(MxN)^T x
void gemv_t(std::size_t M, std::size_t N, const double* A, const double* x, double* y, bool accumulate);
/// A(MxN) += x y^T
void ger(std::size_t M, std::size_t N, const double* x, const double* y, double* A);
/// Fused backward of y = W x: dW += dy x^T and, when dx is non-null, dx += W^T dy.
void linear_backward(std::size_t M, std::size_t N, const double* W, const double* x, const double* dy, double* dW,
                     double* dx);

/// Unfold a C x H x W image into (C*k*k) x (Ho*Wo) patches.
void im2col(std::size_t C, std::size_t H, std::size_t W, std::size_t k, std::size_t stride, std::size_t pad,
            const double* image, double* col);
/// Adjoint of im2col: scatter-add patches back into the image gradient.
void col2im(std::size_t C, std::size_t H, std::size_t W, std::size_t k, std::size_t stride, std::size_t pad,
            const double* col, double* image_grad);

struct AdamWStep {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double weight_decay;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

void adamw(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
           const AdamWStep& s);
/// target = (1 - tau) * target + tau * online
void polyak(std::span<double> target, std::span<const double> online, double tau);
double sum_squares(std::span<const double> x);
void scale(std::span<double> x, double factor);

namespace reference {

void gemm(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
          std::size_t ldb, double* C, std::size_t ldc, bool accumulate);
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
             std::size_t ldb, double* C, std::size_t ldc, bool accumulate);
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t lda, const double* B,
             std::size_t ldb, double* C, std::size_t ldc, bool accumulate);
void gemv(std::size_t M, std::size_t N, const double* A, const double* x, double* y, bool accumulate);
void gemv_t(std::size_t M, std::size_t N, const double* A, const double* x, double* y, bool accumulate);
void ger(std::size_t M, std::size_t N, const double* x, const double* y, double* A);
void linear_backward(std::size_t M, std::size_t N, const double* W, const double* x, const double* dy, double* dW,
                     double* dx);
void im2col(std::size_t C, std::size_t H, std::size_t W, std::size_t k, std::size_t stride, std::size_t pad,
            const double* image, double* col);
void col2im(std::size_t C, std::size_t H, std::size_t W, std::size_t k, std::size_t stride, std::size_t pad,
            const double* col, double* image_grad);
void adamw(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
           const AdamWStep& s);
void polyak(std::span<double> target, std::span<const double> online, double tau);
double sum_squares(std::span<const double> x);
void scale(std::span<double> x, double factor);

}  // namespace reference

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace dqt::kernels
