#pragma once

// Dense kernels behind the encoder and heads. Every kernel exists twice:
// `serial` is the plain reference used by tests, `omp` is the OpenMP
// version the library calls. Both accumulate every output element in the
// same order, so on the same build they agree bit for bit.

#include <cstddef>
#include <span>

namespace schemex::kernels {

/// Shapes for multi-head attention over a sequence of `len` rows of width
/// `dim`, split into `heads` column blocks.
struct AttentionShape {
  std::size_t len = 0;
  std::size_t dim = 0;
  std::size_t heads = 1;
};

namespace serial {

/// c[m x n] (+)= a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
/// c[m x n] (+)= a[m x k] * b[n x k]^T
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
/// c[k x n] (+)= a[m x k]^T * b[m x n]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

/// probs is [heads x len x len]; out is [len x dim].
void attention_forward(std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, AttentionShape shape, std::span<double> probs,
                       std::span<double> out);
/// Accumulates into dq, dk, dv.
void attention_backward(std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs,
                        std::span<const double> dout, AttentionShape shape, std::span<double> dq,
                        std::span<double> dk, std::span<double> dv);

}  // namespace serial

namespace omp {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void attention_forward(std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, AttentionShape shape, std::span<double> probs,
                       std::span<double> out);
void attention_backward(std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs,
                        std::span<const double> dout, AttentionShape shape, std::span<double> dq,
                        std::span<double> dk, std::span<double> dv);

}  // namespace omp

/// Work (multiply-adds) below which the OpenMP kernels stay on one thread.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

}  // namespace schemex::kernels
