#include "attention_head.hpp"
#include "schemex/kernels.hpp"

namespace schemex::kernels::serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += a[i * k + p] * b[i * n + j];
      c[p * n + j] = accumulate ? c[p * n + j] + s : s;
    }
  }
}

void attention_forward(std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, AttentionShape shape, std::span<double> probs,
                       std::span<double> out) {
  for (std::size_t h = 0; h < shape.heads; ++h) {
    detail::attention_head_forward(q, k, v, shape, h, probs, out);
  }
}

void attention_backward(std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs,
                        std::span<const double> dout, AttentionShape shape, std::span<double> dq,
                        std::span<double> dk, std::span<double> dv) {
  for (std::size_t h = 0; h < shape.heads; ++h) {
    detail::attention_head_backward(q, k, v, probs, dout, shape, h, dq, dk, dv);
  }
}

}  // namespace schemex::kernels::serial
