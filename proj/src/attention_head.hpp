#pragma once

// Single-head attention bodies shared by the serial and OpenMP kernels; the
// two differ only in how heads are distributed over threads.

#include <algorithm>
#include <cmath>
#include <vector>

#include "schemex/kernels.hpp"

namespace schemex::kernels::detail {

inline void attention_head_forward(std::span<const double> q, std::span<const double> k,
                                   std::span<const double> v, AttentionShape shape,
                                   std::size_t head, std::span<double> probs,
                                   std::span<double> out) {
  const std::size_t len = shape.len;
  const std::size_t dim = shape.dim;
  const std::size_t dh = dim / shape.heads;
  const std::size_t c0 = head * dh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  double* p = probs.data() + head * len * len;

  for (std::size_t i = 0; i < len; ++i) {
    double* prow = p + i * len;
    double max_score = -INFINITY;
    const double* qrow = q.data() + i * dim + c0;
    for (std::size_t j = 0; j < len; ++j) {
      const double* krow = k.data() + j * dim + c0;
      double s = 0.0;
      for (std::size_t c = 0; c < dh; ++c) s += qrow[c] * krow[c];
      prow[j] = s * scale;
      max_score = std::max(max_score, prow[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      prow[j] = std::exp(prow[j] - max_score);
      total += prow[j];
    }
    for (std::size_t j = 0; j < len; ++j) prow[j] /= total;
    double* orow = out.data() + i * dim + c0;
    std::fill(orow, orow + dh, 0.0);
    for (std::size_t j = 0; j < len; ++j) {
      const double pj = prow[j];
      const double* vrow = v.data() + j * dim + c0;
      for (std::size_t c = 0; c < dh; ++c) orow[c] += pj * vrow[c];
    }
  }
}

inline void attention_head_backward(std::span<const double> q, std::span<const double> k,
                                    std::span<const double> v, std::span<const double> probs,
                                    std::span<const double> dout, AttentionShape shape,
                                    std::size_t head, std::span<double> dq, std::span<double> dk,
                                    std::span<double> dv) {
  const std::size_t len = shape.len;
  const std::size_t dim = shape.dim;
  const std::size_t dh = dim / shape.heads;
  const std::size_t c0 = head * dh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double* p = probs.data() + head * len * len;

  std::vector<double> dscore(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double* prow = p + i * len;
    double weighted = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      double dp = 0.0;
      for (std::size_t c = 0; c < dh; ++c) dp += dout[i * dim + c0 + c] * v[j * dim + c0 + c];
      dscore[j] = dp;
      weighted += prow[j] * dp;
    }
    for (std::size_t j = 0; j < len; ++j) {
      const double ds = prow[j] * (dscore[j] - weighted) * scale;
      for (std::size_t c = 0; c < dh; ++c) {
        dq[i * dim + c0 + c] += ds * k[j * dim + c0 + c];
        dk[j * dim + c0 + c] += ds * q[i * dim + c0 + c];
        dv[j * dim + c0 + c] += prow[j] * dout[i * dim + c0 + c];
      }
    }
  }
}

}  // namespace schemex::kernels::detail
