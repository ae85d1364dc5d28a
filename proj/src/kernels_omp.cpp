#include <vector>

#include "attention_head.hpp"
#include "schemex/kernels.hpp"

namespace schemex::kernels::omp {

namespace {

bool worth_parallel(std::size_t m, std::size_t k, std::size_t n) {
  return m * k * n >= kParallelThreshold;
}

}  // namespace

// Row-blocked i-p-j order into a zeroed scratch row; per element the sum
// still runs over p in ascending order, matching the reference.
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const long rows = static_cast<long>(m);
#pragma omp parallel if (worth_parallel(m, k, n))
  {
    std::vector<double> acc(n);
#pragma omp for schedule(static)
    for (long ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = a[i * k + p];
        const double* brow = b.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += aip * brow[j];
      }
      double* crow = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] = accumulate ? crow[j] + acc[j] : acc[j];
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (worth_parallel(m, k, n))
  for (long ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* arow = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const long out_rows = static_cast<long>(k);
#pragma omp parallel if (worth_parallel(m, k, n))
  {
    std::vector<double> acc(n);
#pragma omp for schedule(static)
    for (long pp = 0; pp < out_rows; ++pp) {
      const auto p = static_cast<std::size_t>(pp);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const double aip = a[i * k + p];
        const double* brow = b.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += aip * brow[j];
      }
      double* crow = c.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] = accumulate ? crow[j] + acc[j] : acc[j];
    }
  }
}

void attention_forward(std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, AttentionShape shape, std::span<double> probs,
                       std::span<double> out) {
  const long heads = static_cast<long>(shape.heads);
  const bool parallel = worth_parallel(shape.len, shape.len, shape.dim);
#pragma omp parallel for schedule(static) if (parallel)
  for (long h = 0; h < heads; ++h) {
    detail::attention_head_forward(q, k, v, shape, static_cast<std::size_t>(h), probs, out);
  }
}

void attention_backward(std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs,
                        std::span<const double> dout, AttentionShape shape, std::span<double> dq,
                        std::span<double> dk, std::span<double> dv) {
  const long heads = static_cast<long>(shape.heads);
  const bool parallel = worth_parallel(shape.len, shape.len, shape.dim);
#pragma omp parallel for schedule(static) if (parallel)
  for (long h = 0; h < heads; ++h) {
    detail::attention_head_backward(q, k, v, probs, dout, shape, static_cast<std::size_t>(h), dq,
                                    dk, dv);
  }
}

}  // namespace schemex::kernels::omp
