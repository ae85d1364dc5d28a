#include "schemex/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "schemex/kernels.hpp"

namespace schemex {

Var Graph::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return {nodes_.size() - 1};
}

Var Graph::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return {it->second};
  Node node;
  node.external = &value;
  nodes_.push_back(std::move(node));
  params_.emplace(name, nodes_.size() - 1);
  return {nodes_.size() - 1};
}

const Tensor& Graph::value(Var v) const {
  const Node& n = nodes_[v.index];
  return n.external != nullptr ? *n.external : n.owned;
}

Tensor& Graph::grad(Var v) {
  Node& n = nodes_[v.index];
  if (n.grad.data.empty()) n.grad = Tensor(value(v).shape, 0.0);
  return n.grad;
}

Var Graph::push(Tensor value, Backward backward) {
  Node node;
  node.owned = std::move(value);
  if (record_) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {nodes_.size() - 1};
}

void Graph::backward(Var loss) {
  if (!record_) throw std::logic_error("backward on a non-recording graph");
  grad(loss).data.assign(value(loss).size(), 1.0);
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.data.empty()) n.backward(*this, Var{i});
  }
}

void Graph::accumulate_parameter_grads(TensorMap& out) const {
  for (const auto& [name, index] : params_) {
    const Node& n = nodes_[index];
    auto [it, inserted] = out.try_emplace(name, Tensor(n.external->shape, 0.0));
    if (n.grad.data.empty()) continue;
    auto& dst = it->second.data;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += n.grad.data[j];
  }
}

namespace ops {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Var gather_rows(Graph& g, Var table, std::span<const std::size_t> ids) {
  const Tensor& t = g.value(table);
  const std::size_t d = t.cols();
  Tensor out = Tensor::matrix(ids.size(), d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    require(ids[r] < t.rows(), "gather_rows: index out of range");
    std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>(ids[r] * d), d,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return g.push(std::move(out), [table, rows = std::move(rows), d](Graph& gr, Var self) {
    const Tensor up = gr.grad(self);
    Tensor& dt = gr.grad(table);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < d; ++c) dt.data[rows[r] * d + c] += up.data[r * d + c];
    }
  });
}

Var add(Graph& g, Var a, Var b) {
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  require(ta.size() == tb.size(), "add: size mismatch");
  Tensor out(ta.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] + tb.data[i];
  return g.push(std::move(out), [a, b](Graph& gr, Var self) {
    const Tensor up = gr.grad(self);
    for (Var in : {a, b}) {
      Tensor& d = gr.grad(in);
      for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += up.data[i];
    }
  });
}

Var add_row(Graph& g, Var x, Var b) {
  const Tensor& tx = g.value(x);
  const Tensor& tb = g.value(b);
  const std::size_t m = tx.cols();
  require(tb.size() == m, "add_row: width mismatch");
  Tensor out = tx;
  for (std::size_t r = 0; r < tx.rows(); ++r) {
    for (std::size_t c = 0; c < m; ++c) out.data[r * m + c] += tb.data[c];
  }
  return g.push(std::move(out), [x, b, m](Graph& gr, Var self) {
    const Tensor up = gr.grad(self);
    Tensor& dx = gr.grad(x);
    for (std::size_t i = 0; i < up.size(); ++i) dx.data[i] += up.data[i];
    Tensor& db = gr.grad(b);
    for (std::size_t i = 0; i < up.size(); ++i) db.data[i % m] += up.data[i];
  });
}

Var matmul(Graph& g, Var a, Var b) {
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  const std::size_t n = ta.rows(), k = ta.cols(), m = tb.cols();
  require(tb.rows() == k, "matmul: inner dimension mismatch");
  Tensor out = Tensor::matrix(n, m);
  kernels::omp::matmul(ta.data, tb.data, out.data, n, k, m);
  return g.push(std::move(out), [a, b, n, k, m](Graph& gr, Var self) {
    const Tensor up = gr.grad(self);
    // dA = dC * B^T, dB = A^T * dC
    kernels::omp::matmul_nt(up.data, gr.value(b).data, gr.grad(a).data, n, m, k, true);
    kernels::omp::matmul_tn(gr.value(a).data, up.data, gr.grad(b).data, n, k, m, true);
  });
}

Var matmul_nt(Graph& g, Var a, Var b) {
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  const std::size_t n = ta.rows(), k = ta.cols(), m = tb.rows();
  require(tb.cols() == k, "matmul_nt: inner dimension mismatch");
  Tensor out = Tensor::matrix(n, m);
  kernels::omp::matmul_nt(ta.data, tb.data, out.data, n, k, m);
  return g.push(std::move(out), [a, b, n, k, m](Graph& gr, Var self) {
    const Tensor up = gr.grad(self);
    // dA = dC * B, dB = dC^T * A
    kernels::omp::matmul(up.data, gr.value(b).data, gr.grad(a).data, n, m, k, true);
    kernels::omp::matmul_tn(up.data, gr.value(a).data, gr.grad(b).data, n, m, k, true);
  });
}

Var linear(Graph& g, Var x, Var w, Var b) { return add_row(g, matmul(g, x, w), b); }

Var gelu(Graph& g, Var x) {
  const Tensor& tx = g.value(x);
  Tensor out(tx.shape);
  for (std::size_t i = 0; i < tx.size(); ++i) {
    const double v = tx.data[i];
    out.data[i] = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  }
  return g.push(std::move(out), [x](Graph& gr, Var self) {
    const Tensor up = gr.grad(self);
    const Tensor& tx = gr.value(x);
    Tensor& dx = gr.grad(x);
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < tx.size(); ++i) {
      const double v = tx.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      dx.data[i] += up.data[i] * (cdf + v * pdf);
    }
  });
}

Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps) {
  const Tensor& tx = g.value(x);
  const Tensor& tg = g.value(gain);
  const Tensor& tb = g.value(bias);
  const std::size_t n = tx.rows(), d = tx.cols();
  Tensor out(tx.shape);
  Tensor normed(tx.shape);
  std::vector<double> inv_std(n);
  for (std::size_t r = 0; r < n; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += tx.data[r * d + c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = tx.data[r * d + c] - mean;
      var += dev * dev;
    }
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      const double z = (tx.data[r * d + c] - mean) * inv_std[r];
      normed.data[r * d + c] = z;
      out.data[r * d + c] = z * tg.data[c] + tb.data[c];
    }
  }
  return g.push(std::move(out), [x, gain, bias, n, d, normed = std::move(normed),
                                 inv_std = std::move(inv_std)](Graph& gr, Var self) {
    const Tensor up = gr.grad(self);
    const Tensor& tg = gr.value(gain);
    Tensor& dx = gr.grad(x);
    Tensor& dg = gr.grad(gain);
    Tensor& db = gr.grad(bias);
    std::vector<double> dz(d);
    for (std::size_t r = 0; r < n; ++r) {
      double mean_dz = 0.0;
      double mean_dz_z = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double u = up.data[r * d + c];
        dg.data[c] += u * normed.data[r * d + c];
        db.data[c] += u;
        dz[c] = u * tg.data[c];
        mean_dz += dz[c];
        mean_dz_z += dz[c] * normed.data[r * d + c];
      }
      mean_dz /= static_cast<double>(d);
      mean_dz_z /= static_cast<double>(d);
      for (std::size_t c = 0; c < d; ++c) {
        dx.data[r * d + c] +=
            inv_std[r] * (dz[c] - mean_dz - normed.data[r * d + c] * mean_dz_z);
      }
    }
  });
}

Var attention(Graph& g, Var q, Var k, Var v, std::size_t heads) {
  const Tensor& tq = g.value(q);
  const kernels::AttentionShape shape{tq.rows(), tq.cols(), heads};
  require(shape.dim % heads == 0, "attention: dim not divisible by heads");
  Tensor out(tq.shape);
  std::vector<double> probs(heads * shape.len * shape.len);
  kernels::omp::attention_forward(tq.data, g.value(k).data, g.value(v).data, shape, probs,
                                  out.data);
  return g.push(std::move(out),
                [q, k, v, shape, probs = std::move(probs)](Graph& gr, Var self) {
                  const Tensor up = gr.grad(self);
                  Tensor& dq = gr.grad(q);
                  Tensor& dk = gr.grad(k);
                  Tensor& dv = gr.grad(v);
                  kernels::omp::attention_backward(gr.value(q).data, gr.value(k).data,
                                                   gr.value(v).data, probs, up.data, shape,
                                                   dq.data, dk.data, dv.data);
                });
}

Var concat_cols(Graph& g, Var a, Var b) {
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  require(ta.rows() == tb.rows(), "concat_cols: row mismatch");
  const std::size_t n = ta.rows(), ca = ta.cols(), cb = tb.cols();
  Tensor out = Tensor::matrix(n, ca + cb);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(ta.data.begin() + static_cast<std::ptrdiff_t>(r * ca), ca,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * (ca + cb)));
    std::copy_n(tb.data.begin() + static_cast<std::ptrdiff_t>(r * cb), cb,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * (ca + cb) + ca));
  }
  return g.push(std::move(out), [a, b, n, ca, cb](Graph& gr, Var self) {
    const Tensor up = gr.grad(self);
    Tensor& da = gr.grad(a);
    Tensor& db = gr.grad(b);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < ca; ++c) da.data[r * ca + c] += up.data[r * (ca + cb) + c];
      for (std::size_t c = 0; c < cb; ++c) db.data[r * cb + c] += up.data[r * (ca + cb) + ca + c];
    }
  });
}

Var reshape(Graph& g, Var x, std::vector<std::size_t> shape) {
  Tensor out = g.value(x);
  require(Tensor::count(shape) == out.size(), "reshape: element count mismatch");
  out.shape = std::move(shape);
  return g.push(std::move(out), [x](Graph& gr, Var self) {
    const Tensor up = gr.grad(self);
    Tensor& dx = gr.grad(x);
    for (std::size_t i = 0; i < up.size(); ++i) dx.data[i] += up.data[i];
  });
}

Var scale(Graph& g, Var x, double factor) {
  Tensor out = g.value(x);
  for (double& v : out.data) v *= factor;
  return g.push(std::move(out), [x, factor](Graph& gr, Var self) {
    const Tensor up = gr.grad(self);
    Tensor& dx = gr.grad(x);
    for (std::size_t i = 0; i < up.size(); ++i) dx.data[i] += factor * up.data[i];
  });
}

Var bce_with_logits(Graph& g, Var logits, const Tensor& targets) {
  return bce_with_logits(g, logits, targets, Tensor::vector(targets.size(), 1.0));
}

Var bce_with_logits(Graph& g, Var logits, const Tensor& targets, const Tensor& weights) {
  const Tensor& tl = g.value(logits);
  require(tl.size() == targets.size(), "bce_with_logits: size mismatch");
  require(weights.size() == targets.size(), "bce_with_logits: weight size mismatch");
  double weight_sum = 0.0;
  for (double w : weights.data) weight_sum += w;
  if (weight_sum <= 0.0) weight_sum = 1.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < tl.size(); ++i) {
    const double x = tl.data[i];
    loss += weights.data[i] *
            (std::max(x, 0.0) - x * targets.data[i] + std::log1p(std::exp(-std::abs(x))));
  }
  Tensor out = Tensor::vector(1, loss / weight_sum);
  return g.push(std::move(out), [logits, targets, weights, weight_sum](Graph& gr, Var self) {
    const double up = gr.grad(self).data[0];
    const Tensor& tl = gr.value(logits);
    Tensor& dl = gr.grad(logits);
    for (std::size_t i = 0; i < tl.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-tl.data[i]));
      dl.data[i] += up * weights.data[i] * (p - targets.data[i]) / weight_sum;
    }
  });
}

Var softmax_cross_entropy(Graph& g, Var logits, std::size_t target) {
  const Tensor& tl = g.value(logits);
  require(target < tl.size(), "softmax_cross_entropy: target out of range");
  const double max_logit = *std::max_element(tl.data.begin(), tl.data.end());
  double total = 0.0;
  for (double x : tl.data) total += std::exp(x - max_logit);
  const double log_z = max_logit + std::log(total);
  Tensor out = Tensor::vector(1, log_z - tl.data[target]);
  return g.push(std::move(out), [logits, target, log_z](Graph& gr, Var self) {
    const double up = gr.grad(self).data[0];
    const Tensor& tl = gr.value(logits);
    Tensor& dl = gr.grad(logits);
    for (std::size_t i = 0; i < tl.size(); ++i) {
      const double p = std::exp(tl.data[i] - log_z);
      dl.data[i] += up * (p - (i == target ? 1.0 : 0.0));
    }
  });
}

Var sum(Graph& g, std::span<const Var> terms) {
  double total = 0.0;
  for (Var t : terms) total += g.value(t).data.at(0);
  std::vector<Var> inputs(terms.begin(), terms.end());
  return g.push(Tensor::vector(1, total), [inputs = std::move(inputs)](Graph& gr, Var self) {
    const double up = gr.grad(self).data[0];
    for (Var t : inputs) gr.grad(t).data[0] += up;
  });
}

}  // namespace ops

}  // namespace schemex
