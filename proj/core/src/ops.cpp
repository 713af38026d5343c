#include "rxnalign/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "rxnalign/rng.hpp"

namespace rxnalign::nd {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using MapC = Eigen::Map<const EMat>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw NdError(msg);
}

std::shared_ptr<Node> new_node(const char* op, Shape shape,
                               const std::vector<Tensor>& parents) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->value.assign(static_cast<std::size_t>(shape_size(shape)), 0.0);
  node->shape = std::move(shape);
  for (const Tensor& p : parents) {
    require(p.defined(), std::string(op) + ": undefined input");
    node->parents.push_back(p.node());
    node->requires_grad = node->requires_grad || p.node()->requires_grad;
  }
  return node;
}

bool same_shape(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape();
}

std::int64_t rows_of(const Tensor& t) {
  return t.ndim() == 1 ? 1 : t.dim(0);
}
std::int64_t cols_of(const Tensor& t) {
  return t.ndim() == 1 ? t.dim(0) : t.dim(1);
}

Tensor elementwise2(const char* name, const Tensor& a, const Tensor& b,
                    double (*fwd)(double, double),
                    void (*bwd)(double, double, double, double&, double&)) {
  require(same_shape(a, b), std::string(name) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  auto node = new_node(name, a.shape(), {a, b});
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i)
    node->value[i] = fwd(av[i], bv[i]);
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    node->backward_fn = [self, pa, pb, bwd] {
      for (std::size_t i = 0; i < self->value.size(); ++i) {
        double da = 0, db = 0;
        bwd(pa->value[i], pb->value[i], self->grad[i], da, db);
        if (pa->requires_grad) pa->grad[i] += da;
        if (pb->requires_grad) pb->grad[i] += db;
      }
    };
  }
  return Tensor::from_node(node);
}

Tensor elementwise1(const char* name, const Tensor& a,
                    double (*fwd)(double),
                    double (*dfn)(double /*x*/, double /*y*/)) {
  auto node = new_node(name, a.shape(), {a});
  const auto& av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) node->value[i] = fwd(av[i]);
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pa = a.node().get();
    node->backward_fn = [self, pa, dfn] {
      for (std::size_t i = 0; i < self->value.size(); ++i)
        pa->grad[i] += self->grad[i] * dfn(pa->value[i], self->value[i]);
    };
  }
  return Tensor::from_node(node);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise2(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise2(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise2(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Tensor divide(const Tensor& a, const Tensor& b) {
  return elementwise2(
      "divide", a, b, [](double x, double y) { return x / y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g / y;
        db = -g * x / (y * y);
      });
}

Tensor scale(const Tensor& a, double factor) {
  auto node = new_node("scale", a.shape(), {a});
  const auto& av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) node->value[i] = av[i] * factor;
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pa = a.node().get();
    node->backward_fn = [self, pa, factor] {
      for (std::size_t i = 0; i < self->value.size(); ++i)
        pa->grad[i] += self->grad[i] * factor;
    };
  }
  return Tensor::from_node(node);
}

Tensor add_n(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "add_n: no inputs");
  for (const Tensor& t : parts)
    require(same_shape(t, parts.front()), "add_n: shape mismatch");
  auto node = new_node("add_n", parts.front().shape(), parts);
  for (const Tensor& t : parts) {
    const auto& v = t.data();
    for (std::size_t i = 0; i < v.size(); ++i) node->value[i] += v[i];
  }
  if (node->requires_grad) {
    Node* self = node.get();
    node->backward_fn = [self] {
      for (auto& parent : self->parents) {
        if (!parent->requires_grad) continue;
        for (std::size_t i = 0; i < self->value.size(); ++i)
          parent->grad[i] += self->grad[i];
      }
    };
  }
  return Tensor::from_node(node);
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require(x.ndim() == 2, "add_bias: x must be 2-d");
  std::int64_t n = x.dim(0), d = x.dim(1);
  require(bias.size() == d, "add_bias: bias size mismatch");
  auto node = new_node("add_bias", x.shape(), {x, bias});
  const auto& xv = x.data();
  const auto& bv = bias.data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j)
      node->value[i * d + j] = xv[i * d + j] + bv[j];
  if (node->requires_grad) {
    Node* self = node.get();
    Node* px = x.node().get();
    Node* pb = bias.node().get();
    node->backward_fn = [self, px, pb, n, d] {
      if (px->requires_grad)
        for (std::size_t i = 0; i < self->value.size(); ++i)
          px->grad[i] += self->grad[i];
      if (pb->requires_grad)
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < d; ++j)
            pb->grad[j] += self->grad[i * d + j];
    };
  }
  return Tensor::from_node(node);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2, "matmul: inputs must be 2-d");
  std::int64_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
  require(b.dim(0) == q, "matmul: inner dimensions differ, " +
                             shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
  auto node = new_node("matmul", {p, r}, {a, b});
  MapC ma(a.data().data(), p, q);
  MapC mb(b.data().data(), q, r);
  MapM mo(node->value.data(), p, r);
  mo.noalias() = ma * mb;
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    node->backward_fn = [self, pa, pb, p, q, r] {
      MapC g(self->grad.data(), p, r);
      if (pa->requires_grad) {
        MapC mb2(pb->value.data(), q, r);
        MapM ga(pa->grad.data(), p, q);
        ga.noalias() += g * mb2.transpose();
      }
      if (pb->requires_grad) {
        MapC ma2(pa->value.data(), p, q);
        MapM gb(pb->grad.data(), q, r);
        gb.noalias() += ma2.transpose() * g;
      }
    };
  }
  return Tensor::from_node(node);
}

Tensor transpose(const Tensor& a) {
  require(a.ndim() == 2, "transpose: input must be 2-d");
  std::int64_t n = a.dim(0), d = a.dim(1);
  auto node = new_node("transpose", {d, n}, {a});
  const auto& av = a.data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j) node->value[j * n + i] = av[i * d + j];
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pa = a.node().get();
    node->backward_fn = [self, pa, n, d] {
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < d; ++j)
          pa->grad[i * d + j] += self->grad[j * n + i];
    };
  }
  return Tensor::from_node(node);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  std::int64_t d = -1, total = 0;
  for (const Tensor& t : parts) {
    require(t.ndim() == 2, "concat_rows: inputs must be 2-d");
    if (d < 0) d = t.dim(1);
    require(t.dim(1) == d, "concat_rows: column mismatch");
    total += t.dim(0);
  }
  auto node = new_node("concat_rows", {total, d}, parts);
  std::size_t at = 0;
  for (const Tensor& t : parts) {
    const auto& v = t.data();
    std::copy(v.begin(), v.end(), node->value.begin() + at);
    at += v.size();
  }
  if (node->requires_grad) {
    Node* self = node.get();
    node->backward_fn = [self] {
      std::size_t at = 0;
      for (auto& parent : self->parents) {
        std::size_t len = parent->value.size();
        if (parent->requires_grad)
          for (std::size_t i = 0; i < len; ++i)
            parent->grad[i] += self->grad[at + i];
        at += len;
      }
    };
  }
  return Tensor::from_node(node);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  std::int64_t n = -1, total = 0;
  for (const Tensor& t : parts) {
    require(t.ndim() == 2, "concat_cols: inputs must be 2-d");
    if (n < 0) n = t.dim(0);
    require(t.dim(0) == n, "concat_cols: row mismatch");
    total += t.dim(1);
  }
  auto node = new_node("concat_cols", {n, total}, parts);
  std::int64_t at = 0;
  for (const Tensor& t : parts) {
    std::int64_t d = t.dim(1);
    const auto& v = t.data();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j)
        node->value[i * total + at + j] = v[i * d + j];
    at += d;
  }
  if (node->requires_grad) {
    Node* self = node.get();
    node->backward_fn = [self, n, total] {
      std::int64_t at = 0;
      for (auto& parent : self->parents) {
        std::int64_t d = parent->shape[1];
        if (parent->requires_grad)
          for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < d; ++j)
              parent->grad[i * d + j] += self->grad[i * total + at + j];
        at += d;
      }
    };
  }
  return Tensor::from_node(node);
}

Tensor slice_rows(const Tensor& a, std::int64_t start, std::int64_t count) {
  require(a.ndim() == 2, "slice_rows: input must be 2-d");
  std::int64_t n = a.dim(0), d = a.dim(1);
  require(start >= 0 && count >= 0 && start + count <= n,
          "slice_rows: range out of bounds");
  auto node = new_node("slice_rows", {count, d}, {a});
  const auto& av = a.data();
  std::copy(av.begin() + start * d, av.begin() + (start + count) * d,
            node->value.begin());
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pa = a.node().get();
    node->backward_fn = [self, pa, start, d] {
      for (std::size_t i = 0; i < self->grad.size(); ++i)
        pa->grad[static_cast<std::size_t>(start * d) + i] += self->grad[i];
    };
  }
  return Tensor::from_node(node);
}

Tensor slice_cols(const Tensor& a, std::int64_t start, std::int64_t count) {
  require(a.ndim() == 2, "slice_cols: input must be 2-d");
  std::int64_t n = a.dim(0), d = a.dim(1);
  require(start >= 0 && count >= 0 && start + count <= d,
          "slice_cols: range out of bounds");
  auto node = new_node("slice_cols", {n, count}, {a});
  const auto& av = a.data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < count; ++j)
      node->value[i * count + j] = av[i * d + start + j];
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pa = a.node().get();
    node->backward_fn = [self, pa, n, d, start, count] {
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < count; ++j)
          pa->grad[i * d + start + j] += self->grad[i * count + j];
    };
  }
  return Tensor::from_node(node);
}

Tensor gather_rows(const Tensor& x, Index idx) {
  require(x.ndim() == 2, "gather_rows: input must be 2-d");
  std::int64_t n = x.dim(0), d = x.dim(1);
  for (std::int64_t i : idx)
    require(i >= 0 && i < n, "gather_rows: index out of range");
  std::int64_t k = static_cast<std::int64_t>(idx.size());
  auto node = new_node("gather_rows", {k, d}, {x});
  const auto& xv = x.data();
  for (std::int64_t i = 0; i < k; ++i)
    std::copy(xv.begin() + idx[i] * d, xv.begin() + (idx[i] + 1) * d,
              node->value.begin() + i * d);
  if (node->requires_grad) {
    Node* self = node.get();
    Node* px = x.node().get();
    node->backward_fn = [self, px, idx = std::move(idx), d] {
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::int64_t j = 0; j < d; ++j)
          px->grad[idx[i] * d + j] += self->grad[i * d + j];
    };
  }
  return Tensor::from_node(node);
}

Tensor scatter_rows(const Tensor& rows, Index idx, std::int64_t out_rows) {
  require(rows.ndim() == 2, "scatter_rows: input must be 2-d");
  std::int64_t k = rows.dim(0), d = rows.dim(1);
  require(static_cast<std::int64_t>(idx.size()) == k,
          "scatter_rows: one index per row required");
  std::vector<char> seen(static_cast<std::size_t>(out_rows), 0);
  for (std::int64_t i : idx) {
    require(i >= 0 && i < out_rows, "scatter_rows: index out of range");
    require(!seen[i], "scatter_rows: duplicate index");
    seen[i] = 1;
  }
  auto node = new_node("scatter_rows", {out_rows, d}, {rows});
  const auto& rv = rows.data();
  for (std::int64_t i = 0; i < k; ++i)
    std::copy(rv.begin() + i * d, rv.begin() + (i + 1) * d,
              node->value.begin() + idx[i] * d);
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pr = rows.node().get();
    node->backward_fn = [self, pr, idx = std::move(idx), d] {
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::int64_t j = 0; j < d; ++j)
          pr->grad[i * d + j] += self->grad[idx[i] * d + j];
    };
  }
  return Tensor::from_node(node);
}

Tensor tile_rows(const Tensor& row, std::int64_t count) {
  require(rows_of(row) == 1, "tile_rows: input must be a single row");
  std::int64_t d = cols_of(row);
  auto node = new_node("tile_rows", {count, d}, {row});
  const auto& rv = row.data();
  for (std::int64_t i = 0; i < count; ++i)
    std::copy(rv.begin(), rv.end(), node->value.begin() + i * d);
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pr = row.node().get();
    node->backward_fn = [self, pr, count, d] {
      for (std::int64_t i = 0; i < count; ++i)
        for (std::int64_t j = 0; j < d; ++j)
          pr->grad[j] += self->grad[i * d + j];
    };
  }
  return Tensor::from_node(node);
}

Tensor embedding_lookup_sum(const std::vector<Tensor>& tables,
                            const std::vector<int>& codes,
                            std::int64_t items) {
  require(!tables.empty(), "embedding_lookup_sum: no tables");
  std::int64_t stride = static_cast<std::int64_t>(tables.size());
  require(static_cast<std::int64_t>(codes.size()) == items * stride,
          "embedding_lookup_sum: codes size must be items * tables");
  std::int64_t d = tables.front().dim(1);
  for (std::int64_t t = 0; t < stride; ++t) {
    require(tables[t].ndim() == 2 && tables[t].dim(1) == d,
            "embedding_lookup_sum: table width mismatch");
  }
  for (std::int64_t i = 0; i < items; ++i)
    for (std::int64_t t = 0; t < stride; ++t) {
      int code = codes[i * stride + t];
      require(code >= 0 && code < tables[t].dim(0),
              "embedding_lookup_sum: code out of range for table " +
                  std::to_string(t));
    }
  auto node = new_node("embedding_lookup_sum", {items, d}, tables);
  for (std::int64_t i = 0; i < items; ++i)
    for (std::int64_t t = 0; t < stride; ++t) {
      const auto& tv = tables[t].data();
      int code = codes[i * stride + t];
      for (std::int64_t j = 0; j < d; ++j)
        node->value[i * d + j] += tv[code * d + j];
    }
  if (node->requires_grad) {
    Node* self = node.get();
    node->backward_fn = [self, codes, items, stride, d] {
      for (std::int64_t i = 0; i < items; ++i)
        for (std::int64_t t = 0; t < stride; ++t) {
          Node* table = self->parents[t].get();
          if (!table->requires_grad) continue;
          int code = codes[i * stride + t];
          for (std::int64_t j = 0; j < d; ++j)
            table->grad[code * d + j] += self->grad[i * d + j];
        }
    };
  }
  return Tensor::from_node(node);
}

Tensor relu(const Tensor& a) {
  return elementwise1(
      "relu", a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  auto node = new_node("leaky_relu", a.shape(), {a});
  const auto& av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i)
    node->value[i] = av[i] > 0 ? av[i] : slope * av[i];
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pa = a.node().get();
    node->backward_fn = [self, pa, slope] {
      for (std::size_t i = 0; i < self->value.size(); ++i)
        pa->grad[i] += self->grad[i] * (pa->value[i] > 0 ? 1.0 : slope);
    };
  }
  return Tensor::from_node(node);
}

Tensor exp(const Tensor& a) {
  return elementwise1(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return elementwise1(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

namespace {

Tensor softmax_impl(const char* name, const Tensor& scores,
                    std::vector<std::uint8_t> allow) {
  std::int64_t n = rows_of(scores), d = cols_of(scores);
  bool masked = !allow.empty();
  if (masked)
    require(static_cast<std::int64_t>(allow.size()) == n * d,
            "masked_softmax: mask size mismatch");
  auto node = new_node(name, scores.shape(), {scores});
  const auto& sv = scores.data();
  for (std::int64_t i = 0; i < n; ++i) {
    double mx = -HUGE_VAL;
    for (std::int64_t j = 0; j < d; ++j)
      if (!masked || allow[i * d + j]) mx = std::max(mx, sv[i * d + j]);
    require(mx > -HUGE_VAL, "masked_softmax: fully masked row");
    double z = 0;
    for (std::int64_t j = 0; j < d; ++j) {
      double e = (!masked || allow[i * d + j]) ? std::exp(sv[i * d + j] - mx) : 0.0;
      node->value[i * d + j] = e;
      z += e;
    }
    for (std::int64_t j = 0; j < d; ++j) node->value[i * d + j] /= z;
  }
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pa = scores.node().get();
    node->backward_fn = [self, pa, n, d] {
      for (std::int64_t i = 0; i < n; ++i) {
        double dot = 0;
        for (std::int64_t j = 0; j < d; ++j)
          dot += self->grad[i * d + j] * self->value[i * d + j];
        for (std::int64_t j = 0; j < d; ++j)
          pa->grad[i * d + j] += self->value[i * d + j] *
                                 (self->grad[i * d + j] - dot);
      }
    };
  }
  return Tensor::from_node(node);
}

}  // namespace

Tensor softmax(const Tensor& scores) {
  return softmax_impl("softmax", scores, {});
}

Tensor masked_softmax(const Tensor& scores, std::vector<std::uint8_t> allow) {
  return softmax_impl("masked_softmax", scores, std::move(allow));
}

Tensor segment_softmax(const Tensor& logits, Index seg, std::int64_t segments) {
  require(logits.ndim() == 1 || (logits.ndim() == 2 && logits.dim(1) == 1),
          "segment_softmax: logits must be a vector");
  std::int64_t n = logits.size();
  require(static_cast<std::int64_t>(seg.size()) == n,
          "segment_softmax: one segment id per element");
  for (std::int64_t s : seg)
    require(s >= 0 && s < segments, "segment_softmax: segment out of range");
  auto node = new_node("segment_softmax", logits.shape(), {logits});
  const auto& lv = logits.data();
  std::vector<double> mx(static_cast<std::size_t>(segments), -HUGE_VAL);
  for (std::int64_t i = 0; i < n; ++i)
    mx[seg[i]] = std::max(mx[seg[i]], lv[i]);
  std::vector<double> z(static_cast<std::size_t>(segments), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    node->value[i] = std::exp(lv[i] - mx[seg[i]]);
    z[seg[i]] += node->value[i];
  }
  for (std::int64_t i = 0; i < n; ++i) node->value[i] /= z[seg[i]];
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pa = logits.node().get();
    node->backward_fn = [self, pa, seg = std::move(seg), segments, n] {
      std::vector<double> dot(static_cast<std::size_t>(segments), 0.0);
      for (std::int64_t i = 0; i < n; ++i)
        dot[seg[i]] += self->grad[i] * self->value[i];
      for (std::int64_t i = 0; i < n; ++i)
        pa->grad[i] += self->value[i] * (self->grad[i] - dot[seg[i]]);
    };
  }
  return Tensor::from_node(node);
}

Tensor segment_sum_rows(const Tensor& x, Index seg, std::int64_t segments) {
  require(x.ndim() == 2, "segment_sum_rows: input must be 2-d");
  std::int64_t n = x.dim(0), d = x.dim(1);
  require(static_cast<std::int64_t>(seg.size()) == n,
          "segment_sum_rows: one segment id per row");
  for (std::int64_t s : seg)
    require(s >= 0 && s < segments, "segment_sum_rows: segment out of range");
  auto node = new_node("segment_sum_rows", {segments, d}, {x});
  const auto& xv = x.data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j)
      node->value[seg[i] * d + j] += xv[i * d + j];
  if (node->requires_grad) {
    Node* self = node.get();
    Node* px = x.node().get();
    node->backward_fn = [self, px, seg = std::move(seg), d] {
      for (std::size_t i = 0; i < seg.size(); ++i)
        for (std::int64_t j = 0; j < d; ++j)
          px->grad[i * d + j] += self->grad[seg[i] * d + j];
    };
  }
  return Tensor::from_node(node);
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require(x.ndim() == 2, "scale_rows: x must be 2-d");
  std::int64_t n = x.dim(0), d = x.dim(1);
  require(s.size() == n, "scale_rows: one factor per row");
  auto node = new_node("scale_rows", x.shape(), {x, s});
  const auto& xv = x.data();
  const auto& sv = s.data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j)
      node->value[i * d + j] = xv[i * d + j] * sv[i];
  if (node->requires_grad) {
    Node* self = node.get();
    Node* px = x.node().get();
    Node* ps = s.node().get();
    node->backward_fn = [self, px, ps, n, d] {
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < d; ++j) {
          double g = self->grad[i * d + j];
          if (px->requires_grad) px->grad[i * d + j] += g * ps->value[i];
          if (ps->requires_grad) ps->grad[i] += g * px->value[i * d + j];
        }
    };
  }
  return Tensor::from_node(node);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  require(x.ndim() == 2, "layer_norm: x must be 2-d");
  std::int64_t n = x.dim(0), d = x.dim(1);
  require(gain.size() == d && bias.size() == d,
          "layer_norm: gain/bias size mismatch");
  auto node = new_node("layer_norm", x.shape(), {x, gain, bias});
  const auto& xv = x.data();
  const auto& gv = gain.data();
  const auto& bv = bias.data();
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    double mean = 0;
    for (std::int64_t j = 0; j < d; ++j) mean += xv[i * d + j];
    mean /= static_cast<double>(d);
    double var = 0;
    for (std::int64_t j = 0; j < d; ++j) {
      double c = xv[i * d + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::int64_t j = 0; j < d; ++j) {
      double h = (xv[i * d + j] - mean) * is;
      (*xhat)[i * d + j] = h;
      node->value[i * d + j] = gv[j] * h + bv[j];
    }
  }
  if (node->requires_grad) {
    Node* self = node.get();
    Node* px = x.node().get();
    Node* pg = gain.node().get();
    Node* pb = bias.node().get();
    node->backward_fn = [self, px, pg, pb, xhat, inv_std, n, d] {
      for (std::int64_t i = 0; i < n; ++i) {
        double sum1 = 0, sum2 = 0;
        for (std::int64_t j = 0; j < d; ++j) {
          double dxh = self->grad[i * d + j] * pg->value[j];
          sum1 += dxh;
          sum2 += dxh * (*xhat)[i * d + j];
        }
        for (std::int64_t j = 0; j < d; ++j) {
          double g = self->grad[i * d + j];
          if (pg->requires_grad) pg->grad[j] += g * (*xhat)[i * d + j];
          if (pb->requires_grad) pb->grad[j] += g;
          if (px->requires_grad) {
            double dxh = g * pg->value[j];
            px->grad[i * d + j] +=
                (*inv_std)[i] * (dxh - sum1 / static_cast<double>(d) -
                                 (*xhat)[i * d + j] * sum2 / static_cast<double>(d));
          }
        }
      }
    };
  }
  return Tensor::from_node(node);
}

Tensor dropout(const Tensor& x, double p, bool train, std::uint64_t key) {
  if (!train || p <= 0.0) return x;
  require(p < 1.0, "dropout: rate must be below 1");
  auto node = new_node("dropout", x.shape(), {x});
  const auto& xv = x.data();
  auto mask = std::make_shared<std::vector<double>>(xv.size());
  double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    double m = uniform01(key, i) >= p ? keep_scale : 0.0;
    (*mask)[i] = m;
    node->value[i] = xv[i] * m;
  }
  if (node->requires_grad) {
    Node* self = node.get();
    Node* px = x.node().get();
    node->backward_fn = [self, px, mask] {
      for (std::size_t i = 0; i < self->value.size(); ++i)
        px->grad[i] += self->grad[i] * (*mask)[i];
    };
  }
  return Tensor::from_node(node);
}

Tensor sum_all(const Tensor& x) {
  auto node = new_node("sum_all", {1}, {x});
  double s = 0;
  for (double v : x.data()) s += v;
  node->value[0] = s;
  if (node->requires_grad) {
    Node* self = node.get();
    Node* px = x.node().get();
    node->backward_fn = [self, px] {
      for (std::size_t i = 0; i < px->value.size(); ++i)
        px->grad[i] += self->grad[0];
    };
  }
  return Tensor::from_node(node);
}

Tensor mean_rows(const Tensor& x) {
  require(x.ndim() == 2, "mean_rows: input must be 2-d");
  std::int64_t n = x.dim(0), d = x.dim(1);
  require(n > 0, "mean_rows: empty input");
  auto node = new_node("mean_rows", {1, d}, {x});
  const auto& xv = x.data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j) node->value[j] += xv[i * d + j];
  for (std::int64_t j = 0; j < d; ++j) node->value[j] /= static_cast<double>(n);
  if (node->requires_grad) {
    Node* self = node.get();
    Node* px = x.node().get();
    node->backward_fn = [self, px, n, d] {
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < d; ++j)
          px->grad[i * d + j] += self->grad[j] / static_cast<double>(n);
    };
  }
  return Tensor::from_node(node);
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     int ignore_index) {
  require(logits.ndim() == 2, "cross_entropy: logits must be 2-d");
  std::int64_t n = logits.dim(0), c = logits.dim(1);
  require(static_cast<std::int64_t>(targets.size()) == n,
          "cross_entropy: one target per row");
  std::int64_t counted = 0;
  for (int t : targets)
    if (t != ignore_index) {
      require(t >= 0 && t < c, "cross_entropy: target out of range");
      ++counted;
    }
  require(counted > 0, "cross_entropy: every row ignored");
  auto node = new_node("cross_entropy", {1}, {logits});
  const auto& lv = logits.data();
  auto probs = std::make_shared<std::vector<double>>(lv.size());
  double loss = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    double mx = -HUGE_VAL;
    for (std::int64_t j = 0; j < c; ++j) mx = std::max(mx, lv[i * c + j]);
    double z = 0;
    for (std::int64_t j = 0; j < c; ++j) z += std::exp(lv[i * c + j] - mx);
    double lse = mx + std::log(z);
    for (std::int64_t j = 0; j < c; ++j)
      (*probs)[i * c + j] = std::exp(lv[i * c + j] - lse);
    if (targets[i] != ignore_index) loss += lse - lv[i * c + targets[i]];
  }
  node->value[0] = loss / static_cast<double>(counted);
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pl = logits.node().get();
    node->backward_fn = [self, pl, probs, targets, ignore_index, n, c,
                         counted] {
      double g = self->grad[0] / static_cast<double>(counted);
      for (std::int64_t i = 0; i < n; ++i) {
        if (targets[i] == ignore_index) continue;
        for (std::int64_t j = 0; j < c; ++j) {
          double delta = j == targets[i] ? 1.0 : 0.0;
          pl->grad[i * c + j] += g * ((*probs)[i * c + j] - delta);
        }
      }
    };
  }
  return Tensor::from_node(node);
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require(same_shape(pred, target), "mse_loss: shape mismatch");
  auto node = new_node("mse_loss", {1}, {pred, target});
  const auto& pv = pred.data();
  const auto& tv = target.data();
  double loss = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    double r = pv[i] - tv[i];
    loss += r * r;
  }
  node->value[0] = loss / static_cast<double>(pv.size());
  if (node->requires_grad) {
    Node* self = node.get();
    Node* pp = pred.node().get();
    Node* pt = target.node().get();
    node->backward_fn = [self, pp, pt] {
      double n = static_cast<double>(pp->value.size());
      for (std::size_t i = 0; i < pp->value.size(); ++i) {
        double r = 2.0 * (pp->value[i] - pt->value[i]) / n * self->grad[0];
        if (pp->requires_grad) pp->grad[i] += r;
        if (pt->requires_grad) pt->grad[i] -= r;
      }
    };
  }
  return Tensor::from_node(node);
}

}  // namespace rxnalign::nd
