#include "msmo/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace msmo::ad {

std::string Shape::str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_.str());
  }
}

Tensor Tensor::row(std::vector<double> values) {
  Shape s{1, values.size()};
  return Tensor(s, std::move(values));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_.str());
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

const Tensor& Var::value() const { return node_->value; }
Tensor& Var::mutable_value() { return node_->value; }

const Tensor& Var::grad() const { return node_->grad_buffer(); }

bool Var::requires_grad() const { return node_->requires_grad; }

void Var::zero_grad() {
  if (!node_->grad.empty()) node_->grad.fill(0.0);
}

Tensor& Node::grad_buffer() {
  if (grad.empty() && value.size() > 0) grad = Tensor(value.rows(), value.cols());
  return grad;
}

namespace {

Var make_node(Tensor value, std::vector<Var> parents, const char* op,
              std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  n->requires_grad = rg;
  if (rg) {
    n->parents = std::move(parents);
    n->backward = std::move(bw);
  }
  return Var(std::move(n));
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

void require_same(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) mismatch(op, a.shape(), b.shape());
}

// Returns the parent's gradient buffer, or nullptr when it does not need one.
Tensor* sink(const Var& p) {
  return p.requires_grad() ? &p.node()->grad_buffer() : nullptr;
}

template <class F>
Var unary(const Var& a, const char* op, F f, std::function<void(Node&)> bw) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return make_node(std::move(out), {a}, op, std::move(bw));
}

}  // namespace

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "constant";
  return Var(std::move(n));
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "parameter";
  n->requires_grad = true;
  return Var(std::move(n));
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.rows()) mismatch("matmul", x.shape(), y.shape());
  const std::size_t n = x.rows(), k = x.cols(), m = y.cols();
  Tensor out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* o = &out(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x(i, p);
      if (xv == 0.0) continue;
      const double* yr = y.row_view(p).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += xv * yr[j];
    }
  }
  return make_node(std::move(out), {a, b}, "matmul", [n, k, m](Node& self) {
    const Var& pa = self.parents[0];
    const Var& pb = self.parents[1];
    const Tensor& g = self.grad;
    if (Tensor* ga = sink(pa)) {
      const Tensor& y = pb.value();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double* gr = g.row_view(i).data();
          const double* yr = y.row_view(p).data();
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += gr[j] * yr[j];
          (*ga)(i, p) += acc;
        }
    }
    if (Tensor* gb = sink(pb)) {
      const Tensor& x = pa.value();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x(i, p);
          if (xv == 0.0) continue;
          const double* gr = g.row_view(i).data();
          double* o = &(*gb)(p, 0);
          for (std::size_t j = 0; j < m; ++j) o[j] += xv * gr[j];
        }
    }
  });
}

Var add(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const bool broadcast = y.rows() == 1 && x.rows() != 1 && y.cols() == x.cols();
  if (!broadcast && x.shape() != y.shape()) mismatch("add", x.shape(), y.shape());
  Tensor out = x;
  const std::size_t c = x.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += broadcast ? y[i % c] : y[i];
  return make_node(std::move(out), {a, b}, "add", [broadcast, c](Node& self) {
    const Tensor& g = self.grad;
    if (Tensor* ga = sink(self.parents[0]))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (Tensor* gb = sink(self.parents[1]))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[broadcast ? i % c : i] += g[i];
  });
}

Var sub(const Var& a, const Var& b) {
  require_same("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_node(std::move(out), {a, b}, "sub", [](Node& self) {
    const Tensor& g = self.grad;
    if (Tensor* ga = sink(self.parents[0]))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (Tensor* gb = sink(self.parents[1]))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

Var mul(const Var& a, const Var& b) {
  require_same("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_node(std::move(out), {a, b}, "mul", [](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& x = self.parents[0].value();
    const Tensor& y = self.parents[1].value();
    if (Tensor* ga = sink(self.parents[0]))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i];
    if (Tensor* gb = sink(self.parents[1]))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * x[i];
  });
}

Var div(const Var& a, const Var& s) {
  if (s.shape() != Shape{1, 1}) mismatch("div", a.shape(), s.shape());
  const double d = s.value()[0];
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= d;
  return make_node(std::move(out), {a, s}, "div", [d](Node& self) {
    const Tensor& g = self.grad;
    if (Tensor* ga = sink(self.parents[0]))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / d;
    if (Tensor* gs = sink(self.parents[1])) {
      const Tensor& x = self.parents[0].value();
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
      (*gs)[0] -= acc / (d * d);
    }
  });
}

Var scale(const Var& a, double factor) {
  return unary(a, "scale", [factor](double v) { return v * factor; },
               [factor](Node& self) {
                 Tensor* ga = sink(self.parents[0]);
                 for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += factor * self.grad[i];
               });
}

Var tanh(const Var& a) {
  return unary(a, "tanh", [](double v) { return std::tanh(v); }, [](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      (*ga)[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Var sigmoid(const Var& a) {
  return unary(
      a, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](Node& self) {
        Tensor* ga = sink(self.parents[0]);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const double y = self.value[i];
          (*ga)[i] += self.grad[i] * y * (1.0 - y);
        }
      });
}

Var softmax_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = x(r, 0);
    for (std::size_t c = 1; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) z += (out(r, c) = std::exp(x(r, c) - mx));
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) /= z;
  }
  return make_node(std::move(out), {a}, "softmax", [](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    const Tensor& y = self.value;
    const Tensor& g = self.grad;
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) (*ga)(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var log(const Var& a) {
  return unary(a, "log", [](double v) { return std::log(v); }, [](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    const Tensor& x = self.parents[0].value();
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] / x[i];
  });
}

Var square(const Var& a) {
  return unary(a, "square", [](double v) { return v * v; }, [](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    const Tensor& x = self.parents[0].value();
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += 2.0 * x[i] * self.grad[i];
  });
}

Var clamp_min(const Var& a, double floor) {
  return unary(a, "clamp_min", [floor](double v) { return v > floor ? v : floor; },
               [floor](Node& self) {
                 Tensor* ga = sink(self.parents[0]);
                 const Tensor& x = self.parents[0].value();
                 for (std::size_t i = 0; i < self.grad.size(); ++i)
                   if (x[i] > floor) (*ga)[i] += self.grad[i];
               });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return make_node(Tensor::scalar(s), {a}, "sum", [](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    const double g = self.grad[0];
    for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean: empty tensor");
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return make_node(Tensor::scalar(s / n), {a}, "mean", [n](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    const double g = self.grad[0] / n;
    for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g;
  });
}

Var mean_rows(const Var& a) {
  const Tensor& x = a.value();
  if (x.rows() == 0) throw ShapeError("mean_rows: no rows");
  const double n = static_cast<double>(x.rows());
  Tensor out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += x(r, c);
  for (std::size_t c = 0; c < x.cols(); ++c) out[c] /= n;
  return make_node(std::move(out), {a}, "mean_rows", [n](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    for (std::size_t r = 0; r < ga->rows(); ++r)
      for (std::size_t c = 0; c < ga->cols(); ++c) (*ga)(r, c) += self.grad[c] / n;
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.value().cols() != cols) mismatch("concat_rows", parts[0].shape(), p.shape());
    rows += p.value().rows();
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + off);
    off += p.value().size();
  }
  return make_node(std::move(out), std::vector<Var>(parts.begin(), parts.end()), "concat_rows",
                   [](Node& self) {
                     std::size_t off = 0;
                     for (const auto& p : self.parents) {
                       const std::size_t n = p.value().size();
                       if (Tensor* gp = sink(p))
                         for (std::size_t i = 0; i < n; ++i) (*gp)[i] += self.grad[off + i];
                       off += n;
                     }
                   });
}

Var concat_cols(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rows() != y.rows()) mismatch("concat_cols", x.shape(), y.shape());
  const std::size_t ca = x.cols(), cb = y.cols();
  Tensor out(x.rows(), ca + cb);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < ca; ++c) out(r, c) = x(r, c);
    for (std::size_t c = 0; c < cb; ++c) out(r, ca + c) = y(r, c);
  }
  return make_node(std::move(out), {a, b}, "concat_cols", [ca, cb](Node& self) {
    const Tensor& g = self.grad;
    if (Tensor* ga = sink(self.parents[0]))
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < ca; ++c) (*ga)(r, c) += g(r, c);
    if (Tensor* gb = sink(self.parents[1]))
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < cb; ++c) (*gb)(r, c) += g(r, ca + c);
  });
}

Var row(const Var& a, std::size_t r) {
  const Tensor& x = a.value();
  if (r >= x.rows()) throw ShapeError("row: index " + std::to_string(r) + " out of range for " + x.shape().str());
  auto view = x.row_view(r);
  Tensor out = Tensor::row(std::vector<double>(view.begin(), view.end()));
  return make_node(std::move(out), {a}, "row", [r](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    const std::size_t c = self.grad.size();
    for (std::size_t j = 0; j < c; ++j) (*ga)(r, j) += self.grad[j];
  });
}

Var select_cols(const Var& a, std::span<const std::size_t> cols) {
  const Tensor& x = a.value();
  for (auto c : cols)
    if (c >= x.cols()) throw ShapeError("select_cols: column " + std::to_string(c) + " out of range for " + x.shape().str());
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  Tensor out(x.rows(), idx.size());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < idx.size(); ++j) out(r, j) = x(r, idx[j]);
  return make_node(std::move(out), {a}, "select_cols", [idx](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    for (std::size_t r = 0; r < self.grad.rows(); ++r)
      for (std::size_t j = 0; j < idx.size(); ++j) (*ga)(r, idx[j]) += self.grad(r, j);
  });
}

Var pick(const Var& a, std::span<const std::size_t> col_per_row) {
  const Tensor& x = a.value();
  if (col_per_row.size() != x.rows())
    mismatch("pick", x.shape(), Shape{col_per_row.size(), 1});
  std::vector<std::size_t> idx(col_per_row.begin(), col_per_row.end());
  Tensor out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (idx[r] >= x.cols()) throw ShapeError("pick: column out of range for " + x.shape().str());
    out[r] = x(r, idx[r]);
  }
  return make_node(std::move(out), {a}, "pick", [idx](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    for (std::size_t r = 0; r < idx.size(); ++r) (*ga)(r, idx[r]) += self.grad[r];
  });
}

Var embedding(const Var& table, std::span<const std::size_t> ids) {
  const Tensor& t = table.value();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  Tensor out(idx.size(), t.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= t.rows())
      throw ShapeError("embedding: id " + std::to_string(idx[r]) + " out of range for table " + t.shape().str());
    auto src = t.row_view(idx[r]);
    std::copy(src.begin(), src.end(), out.data().begin() + r * t.cols());
  }
  return make_node(std::move(out), {table}, "embedding", [idx](Node& self) {
    Tensor* gt = sink(self.parents[0]);
    const std::size_t c = self.grad.cols();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) (*gt)(idx[r], j) += self.grad(r, j);
  });
}

Var dropout(const Var& a, double keep_prob, Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw std::invalid_argument("dropout: keep_prob must be in (0, 1]");
  Tensor mask(a.value().rows(), a.value().cols());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = uniform01(rng) < keep_prob ? 1.0 / keep_prob : 0.0;
  return dropout_with_mask(a, mask);
}

Var dropout_with_mask(const Var& a, const Tensor& mask) {
  if (mask.shape() != a.shape()) mismatch("dropout", a.shape(), mask.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_node(std::move(out), {a}, "dropout", [mask](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * mask[i];
  });
}

Var grad_reverse(const Var& a, GradReversalConfig cfg) {
  if (cfg.lambda < 0.0) throw std::invalid_argument("grad_reverse: lambda must be non-negative");
  const double factor = -cfg.lambda;
  return make_node(a.value(), {a}, "grad_reverse", [factor](Node& self) {
    Tensor* ga = sink(self.parents[0]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += factor * self.grad[i];
  });
}

Var detach(const Var& a) { return constant(a.value()); }

void backward(const Var& root) {
  if (root.shape() != Shape{1, 1})
    throw ShapeError("backward: root must be scalar, got " + root.shape().str());
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; parents precede children in `order`.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].node();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

}  // namespace msmo::ad
