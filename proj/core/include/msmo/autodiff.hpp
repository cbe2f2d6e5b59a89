#pragma once

// A small define-by-run reverse-mode differentiation engine over dense
// row-major matrices of doubles. Every value is two-dimensional; scalars are
// 1x1 and vectors are 1xN.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msmo/random.hpp"

namespace msmo::ad {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor row(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> row_view(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * shape_.cols, shape_.cols);
  }

  double item() const;
  void fill(double v);
  bool all_finite() const;
  double max_abs() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct Node;

// Reference-counted handle to a graph node. Parameters are long-lived
// leaves; intermediate nodes die with the last handle to the loss.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const;
  Tensor& mutable_value();
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  void zero_grad();
  explicit operator bool() const { return static_cast<bool>(node_); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  std::vector<Var> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  const char* op = "leaf";

  Tensor& grad_buffer();
};

Var constant(Tensor value);
Var parameter(Tensor value);

struct GradReversalConfig {
  double lambda = 1.0;
};

// Primitives. Binary ops require equal shapes except where noted.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);  // b may be 1xC, broadcast over rows
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& s);  // s is 1x1
Var scale(const Var& a, double factor);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softmax_rows(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var clamp_min(const Var& a, double floor);
Var sum(const Var& a);
Var mean(const Var& a);
Var mean_rows(const Var& a);  // column means, 1xC
Var concat_rows(std::span<const Var> parts);
Var concat_cols(const Var& a, const Var& b);
Var row(const Var& a, std::size_t r);
Var select_cols(const Var& a, std::span<const std::size_t> cols);
Var pick(const Var& a, std::span<const std::size_t> col_per_row);  // Nx1
Var embedding(const Var& table, std::span<const std::size_t> ids);
Var dropout(const Var& a, double keep_prob, Rng& rng);
Var dropout_with_mask(const Var& a, const Tensor& mask);
Var grad_reverse(const Var& a, GradReversalConfig cfg);
Var detach(const Var& a);

// Accumulates d(root)/d(node) into every reachable node that requires grad.
void backward(const Var& root);

}  // namespace msmo::ad
