#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace muse {

class Tensor;

namespace detail {

// One vertex of the dynamic computation graph. Leaves have no backward rule.
struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(const Node& self)> backward;
};

}  // namespace detail

// Dense row-major 2-D matrix of doubles that can take part in reverse-mode
// differentiation. Tensor is a handle: copies share storage and gradient.
class Tensor {
 public:
  // Receives the output node (value and gradient) and accumulates the
  // contributions into the inputs via Tensor::grad_accumulator.
  using BackwardFn = std::function<void(const detail::Node& out)>;

  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor filled(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor identity(std::size_t n);
  static Tensor scalar(double value, bool requires_grad = false) { return filled(1, 1, value, requires_grad); }

  // Records the result of an operation. When no input requires a gradient the
  // result is a plain constant and `backward` is dropped.
  static Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> value,
                            std::initializer_list<Tensor> inputs, BackwardFn backward);
  static Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> value,
                            const std::vector<Tensor>& inputs, BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_ ? node_->rows : 0; }
  std::size_t cols() const { return node_ ? node_->cols : 0; }
  std::size_t size() const { return rows() * cols(); }
  std::string shape_string() const;

  std::span<const double> data() const;
  // Direct write access, for parameter updates and initialisation.
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;

  double operator()(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool is_leaf() const { return node_ && !node_->backward; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  // Gradient (zeros when nothing has been accumulated yet).
  std::vector<double> grad() const;
  std::span<double> grad_accumulator() const;
  void zero_grad();

  // Constant copy of the current values, outside any graph.
  Tensor detach() const;
  // Deep copy that keeps the requires_grad flag but no history.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

// Reverse pass from a 1x1 loss. Leaf gradients accumulate; the intermediate
// part of the graph is released afterwards.
void backward(const Tensor& loss);

// Bitwise equality of shape and values.
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace muse
