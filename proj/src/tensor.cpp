#include "muse/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <unordered_set>
#include <utility>

#include "muse/errors.hpp"

namespace muse {

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return filled(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
  return from(rows, cols, std::vector<double>(rows * cols, value), requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
  if (values.size() != rows * cols) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  auto node = std::make_shared<detail::Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = zeros(n, n);
  auto d = t.mutable_data();
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
  return t;
}

Tensor Tensor::make_result(std::size_t rows, std::size_t cols, std::vector<double> value,
                           std::initializer_list<Tensor> inputs, BackwardFn backward) {
  return make_result(rows, cols, std::move(value), std::vector<Tensor>(inputs), std::move(backward));
}

Tensor Tensor::make_result(std::size_t rows, std::size_t cols, std::vector<double> value,
                           const std::vector<Tensor>& inputs, BackwardFn backward) {
  Tensor out = from(rows, cols, std::move(value));
  const bool track = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    out.node_->requires_grad = true;
    for (const auto& in : inputs) {
      if (in.requires_grad()) out.node_->inputs.push_back(in.node_);
    }
    out.node_->backward = std::move(backward);
  }
  return out;
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows()) + "x" + std::to_string(cols()) + "]";
}

std::span<const double> Tensor::data() const {
  if (!node_) return {};
  return {node_->value.data(), node_->value.size()};
}

std::span<double> Tensor::mutable_data() {
  if (!node_) return {};
  return {node_->value.data(), node_->value.size()};
}

std::vector<double> Tensor::to_vector() const {
  auto d = data();
  return {d.begin(), d.end()};
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string());
  return node_->value[0];
}

void Tensor::set_requires_grad(bool flag) {
  if (!node_) throw ContractError("set_requires_grad on undefined tensor");
  node_->requires_grad = flag;
}

std::vector<double> Tensor::grad() const {
  if (!node_) return {};
  if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
  return node_->grad;
}

std::span<double> Tensor::grad_accumulator() const {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return {node_->grad.data(), node_->grad.size()};
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return from(rows(), cols(), to_vector()); }

Tensor Tensor::clone() const { return from(rows(), cols(), to_vector(), requires_grad()); }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward requires a 1x1 loss, got " + loss.shape_string());
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS: every node lands after all of its inputs.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  detail::Node* root = loss.node().get();
  if (root->grad.empty()) root->grad.assign(1, 0.0);
  root->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  // Consume the graph: drop history and intermediate gradients.
  for (detail::Node* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->inputs.clear();
      node->grad.clear();
      node->grad.shrink_to_fit();
      node->requires_grad = false;
    }
  }
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  auto da = a.data();
  auto db = b.data();
  return da.empty() || std::memcmp(da.data(), db.data(), da.size() * sizeof(double)) == 0;
}

}  // namespace muse
