#include "occworld/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "occworld/errors.hpp"
#include "occworld/numerics/autograd.hpp"

namespace occworld::nn {

namespace {
thread_local bool g_grad_enabled = true;
bool g_check_finite = false;
std::string g_fault;
}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

double* Node::grad_data() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad.data();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) : node_(std::make_shared<Node>()) {
  for (auto e : shape) {
    if (e < 0) throw ShapeError("tensor: negative extent in " + shape_str(shape));
  }
  node_->value.assign(static_cast<std::size_t>(nn::numel(shape)), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, Buffer values, bool requires_grad) : node_(std::make_shared<Node>()) {
  if (static_cast<std::int64_t>(values.size()) != nn::numel(shape)) {
    throw ShapeError("tensor: " + std::to_string(values.size()) + " values do not fill shape " +
                     shape_str(shape));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, const std::vector<double>& values, bool requires_grad)
    : Tensor(std::move(shape), Buffer(values.begin(), values.end()), requires_grad) {}

std::int64_t Tensor::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("dim: axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  }
  return node_->shape[static_cast<std::size_t>(a)];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->value[0];
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
  if (index.size() != rank()) throw ShapeError("at: index rank mismatch for " + shape_str(shape()));
  std::int64_t off = 0;
  std::size_t i = 0;
  for (auto v : index) {
    const auto ext = node_->shape[i++];
    if (v < 0 || v >= ext) throw ShapeError("at: index out of range for " + shape_str(shape()));
    off = off * ext + v;
  }
  return node_->value[static_cast<std::size_t>(off)];
}

void Tensor::backward() const {
  if (numel() != 1) throw ShapeError("backward: root must be a scalar, got " + shape_str(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order without recursion.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_data()[0] += 1.0;
  const bool faulty = !g_fault.empty();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward || n->grad.empty()) continue;
    if (faulty && g_fault == n->op) {
      std::vector<Buffer> before;
      for (auto& p : n->parents) before.push_back(p->grad);
      n->backward(*n);
      for (std::size_t i = 0; i < n->parents.size(); ++i) {
        auto& g = n->parents[i]->grad;
        for (std::size_t j = 0; j < g.size(); ++j) {
          const double b = before[i].empty() ? 0.0 : before[i][j];
          g[j] = b - (g[j] - b);
        }
      }
    } else {
      n->backward(*n);
    }
  }
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void set_check_finite(bool enabled) { g_check_finite = enabled; }
bool check_finite_enabled() { return g_check_finite; }

void set_fault_injection(std::string_view op_name) { g_fault = std::string(op_name); }
const std::string& fault_injection() { return g_fault; }

namespace detail {

Tensor make_result(Shape shape, Buffer values, const char* op,
                   const std::vector<Tensor>& parents, std::function<void(Node&)> backward) {
  if (g_check_finite) {
    for (double v : values) {
      if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  if (g_grad_enabled) {
    const bool any = std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return wants_grad(p); });
    if (any) {
      node->requires_grad = true;
      for (const auto& p : parents) {
        if (p.defined()) node->parents.push_back(p.node());
      }
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

}  // namespace detail
}  // namespace occworld::nn
