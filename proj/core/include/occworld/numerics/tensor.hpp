#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace occworld::nn {

using Shape = std::vector<std::int64_t>;

/// 64-byte aligned allocator. Vectorized kernels choose how many leading
/// elements to peel from the pointer alignment, so fixing the alignment keeps
/// reductions bitwise reproducible from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// One recorded value in the autograd graph. Leaves have no backward function.
struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;  // lazily allocated, same length as value
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  double* grad_data();
};

/// Dense row-major float64 tensor with reverse-mode autodiff.
///
/// Tensors are cheap handles onto a shared Node: copying a Tensor aliases the
/// same storage. Every op in ops.hpp returns a fresh Node, so values reachable
/// from a recorded graph are never mutated by later ops.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, const std::vector<double>& values, bool requires_grad = false);
  Tensor(Shape shape, Buffer values, bool requires_grad = false);
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor(Shape{}, Buffer{v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  /// Extent of axis `axis`; negative values count from the back.
  std::int64_t dim(int axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }

  std::span<double> data() { return node_->value; }
  std::span<const double> data() const { return node_->value; }
  double item() const;
  double at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  /// Empty span until a backward pass has written into this tensor.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return {node_->grad_data(), node_->value.size()}; }
  void zero_grad() { node_->grad.clear(); }

  /// Reverse-mode sweep from a scalar root. Each reachable node's backward
  /// runs exactly once, in reverse topological order.
  void backward() const;

  /// Copy of the values as a new leaf that does not require grad.
  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const { return Tensor(shape(), node_->value, requires_grad); }

  const std::shared_ptr<Node>& node() const { return node_; }
  const char* op() const { return node_->op; }

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled();

/// Disables graph recording for its lifetime (inference, evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Debug mode: every op validates that its output is finite and throws
/// NumericError naming the op otherwise.
void set_check_finite(bool enabled);
bool check_finite_enabled();

/// Test hook: the backward of the named op is applied with flipped sign.
/// Used to demonstrate that the gradient checker catches faulty ops.
void set_fault_injection(std::string_view op_name);
const std::string& fault_injection();

}  // namespace occworld::nn
