#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "delta/common.hpp"

namespace delta {

namespace detail {

struct TensorNode {
  std::vector<int> shape;
  std::shared_ptr<Buffer> data;  // shared so reshapes are zero-copy
  Buffer grad;                   // empty until backward needs it
  bool requires_grad = false;
  long long tape_id = -1;  // index of the tape entry that produced this node

  long long numel() const {
    long long n = 1;
    for (int s : shape) n *= s;
    return n;
  }
};

}  // namespace detail

// Dense 64-bit tensor with value semantics over a shared node. Operations
// on tensors record backward closures on a global tape; backward() replays
// the tape in reverse. Not thread-safe for concurrent graph building; the
// kernels parallelize inside each op instead.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value,
                     bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                        bool requires_grad = false);
  static Tensor normal(std::vector<int> shape, Rng& rng, double mean,
                       double sd, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  int ndim() const { return static_cast<int>(shape().size()); }
  int dim(int i) const;
  long long numel() const;

  double* data();
  const double* data() const;
  double item() const;  // value of a single-element tensor

  bool requires_grad() const;
  void set_requires_grad(bool v);
  const double* grad() const;  // nullptr until backward touched this node
  double* grad_data();         // allocates zeroed grad if absent
  void zero_grad();            // drops the grad buffer

  // Deep copy of the values; grad-free leaf.
  Tensor clone() const;

  std::shared_ptr<detail::TensorNode> node_;

  static void check_shape(const std::vector<int>& shape);
};

// Global tape of backward closures, ordered by construction.
class Tape {
 public:
  static Tape& instance();

  long long push(std::shared_ptr<detail::TensorNode> out,
                 std::function<void()> backward);
  void clear();
  std::size_t size() const { return entries_.size(); }

  struct Entry {
    std::shared_ptr<detail::TensorNode> out;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
};

bool grad_enabled();

// Disables tape recording in scope (evaluation, finite differences).
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse from the entry
// that produced `loss`. Gradients accumulate into every reachable node that
// requires them. The tape is left intact; callers clear it between steps.
void backward(const Tensor& loss);

// Compares tape gradients of a scalar-valued function against central
// finite differences taken over every element of x. Returns the maximum
// relative error max |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1).
double finite_difference_check(const std::function<Tensor()>& f, Tensor x,
                               double h);

}  // namespace delta
