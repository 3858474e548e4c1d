#include "delta/tensor.hpp"

#include <cmath>
#include <sstream>

#include "delta/kernels.hpp"

namespace delta {

namespace {
thread_local bool g_grad_enabled = true;

std::shared_ptr<detail::TensorNode> make_node(std::vector<int> shape,
                                              bool requires_grad) {
  Tensor::check_shape(shape);
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::make_shared<Buffer>(
      static_cast<std::size_t>(node->numel()), 0.0);
  node->requires_grad = requires_grad;
  return node;
}
}  // namespace

void Tensor::check_shape(const std::vector<int>& shape) {
  long long n = 1;
  for (int s : shape) {
    if (s <= 0)
      throw ShapeError("invalid tensor shape " + shape_str(shape) +
                       ": extents must be positive");
    n *= s;
  }
  if (shape.empty())
    throw ShapeError("invalid tensor shape []: rank must be at least 1");
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  Tensor t;
  t.node_ = make_node(std::move(shape), requires_grad);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  t.node_->data->fill(value);
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> values,
                         bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  if (static_cast<long long>(values.size()) != t.numel())
    throw ShapeError("from_data: " + std::to_string(values.size()) +
                     " values for shape " + shape_str(t.shape()));
  double* p = t.data();
  for (std::size_t i = 0; i < values.size(); ++i) p[i] = values[i];
  return t;
}

Tensor Tensor::uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                       bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  double* p = t.data();
  long long n = t.numel();
  for (long long i = 0; i < n; ++i) p[i] = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::normal(std::vector<int> shape, Rng& rng, double mean, double sd,
                      bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  double* p = t.data();
  long long n = t.numel();
  for (long long i = 0; i < n; ++i) p[i] = rng.normal(mean, sd);
  return t;
}

const std::vector<int>& Tensor::shape() const {
  if (!node_) throw ContractError("shape() on an undefined tensor");
  return node_->shape;
}

int Tensor::dim(int i) const {
  const auto& s = shape();
  if (i < 0) i += static_cast<int>(s.size());
  if (i < 0 || i >= static_cast<int>(s.size()))
    throw ShapeError("dim " + std::to_string(i) + " out of range for " +
                     shape_str(s));
  return s[static_cast<std::size_t>(i)];
}

long long Tensor::numel() const {
  if (!node_) return 0;
  return node_->numel();
}

double* Tensor::data() {
  if (!node_) throw ContractError("data() on an undefined tensor");
  return node_->data->data();
}

const double* Tensor::data() const {
  if (!node_) throw ContractError("data() on an undefined tensor");
  return node_->data->data();
}

double Tensor::item() const {
  if (numel() != 1)
    throw ContractError("item() needs a single-element tensor, got " +
                        shape_str(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const {
  return node_ != nullptr && node_->requires_grad;
}

void Tensor::set_requires_grad(bool v) {
  if (!node_) throw ContractError("set_requires_grad on an undefined tensor");
  node_->requires_grad = v;
}

const double* Tensor::grad() const {
  if (!node_ || node_->grad.empty()) return nullptr;
  return node_->grad.data();
}

double* Tensor::grad_data() {
  if (!node_) throw ContractError("grad_data() on an undefined tensor");
  if (node_->grad.empty())
    node_->grad = Buffer(static_cast<std::size_t>(node_->numel()), 0.0);
  return node_->grad.data();
}

void Tensor::zero_grad() {
  if (node_) node_->grad.release();
}

Tensor Tensor::clone() const {
  if (!node_) return Tensor();
  Tensor t = zeros(node_->shape, false);
  kern::copy(static_cast<std::size_t>(numel()), data(), t.data());
  return t;
}

Tape& Tape::instance() {
  static Tape tape;
  return tape;
}

long long Tape::push(std::shared_ptr<detail::TensorNode> out,
                     std::function<void()> bw) {
  long long id = static_cast<long long>(entries_.size());
  out->tape_id = id;
  entries_.push_back(Entry{std::move(out), std::move(bw)});
  return id;
}

void Tape::clear() { entries_.clear(); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape())
                                        : std::string("undefined")));
  auto& tape = Tape::instance();
  long long start = loss.node_->tape_id;
  if (start < 0) return;  // constant loss: nothing reachable
  Tensor mutable_loss = loss;
  mutable_loss.grad_data()[0] = 1.0;
  for (long long i = start; i >= 0; --i) {
    auto& e = tape.entries_[static_cast<std::size_t>(i)];
    if (e.out->grad.empty()) continue;  // not on a path to the loss
    e.backward();
  }
}

double finite_difference_check(const std::function<Tensor()>& f, Tensor x,
                               double h) {
  if (!x.defined()) throw ContractError("finite_difference_check: x undefined");
  if (h <= 0.0) throw ContractError("finite_difference_check: h must be > 0");
  bool had_grad = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();

  auto& tape = Tape::instance();
  std::size_t tape_before = tape.size();
  Tensor loss = f();
  backward(loss);
  long long n = x.numel();
  std::vector<double> g_ad(static_cast<std::size_t>(n), 0.0);
  if (const double* g = x.grad())
    for (long long i = 0; i < n; ++i) g_ad[static_cast<std::size_t>(i)] = g[i];
  tape.entries_.resize(tape_before);  // discard this check's graph

  double max_rel = 0.0;
  double* p = x.data();
  {
    NoGradGuard ng;
    for (long long i = 0; i < n; ++i) {
      double saved = p[i];
      p[i] = saved + h;
      double fp = f().item();
      p[i] = saved - h;
      double fm = f().item();
      p[i] = saved;
      double g_fd = (fp - fm) / (2.0 * h);
      double g = g_ad[static_cast<std::size_t>(i)];
      double denom = std::max({std::fabs(g), std::fabs(g_fd), 1.0});
      double rel = std::fabs(g - g_fd) / denom;
      if (rel > max_rel) max_rel = rel;
    }
  }
  x.zero_grad();
  x.set_requires_grad(had_grad);
  return max_rel;
}

}  // namespace delta
