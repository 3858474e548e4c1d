#include "delta/common.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace delta {

AllocationCounter& AllocationCounter::instance() {
  static AllocationCounter counter;
  return counter;
}

void AllocationCounter::on_alloc(std::size_t bytes) {
  long long live = live_.fetch_add(static_cast<long long>(bytes)) +
                   static_cast<long long>(bytes);
  long long peak = peak_.load();
  while (live > peak && !peak_.compare_exchange_weak(peak, live)) {
  }
  total_.fetch_add(1);
}

void AllocationCounter::on_free(std::size_t bytes) {
  live_.fetch_sub(static_cast<long long>(bytes));
}

void AllocationCounter::reset() {
  live_.store(0);
  peak_.store(0);
  total_.store(0);
}

void AllocationCounter::reset_peak() { peak_.store(live_.load()); }

Buffer::Buffer(std::size_t n, double fill_value) : size_(n) {
  if (n == 0) return;
  data_ = std::make_unique<double[]>(n);
  AllocationCounter::instance().on_alloc(n * sizeof(double));
  fill(fill_value);
}

Buffer::Buffer(const Buffer& other) : size_(other.size_) {
  if (size_ == 0) return;
  data_ = std::make_unique<double[]>(size_);
  AllocationCounter::instance().on_alloc(size_ * sizeof(double));
  for (std::size_t i = 0; i < size_; ++i) data_[i] = other.data_[i];
}

Buffer& Buffer::operator=(const Buffer& other) {
  if (this == &other) return *this;
  Buffer tmp(other);
  *this = std::move(tmp);
  return *this;
}

Buffer::Buffer(Buffer&& other) noexcept
    : data_(std::move(other.data_)), size_(other.size_) {
  other.size_ = 0;
}

Buffer& Buffer::operator=(Buffer&& other) noexcept {
  if (this == &other) return *this;
  release();
  data_ = std::move(other.data_);
  size_ = other.size_;
  other.size_ = 0;
  return *this;
}

Buffer::~Buffer() { release(); }

void Buffer::fill(double v) {
  for (std::size_t i = 0; i < size_; ++i) data_[i] = v;
}

void Buffer::release() {
  if (size_ > 0) {
    AllocationCounter::instance().on_free(size_ * sizeof(double));
    data_.reset();
    size_ = 0;
  }
}

double Rng::uniform01() {
  // 53 mantissa bits, value in [0, 1)
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + uniform01() * (hi - lo);
}

double Rng::normal(double mean, double sd) {
  if (have_spare_) {
    have_spare_ = false;
    return mean + sd * spare_;
  }
  // Box-Muller; u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return mean + sd * r * std::cos(theta);
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw ContractError("uniform_int needs n > 0");
  return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace delta
