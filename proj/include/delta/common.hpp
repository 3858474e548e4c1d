#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace delta {

// Every error carries a machine-readable category; the CLI maps categories
// to exit codes and prints them in a stable format.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& w) : Error("shape", w) {}
};
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& w) : Error("contract", w) {}
};
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& w) : Error("numeric", w) {}
};
class IngestError : public Error {
 public:
  explicit IngestError(const std::string& w) : Error("ingest", w) {}
};
class IoError : public Error {
 public:
  explicit IoError(const std::string& w) : Error("io", w) {}
};
class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& w) : Error("resource", w) {}
};

// Global accounting of tensor-buffer bytes. Allocation happens on the
// graph-building thread only; atomics keep read-only parallel phases safe.
class AllocationCounter {
 public:
  static AllocationCounter& instance();

  void on_alloc(std::size_t bytes);
  void on_free(std::size_t bytes);

  long long live_bytes() const { return live_.load(); }
  long long peak_bytes() const { return peak_.load(); }
  long long total_allocations() const { return total_.load(); }

  // Zeroes all counters. Callers ensure no tracked buffers are live.
  void reset();
  // peak := live, for baseline-delta measurements within a run.
  void reset_peak();

 private:
  std::atomic<long long> live_{0};
  std::atomic<long long> peak_{0};
  std::atomic<long long> total_{0};
};

// Counted storage. All tensor data, gradients and attention scratch go
// through Buffer so peak working-set is observable.
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(std::size_t n, double fill_value = 0.0);
  Buffer(const Buffer& other);
  Buffer& operator=(const Buffer& other);
  Buffer(Buffer&& other) noexcept;
  Buffer& operator=(Buffer&& other) noexcept;
  ~Buffer();

  double* data() { return data_.get(); }
  const double* data() const { return data_.get(); }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  void fill(double v);
  void release();

 private:
  std::unique_ptr<double[]> data_;
  std::size_t size_ = 0;
};

// Deterministic generator: every draw is a pure function of the seed and
// draw index, independent of the standard library's distribution details.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }
  double uniform01();  // [0, 1)
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double sd = 1.0);
  int uniform_int(int n);  // [0, n)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::string shape_str(const std::vector<int>& shape);

std::uint64_t fnv1a(const void* data, std::size_t n,
                    std::uint64_t h = 1469598103934665603ULL);
std::string hex64(std::uint64_t v);

// Round-trippable decimal formatting for doubles ("%.17g").
std::string fmt_double(double v);

}  // namespace delta
