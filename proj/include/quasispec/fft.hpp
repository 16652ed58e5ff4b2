#pragma once

// Thin RAII layer over FFTW: 64-byte aligned complex storage and cached
// in-place n-dimensional plans keyed by shape.

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <span>
#include <vector>

#include <fftw3.h>

#include "quasispec/errors.hpp"

namespace quasispec {

using cplx = std::complex<double>;

template <typename T, std::size_t Alignment = 64>
struct AlignedAllocator {
  using value_type = T;

  template <typename U>
  struct rebind {
    using other = AlignedAllocator<U, Alignment>;
  };

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U, Alignment>&) noexcept {}

  T* allocate(std::size_t n) {
    if (n == 0) return nullptr;
    const std::size_t bytes = ((n * sizeof(T) + Alignment - 1) / Alignment) * Alignment;
    void* p = std::aligned_alloc(Alignment, bytes);
    if (p == nullptr) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { std::free(p); }

  template <typename U>
  bool operator==(const AlignedAllocator<U, Alignment>&) const noexcept {
    return true;
  }
};

using ComplexVector = std::vector<cplx, AlignedAllocator<cplx>>;

namespace detail {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::size_t size = 0;
};

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

inline std::shared_ptr<const PlanPair> plan_for(const std::vector<int>& shape) {
  static std::map<std::vector<int>, std::shared_ptr<PlanPair>> cache;
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (auto it = cache.find(shape); it != cache.end()) return it->second;

  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (buf == nullptr) throw std::bad_alloc();
  auto plans = std::make_shared<PlanPair>();
  plans->size = n;
  const int rank = static_cast<int>(shape.size());
  plans->forward = fftw_plan_dft(rank, shape.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  plans->backward = fftw_plan_dft(rank, shape.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_free(buf);
  if (plans->forward == nullptr || plans->backward == nullptr) {
    throw Error("FFTW failed to create a plan");
  }
  cache.emplace(shape, plans);
  return plans;
}

}  // namespace detail

/// In-place unnormalized n-dimensional DFT on a row-major array.
/// forward uses e^{-i k.y}, backward e^{+i k.y}. Execution is thread-safe.
class FftPlan {
 public:
  explicit FftPlan(const std::vector<int>& shape) : plans_(detail::plan_for(shape)) {}

  std::size_t size() const { return plans_->size; }

  void forward(std::span<cplx> data) const { run(plans_->forward, data); }
  void backward(std::span<cplx> data) const { run(plans_->backward, data); }

 private:
  void run(fftw_plan plan, std::span<cplx> data) const {
    if (data.size() != plans_->size) throw error::ShapeMismatch(data.size(), plans_->size);
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    if (fftw_alignment_of(reinterpret_cast<double*>(p)) != 0) {
      // Plans were made on an fftw_malloc buffer; route misaligned input through one.
      ComplexVector tmp(data.begin(), data.end());
      fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(tmp.data()),
                       reinterpret_cast<fftw_complex*>(tmp.data()));
      std::copy(tmp.begin(), tmp.end(), data.begin());
      return;
    }
    fftw_execute_dft(plan, p, p);
  }

  std::shared_ptr<const detail::PlanPair> plans_;
};

}  // namespace quasispec
