#pragma once

// Grid sampling, the window-set discrete Fourier transform and its inverse,
// truncation, and pointwise evaluation of quasiperiodic interpolants.
//
// Coefficients are stored at the row-major rank of rho(k), which is exactly
// where a standard FFT over the rectangle K*_{K,L} puts them, so the index
// shift between the window and the rectangle costs nothing at transform time.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "quasispec/core.hpp"
#include "quasispec/errors.hpp"
#include "quasispec/fft.hpp"
#include "quasispec/io.hpp"

namespace quasispec {

/// Finite list of exact coefficients k -> U_k.
struct SparseSpectrum {
  int n = 0;
  std::vector<std::int64_t> keys;  // n entries per coefficient
  std::vector<cplx> values;

  std::size_t size() const { return values.size(); }
  std::span<const std::int64_t> index(std::size_t i) const {
    return {keys.data() + i * static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
  }
  void push(std::span<const std::int64_t> k, cplx v) {
    keys.insert(keys.end(), k.begin(), k.end());
    values.push_back(v);
  }
};

/// Samples of a parent function on the dual grid, row-major.
struct GridField {
  DualGrid grid;
  ComplexVector values;

  explicit GridField(DualGrid g) : grid(std::move(g)), values(grid.size()) {}
  GridField(DualGrid g, ComplexVector v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size()) throw error::ShapeMismatch(values.size(), grid.size());
  }
  std::size_t size() const { return values.size(); }
};

/// Coefficients over a window set; entry r belongs to set().index(r).
class SpectralField {
 public:
  /// Empty field with no set attached.
  SpectralField() = default;
  explicit SpectralField(std::shared_ptr<const WindowIndexSet> set)
      : set_(std::move(set)), coeffs_(set_->size()) {}
  SpectralField(std::shared_ptr<const WindowIndexSet> set, ComplexVector coeffs)
      : set_(std::move(set)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != set_->size()) throw error::ShapeMismatch(coeffs_.size(), set_->size());
  }

  const WindowIndexSet& set() const { return *set_; }
  const std::shared_ptr<const WindowIndexSet>& set_ptr() const { return set_; }
  std::size_t size() const { return coeffs_.size(); }

  std::span<cplx> coeffs() { return coeffs_; }
  std::span<const cplx> coeffs() const { return coeffs_; }
  ComplexVector& storage() { return coeffs_; }
  const ComplexVector& storage() const { return coeffs_; }

  cplx& operator[](std::size_t rank) { return coeffs_[rank]; }
  const cplx& operator[](std::size_t rank) const { return coeffs_[rank]; }

  /// Coefficient at lattice index k, zero outside the window.
  cplx at(std::span<const std::int64_t> k) const {
    const auto r = set_->find(k);
    return r ? coeffs_[*r] : cplx{};
  }

  SparseSpectrum to_sparse() const {
    SparseSpectrum out;
    out.n = set_->lifted_dim();
    out.keys.reserve(size() * static_cast<std::size_t>(out.n));
    out.values.reserve(size());
    LatticeIndex k(static_cast<std::size_t>(out.n));
    for (std::size_t r = 0; r < size(); ++r) {
      set_->index(r, k);
      out.push(k, coeffs_[r]);
    }
    return out;
  }

 private:
  std::shared_ptr<const WindowIndexSet> set_;
  ComplexVector coeffs_;
};

/// values[rank(l)] = parent(y_l).
template <typename Parent>
GridField sample_parent(Parent&& parent, const DualGrid& grid) {
  GridField field(grid);
  std::vector<double> y(static_cast<std::size_t>(grid.lifted_dim()));
  for (std::size_t r = 0; r < grid.size(); ++r) {
    grid.point(r, y);
    const cplx v = parent(std::span<const double>(y));
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw error::NonFinite(r);
    field.values[r] = v;
  }
  return field;
}

/// U~_k = <U, phi_k>_{K,L}: an FFT over the rectangle scaled by
/// 1/(2^n K^d L^{n-d}), relabelled through rho^{-1} by the storage layout.
inline SpectralField forward_dft(const GridField& field,
                                 std::shared_ptr<const WindowIndexSet> set) {
  if (field.size() != set->size()) throw error::ShapeMismatch(field.size(), set->size());
  if (field.grid.shape() != set->shape()) throw error::ShapeMismatch(field.size(), set->size());
  ComplexVector data = field.values;
  FftPlan(set->shape()).forward(data);
  const double scale = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v *= scale;
  return SpectralField(std::move(set), std::move(data));
}

/// Unnormalized synthesis U(y_l) = sum_k U~_k e^{i k.y_l}.
inline GridField inverse_dft(const SpectralField& spec) {
  DualGrid grid(spec.set().extents());
  ComplexVector data = spec.storage();
  FftPlan(spec.set().shape()).backward(data);
  return GridField(std::move(grid), std::move(data));
}

/// u(x) = sum_k U~_k exp(i (Pk).x) by direct summation in rank order.
/// `points` holds d coordinates per point. Coefficients with modulus at or
/// below `cutoff` are skipped (0 keeps everything).
inline std::vector<cplx> evaluate(const SpectralField& spec, std::span<const double> points,
                                  double cutoff = 0.0) {
  const auto& set = spec.set();
  const int d = set.dim();
  const int n = set.lifted_dim();
  const auto& p = set.projection().matrix();
  const std::size_t npts = points.size() / static_cast<std::size_t>(d);

  std::vector<double> wave;
  std::vector<cplx> kept;
  LatticeIndex k(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < spec.size(); ++r) {
    const cplx c = spec[r];
    if (cutoff > 0.0 && std::abs(c) <= cutoff) continue;
    set.index(r, k);
    for (int i = 0; i < d; ++i) {
      double q = 0.0;
      for (int j = 0; j < n; ++j) q += p(i, j) * static_cast<double>(k[j]);
      wave.push_back(q);
    }
    kept.push_back(c);
  }

  std::vector<cplx> out(npts);
  for (std::size_t m = 0; m < npts; ++m) {
    const double* x = points.data() + m * static_cast<std::size_t>(d);
    double re = 0.0;
    double im = 0.0;
    for (std::size_t t = 0; t < kept.size(); ++t) {
      const double* q = wave.data() + t * static_cast<std::size_t>(d);
      double phase = 0.0;
      for (int i = 0; i < d; ++i) phase += q[i] * x[i];
      const double cs = std::cos(phase);
      const double sn = std::sin(phase);
      re += kept[t].real() * cs - kept[t].imag() * sn;
      im += kept[t].real() * sn + kept[t].imag() * cs;
    }
    out[m] = {re, im};
  }
  return out;
}

/// Keeps exactly the coefficients whose index lies in the window.
inline SpectralField truncate(const SparseSpectrum& exact,
                              std::shared_ptr<const WindowIndexSet> set) {
  SpectralField out(std::move(set));
  for (std::size_t i = 0; i < exact.size(); ++i) {
    if (const auto r = out.set().find(exact.index(i))) out[*r] += exact.values[i];
  }
  return out;
}

/// CSV: k_1..k_n, re, im, magnitude.
inline void write_spectral_csv(std::ostream& os, const SpectralField& spec) {
  const int n = spec.set().lifted_dim();
  for (int j = 1; j <= n; ++j) os << "k_" << j << ',';
  os << "re,im,magnitude\n";
  LatticeIndex k(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < spec.size(); ++r) {
    spec.set().index(r, k);
    for (auto v : k) os << v << ',';
    os << format_double(spec[r].real()) << ',' << format_double(spec[r].imag()) << ','
       << format_double(std::abs(spec[r])) << '\n';
  }
}

}  // namespace quasispec
