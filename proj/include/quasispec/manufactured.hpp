#pragma once

// Parents with known finite spectra: exact grid sampling, manufactured
// anisotropic decay, and coefficient-space truncation/interpolation errors.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>

#include "quasispec/core.hpp"
#include "quasispec/fft.hpp"
#include "quasispec/transform.hpp"

namespace quasispec {

/// U(y_l) = sum_k U^_k e^{i k.y_l} on the dual grid. Every k contributes
/// through its residue rho(k), so the sum folds onto the rectangle and one
/// inverse FFT finishes it.
inline GridField sample_sparse_parent(const SparseSpectrum& s, const DualGrid& grid) {
  const auto& ext = grid.extents();
  ComplexVector data(grid.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    data[row_major_rank(rho(s.index(i), ext), grid.shape())] += s.values[i];
  }
  FftPlan(grid.shape()).backward(data);
  return GridField(grid, std::move(data));
}

/// U^_k = (1 + ||k_I + Q k_II||)^{-a} (1 + ||k_II||)^{-b} on every index of `support`.
inline SparseSpectrum decay_spectrum(const WindowIndexSet& support, double a, double b) {
  const auto& q = support.projection().q();
  const int d = support.dim();
  const int n = support.lifted_dim();
  SparseSpectrum s;
  s.n = n;
  LatticeIndex k(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < support.size(); ++r) {
    support.index(r, k);
    double phys = 0.0;
    double latt = 0.0;
    for (int i = 0; i < d; ++i) {
      double v = static_cast<double>(k[i]);
      for (int j = d; j < n; ++j) v += q(i, j - d) * static_cast<double>(k[j]);
      phys += v * v;
    }
    for (int j = d; j < n; ++j) latt += static_cast<double>(k[j] * k[j]);
    s.push(k, std::pow(1.0 + std::sqrt(phys), -a) * std::pow(1.0 + std::sqrt(latt), -b));
  }
  return s;
}

/// ||u - P_{K,L} u|| in the mean-square sense: the l2 norm of the dropped coefficients.
inline double truncation_error(const SparseSpectrum& exact, const WindowIndexSet& set) {
  double acc = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    if (!set.contains(exact.index(i))) acc += std::norm(exact.values[i]);
  }
  return std::sqrt(acc);
}

/// ||u - I_{K,L} u|| in the mean-square sense, by Parseval over the exact
/// support plus the window.
inline double interpolation_error(const SparseSpectrum& exact, const SpectralField& interp) {
  const auto& set = interp.set();
  ComplexVector diff(interp.storage());
  double acc = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    if (const auto r = set.find(exact.index(i))) {
      diff[*r] -= exact.values[i];
    } else {
      acc += std::norm(exact.values[i]);
    }
  }
  for (const auto& v : diff) acc += std::norm(v);
  return std::sqrt(acc);
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  const auto m = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace quasispec
