#pragma once

// Sobolev-type (semi)norms over finite coefficient sets. All sums run over
// the explicit support; vector lengths are Euclidean and 0^0 = 1.

#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "quasispec/transform.hpp"

namespace quasispec {

struct NormOrder {
  double alpha = 0.0;  // physical directions
  double beta = 0.0;   // lattice directions
  double mu = 0.0;
  double nu = 0.0;
};

namespace detail {

/// |x|^{2e} with 0^0 = 1.
inline double weight_pow(double len, double e) { return e == 0.0 ? 1.0 : std::pow(len, 2.0 * e); }

template <typename Weight>
double weighted_sum(const SparseSpectrum& s, Weight&& weight) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) acc += weight(s.index(i)) * std::norm(s.values[i]);
  return acc;
}

inline double qp_sum(const SparseSpectrum& s, const Eigen::MatrixXd& p, double alpha) {
  return weighted_sum(s, [&](std::span<const std::int64_t> k) {
    double len2 = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      double q = 0.0;
      for (Eigen::Index j = 0; j < p.cols(); ++j) q += p(i, j) * static_cast<double>(k[j]);
      len2 += q * q;
    }
    return weight_pow(std::sqrt(len2), alpha);
  });
}

inline double periodic_sum(const SparseSpectrum& s, double beta) {
  return weighted_sum(s, [&](std::span<const std::int64_t> k) {
    double len2 = 0.0;
    for (auto v : k) len2 += static_cast<double>(v) * static_cast<double>(v);
    return weight_pow(std::sqrt(len2), beta);
  });
}

/// Returns (||k_I + Q k_II||, ||k_II||).
inline std::pair<double, double> split_lengths(std::span<const std::int64_t> k,
                                               const Eigen::MatrixXd& q) {
  const auto d = q.rows();
  const auto m = q.cols();
  double a2 = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    double v = static_cast<double>(k[i]);
    for (Eigen::Index j = 0; j < m; ++j) v += q(i, j) * static_cast<double>(k[d + j]);
    a2 += v * v;
  }
  double b2 = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) b2 += static_cast<double>(k[d + j] * k[d + j]);
  return {std::sqrt(a2), std::sqrt(b2)};
}

inline double mixed_sum(const SparseSpectrum& s, const Eigen::MatrixXd& q, double alpha,
                        double beta) {
  return weighted_sum(s, [&](std::span<const std::int64_t> k) {
    const auto [a, b] = split_lengths(k, q);
    return weight_pow(a, alpha) + weight_pow(b, beta);
  });
}

}  // namespace detail

/// |u|_alpha = (sum ||Pk||^{2 alpha} |U_k|^2)^{1/2}
inline double qp_seminorm(const SparseSpectrum& s, const Eigen::MatrixXd& p, double alpha) {
  return std::sqrt(detail::qp_sum(s, p, alpha));
}

inline double qp_norm(const SparseSpectrum& s, const Eigen::MatrixXd& p, double alpha) {
  return std::sqrt(detail::periodic_sum(s, 0.0) + detail::qp_sum(s, p, alpha));
}

/// |U|_{H^beta} = (sum ||k||^{2 beta} |U_k|^2)^{1/2}
inline double periodic_seminorm(const SparseSpectrum& s, double beta) {
  return std::sqrt(detail::periodic_sum(s, beta));
}

inline double periodic_norm(const SparseSpectrum& s, double beta) {
  return std::sqrt(detail::periodic_sum(s, 0.0) + detail::periodic_sum(s, beta));
}

/// |u|_{alpha,beta} = (sum (||k_I + Q k_II||^{2 alpha} + ||k_II||^{2 beta}) |U_k|^2)^{1/2}
inline double mixed_seminorm(const SparseSpectrum& s, const Eigen::MatrixXd& q, double alpha,
                             double beta) {
  return std::sqrt(detail::mixed_sum(s, q, alpha, beta));
}

inline double mixed_norm(const SparseSpectrum& s, const Eigen::MatrixXd& q, double alpha,
                         double beta) {
  return std::sqrt(detail::periodic_sum(s, 0.0) + detail::mixed_sum(s, q, alpha, beta));
}

/// Spectral 2-norm of a dense matrix.
inline double operator_norm(const Eigen::MatrixXd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

}  // namespace quasispec
