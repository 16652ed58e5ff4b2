#pragma once

// Matrix-free discrete Hamiltonian Lambda U + F V F^{-1} U, its diagonal
// least-squares preconditioner, a single-vector preconditioned LOBPCG for the
// smallest eigenpair, and condition-number estimation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "quasispec/core.hpp"
#include "quasispec/errors.hpp"
#include "quasispec/fft.hpp"
#include "quasispec/io.hpp"
#include "quasispec/transform.hpp"

namespace quasispec {

template <typename Op>
concept LinearOperator = requires(const Op& op, std::span<const cplx> in, std::span<cplx> out) {
  { op.size() } -> std::convertible_to<std::size_t>;
  op.apply(in, out);
};

namespace blas {

/// sum conj(a_i) b_i
inline cplx dot(std::span<const cplx> a, std::span<const cplx> b) {
  const auto* ap = reinterpret_cast<const double*>(a.data());
  const auto* bp = reinterpret_cast<const double*>(b.data());
  // four independent partial sums keep the reduction off the add latency chain
  double re[4] = {0.0, 0.0, 0.0, 0.0};
  double im[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t u = 0; u < 4; ++u) {
      const std::size_t j = 2 * (i + u);
      re[u] += ap[j] * bp[j] + ap[j + 1] * bp[j + 1];
      im[u] += ap[j] * bp[j + 1] - ap[j + 1] * bp[j];
    }
  }
  for (; i < n; ++i) {
    re[0] += ap[2 * i] * bp[2 * i] + ap[2 * i + 1] * bp[2 * i + 1];
    im[0] += ap[2 * i] * bp[2 * i + 1] - ap[2 * i + 1] * bp[2 * i];
  }
  return {(re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3])};
}

inline double norm(std::span<const cplx> a) {
  const auto* p = reinterpret_cast<const double*>(a.data());
  double s[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t m = 2 * a.size();
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (std::size_t u = 0; u < 4; ++u) s[u] += p[i + u] * p[i + u];
  }
  for (; i < m; ++i) s[0] += p[i] * p[i];
  return std::sqrt((s[0] + s[1]) + (s[2] + s[3]));
}

// Complex products are spelled out in real arithmetic: the library operator*
// carries NaN/Inf recovery that blocks vectorization in these loops.

/// y += alpha x
inline void axpy(cplx alpha, std::span<const cplx> x, std::span<cplx> y) {
  const double ar = alpha.real();
  const double ai = alpha.imag();
  const auto* xp = reinterpret_cast<const double*>(x.data());
  auto* yp = reinterpret_cast<double*>(y.data());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xr = xp[2 * i];
    const double xi = xp[2 * i + 1];
    yp[2 * i] += ar * xr - ai * xi;
    yp[2 * i + 1] += ar * xi + ai * xr;
  }
}

/// a * b without the library's NaN/Inf recovery path.
inline cplx mul(cplx a, cplx b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

inline void scale(double alpha, std::span<cplx> x) {
  auto* p = reinterpret_cast<double*>(x.data());
  for (std::size_t i = 0; i < 2 * x.size(); ++i) p[i] *= alpha;
}

}  // namespace blas

// ---------------------------------------------------------------------------
// HamiltonianOperator
// ---------------------------------------------------------------------------

/// H~ U = Lambda U + F (V . F^{-1} U) with Lambda = diag(|Pk|^2 / 2).
class HamiltonianOperator {
 public:
  HamiltonianOperator(std::shared_ptr<const WindowIndexSet> set, GridField potential)
      : set_(std::move(set)), potential_(std::move(potential)), plan_(set_->shape()) {
    if (potential_.size() != set_->size()) {
      throw error::ShapeMismatch(potential_.size(), set_->size());
    }
    lambda_.resize(set_->size());
    LatticeIndex k(static_cast<std::size_t>(set_->lifted_dim()));
    for (std::size_t r = 0; r < set_->size(); ++r) {
      set_->index(r, k);
      lambda_[r] = 0.5 * set_->projection().wavevector(k).squaredNorm();
    }
  }

  std::size_t size() const { return lambda_.size(); }
  const WindowIndexSet& set() const { return *set_; }
  const std::shared_ptr<const WindowIndexSet>& set_ptr() const { return set_; }
  const std::vector<double>& lambda() const { return lambda_; }
  const GridField& potential() const { return potential_; }

  bool potential_is_real(double tol = 1e-14) const {
    double vmax = 0.0;
    double imax = 0.0;
    for (const auto& v : potential_.values) {
      vmax = std::max(vmax, std::abs(v));
      imax = std::max(imax, std::abs(v.imag()));
    }
    return imax <= tol * std::max(1.0, vmax);
  }

  /// Safe to call concurrently; concurrent callers beyond the first use a
  /// private buffer.
  void apply(std::span<const cplx> in, std::span<cplx> out) const {
    if (in.size() != size()) throw error::ShapeMismatch(in.size(), size());
    if (out.size() != size()) throw error::ShapeMismatch(out.size(), size());
    std::unique_lock<std::mutex> lock(scratch_->mutex, std::try_to_lock);
    ComplexVector local;
    ComplexVector& tmp = lock.owns_lock() ? scratch_->buffer : local;
    tmp.assign(in.begin(), in.end());
    plan_.backward(tmp);
    const auto* v = reinterpret_cast<const double*>(potential_.values.data());
    auto* t = reinterpret_cast<double*>(tmp.data());
    for (std::size_t i = 0; i < tmp.size(); ++i) {
      const double tr = t[2 * i];
      const double ti = t[2 * i + 1];
      t[2 * i] = v[2 * i] * tr - v[2 * i + 1] * ti;
      t[2 * i + 1] = v[2 * i] * ti + v[2 * i + 1] * tr;
    }
    plan_.forward(tmp);
    const double scale = 1.0 / static_cast<double>(tmp.size());
    const auto* ip = reinterpret_cast<const double*>(in.data());
    auto* op = reinterpret_cast<double*>(out.data());
    for (std::size_t i = 0; i < tmp.size(); ++i) {
      op[2 * i] = lambda_[i] * ip[2 * i] + scale * t[2 * i];
      op[2 * i + 1] = lambda_[i] * ip[2 * i + 1] + scale * t[2 * i + 1];
    }
  }

 private:
  std::shared_ptr<const WindowIndexSet> set_;
  GridField potential_;
  FftPlan plan_;
  std::vector<double> lambda_;
  struct Scratch {
    std::mutex mutex;
    ComplexVector buffer;
  };
  std::shared_ptr<Scratch> scratch_ = std::make_shared<Scratch>();
};

inline SpectralField apply_hamiltonian(const HamiltonianOperator& op, const SpectralField& x) {
  if (x.size() != op.size()) throw error::ShapeMismatch(x.size(), op.size());
  SpectralField out(op.set_ptr());
  op.apply(x.coeffs(), out.coeffs());
  return out;
}

// ---------------------------------------------------------------------------
// Preconditioner
// ---------------------------------------------------------------------------

struct DiagonalPreconditioner {
  std::vector<double> m;

  std::size_t size() const { return m.size(); }
  void apply(std::span<const cplx> in, std::span<cplx> out) const {
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] * in[i];
  }
};

/// M_ii = h_ii / ||H~ e_i||^2, the diagonal minimizer of ||H~ D - I||_F.
///
/// F V F^{-1} is a permuted circulant, so every column has the same squared
/// norm sum_k |V^_k|^2 and diagonal V^_0; hence
/// ||H~ e_i||^2 = Lambda_ii^2 + 2 Lambda_ii V^_0 + sum_k |V^_k|^2.
inline DiagonalPreconditioner build_preconditioner(const HamiltonianOperator& op) {
  if (!op.potential_is_real()) throw Error("preconditioner requires a real potential");
  const SpectralField vhat = forward_dft(op.potential(), op.set_ptr());
  double energy = 0.0;
  for (const auto& v : vhat.coeffs()) energy += std::norm(v);
  const double v0 = vhat[0].real();

  DiagonalPreconditioner pre;
  pre.m.resize(op.size());
  for (std::size_t i = 0; i < op.size(); ++i) {
    const double lam = op.lambda()[i];
    const double diag = lam + v0;
    if (!(diag > 0.0)) throw error::NonPositiveDiagonal(i, diag);
    pre.m[i] = diag / (lam * lam + 2.0 * lam * v0 + energy);
  }
  return pre;
}

// ---------------------------------------------------------------------------
// LOBPCG
// ---------------------------------------------------------------------------

struct EigenResult {
  double energy = 0.0;
  SpectralField coefficients;
  std::size_t iterations = 0;
  std::vector<double> rayleigh_history;
  /// ||H~U - E U|| / ||U|| per iteration.
  std::vector<double> residual_history;
  /// ||U - mu H~U|| with mu = 1/E, the residual of the inverse-Rayleigh form.
  std::vector<double> paper_r_history;
  bool converged = false;
  /// Directions dropped by orthonormalization.
  std::size_t breakdowns = 0;
};

namespace error {

struct NotConverged : public Error {
  NotConverged(std::size_t max_iter, EigenResult best)
      : Error("LOBPCG did not converge within " + std::to_string(max_iter) + " iterations"),
        result(std::move(best)) {}
  EigenResult result;
};

}  // namespace error

struct LobpcgOptions {
  double tol = 1e-10;
  std::size_t max_iter = 20000;
  /// Recompute H x and H p explicitly every this many iterations.
  std::size_t refresh_interval = 25;
  /// Directions whose norm falls below drop_tol times their norm before
  /// projection are discarded.
  double drop_tol = 1e-12;
};

struct RawEigenResult {
  double energy = 0.0;
  ComplexVector vector;
  std::size_t iterations = 0;
  std::vector<double> rayleigh_history;
  std::vector<double> residual_history;
  std::vector<double> paper_r_history;
  bool converged = false;
  std::size_t breakdowns = 0;
};

namespace detail {

/// Orthogonalizes v against the given orthonormal vectors (MGS, repeated once
/// when the first pass cancels most of v)
/// and normalizes it. Hv is updated alongside. Returns false if v collapses.
inline bool orthonormalize(std::span<cplx> v, std::span<cplx> hv,
                           std::span<const std::span<const cplx>> basis,
                           std::span<const std::span<const cplx>> hbasis, double drop_tol) {
  const double before = blas::norm(v);
  if (!(before > 0.0) || !std::isfinite(before)) return false;
  double current = before;
  double after = before;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t b = 0; b < basis.size(); ++b) {
      const cplx c = blas::dot(basis[b], v);
      blas::axpy(-c, basis[b], v);
      blas::axpy(-c, hbasis[b], hv);
    }
    after = blas::norm(v);
    // a second pass is needed only after heavy cancellation
    if (after > 0.5 * current) break;
    current = after;
  }
  if (!(after > drop_tol * before)) return false;
  blas::scale(1.0 / after, v);
  blas::scale(1.0 / after, hv);
  return true;
}

}  // namespace detail

/// Single-vector LOBPCG for the smallest eigenpair of a Hermitian operator.
/// The Rayleigh-Ritz step runs on the orthonormalized span {x, p, w} with
/// w = M r; on the first iteration p is absent. H-images of x and p are
/// carried by linear combination and refreshed periodically.
template <LinearOperator Op>
RawEigenResult lobpcg_raw(const Op& op, std::span<const double> precond,
                          std::span<const cplx> x0, const LobpcgOptions& opt) {
  const std::size_t n = op.size();
  if (x0.size() != n) throw error::ShapeMismatch(x0.size(), n);
  if (!precond.empty() && precond.size() != n) throw error::ShapeMismatch(precond.size(), n);

  RawEigenResult res;
  ComplexVector x(x0.begin(), x0.end());
  const double x0n = blas::norm(x);
  if (!(x0n > 0.0)) throw Error("LOBPCG initial vector is zero");
  blas::scale(1.0 / x0n, x);

  ComplexVector hx(n), p(n), hp(n), w(n), hw(n), r(n);
  op.apply(x, hx);
  bool has_p = false;
  bool fresh = true;
  std::size_t since_refresh = 0;

  auto rayleigh = [&]() {
    const cplx q = blas::dot(x, hx);
    if (std::abs(q.imag()) > 1e-10 * std::max(1.0, std::abs(q.real()))) {
      throw Error("Rayleigh quotient has a large imaginary part; operator is not Hermitian");
    }
    return q.real();
  };

  double theta = rayleigh();
  for (std::size_t it = 0;; ++it) {
    for (std::size_t i = 0; i < n; ++i) r[i] = hx[i] - theta * x[i];
    const double rnorm = blas::norm(r);
    res.iterations = it;

    if (rnorm <= opt.tol && !fresh) {
      // confirm against an explicit product before accepting
      op.apply(x, hx);
      fresh = true;
      since_refresh = 0;
      theta = rayleigh();
      --it;
      continue;
    }
    res.rayleigh_history.push_back(theta);
    res.residual_history.push_back(rnorm);
    res.paper_r_history.push_back(theta != 0.0 ? rnorm / std::abs(theta) : rnorm);
    if (rnorm <= opt.tol) {
      res.converged = true;
      break;
    }
    if (it >= opt.max_iter) break;

    if (precond.empty()) {
      std::copy(r.begin(), r.end(), w.begin());
    } else {
      for (std::size_t i = 0; i < n; ++i) w[i] = precond[i] * r[i];
    }

    std::vector<std::span<const cplx>> basis{x};
    std::vector<std::span<const cplx>> hbasis{hx};
    if (has_p) {
      has_p = detail::orthonormalize(p, hp, basis, hbasis, opt.drop_tol);
      if (!has_p) {
        ++res.breakdowns;
      } else {
        basis.emplace_back(p);
        hbasis.emplace_back(hp);
      }
    }
    op.apply(w, hw);
    const bool has_w = detail::orthonormalize(w, hw, basis, hbasis, opt.drop_tol);
    if (!has_w) {
      ++res.breakdowns;
    } else {
      basis.emplace_back(w);
      hbasis.emplace_back(hw);
    }
    const auto k = static_cast<Eigen::Index>(basis.size());
    if (k == 1) break;  // no search direction left

    Eigen::MatrixXcd g(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = a; b < k; ++b) {
        g(a, b) = blas::dot(basis[static_cast<std::size_t>(a)], hbasis[static_cast<std::size_t>(b)]);
        g(b, a) = std::conj(g(a, b));
      }
      g(a, a) = g(a, a).real();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g);
    const Eigen::VectorXcd y = es.eigenvectors().col(0);

    // p <- component of the new iterate outside span{x}; x <- y0 x + p.
    // basis[1] may be p itself, so each element is read before it is written.
    const cplx y0 = y(0);
    const cplx y1 = y(1);
    const cplx y2 = k > 2 ? y(2) : cplx{};
    auto combine = [&](std::span<cplx> xs, std::span<cplx> ps, std::span<const cplx> b1,
                       std::span<const cplx> b2) {
      for (std::size_t i = 0; i < n; ++i) {
        cplx pv = blas::mul(y1, b1[i]);
        if (k > 2) pv += blas::mul(y2, b2[i]);
        xs[i] = blas::mul(y0, xs[i]) + pv;
        ps[i] = pv;
      }
    };
    combine(x, p, basis[1], k > 2 ? basis[2] : basis[1]);
    combine(hx, hp, hbasis[1], k > 2 ? hbasis[2] : hbasis[1]);
    has_p = true;
    const double xnorm = blas::norm(x);
    blas::scale(1.0 / xnorm, x);
    blas::scale(1.0 / xnorm, hx);
    fresh = false;

    if (++since_refresh >= opt.refresh_interval) {
      op.apply(x, hx);
      op.apply(p, hp);
      since_refresh = 0;
      fresh = true;
    }
    theta = rayleigh();
  }
  res.energy = theta;
  res.vector = std::move(x);
  return res;
}

/// Smallest eigenpair of H~. Throws error::NotConverged (carrying the best
/// iterate) when the residual does not reach tol within max_iter iterations.
inline EigenResult lobpcg_smallest(const HamiltonianOperator& op,
                                   const DiagonalPreconditioner& m, const SpectralField& x0,
                                   double tol = 1e-10, std::size_t max_iter = 20000) {
  LobpcgOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  RawEigenResult raw = lobpcg_raw(op, m.m, x0.coeffs(), opt);
  EigenResult out{raw.energy,
                  SpectralField(op.set_ptr(), std::move(raw.vector)),
                  raw.iterations,
                  std::move(raw.rayleigh_history),
                  std::move(raw.residual_history),
                  std::move(raw.paper_r_history),
                  raw.converged,
                  raw.breakdowns};
  if (!out.converged) throw error::NotConverged(max_iter, std::move(out));
  return out;
}

/// e_1: the unit vector on rank 0, i.e. the k = 0 mode.
inline SpectralField first_basis_vector(std::shared_ptr<const WindowIndexSet> set) {
  SpectralField x(std::move(set));
  x[0] = 1.0;
  return x;
}

/// CSV: iter, rayleigh_quotient, residual_norm, paper_r_norm.
inline void write_trace_csv(std::ostream& os, const EigenResult& r) {
  os << "iter,rayleigh_quotient,residual_norm,paper_r_norm\n";
  for (std::size_t i = 0; i < r.residual_history.size(); ++i) {
    os << i << ',' << format_double(r.rayleigh_history[i]) << ','
       << format_double(r.residual_history[i]) << ',' << format_double(r.paper_r_history[i])
       << '\n';
  }
}

// ---------------------------------------------------------------------------
// Condition numbers
// ---------------------------------------------------------------------------

/// x -> M^{1/2} H M^{1/2} x, Hermitian and similar to M H.
template <LinearOperator Op>
class SymmetricPreconditioned {
 public:
  SymmetricPreconditioned(const Op& op, const DiagonalPreconditioner& m) : op_(op) {
    sqrt_m_.reserve(m.size());
    for (double v : m.m) sqrt_m_.push_back(std::sqrt(v));
  }
  std::size_t size() const { return op_.size(); }
  void apply(std::span<const cplx> in, std::span<cplx> out) const {
    ComplexVector tmp(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) tmp[i] = sqrt_m_[i] * in[i];
    op_.apply(tmp, out);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] *= sqrt_m_[i];
  }

 private:
  const Op& op_;
  std::vector<double> sqrt_m_;
};

/// Dense matrix of a linear operator, assembled column by column.
template <LinearOperator Op>
Eigen::MatrixXcd assemble_dense(const Op& op) {
  const std::size_t n = op.size();
  Eigen::MatrixXcd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  ComplexVector e(n), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), cplx{});
    e[j] = 1.0;
    op.apply(e, col);
    for (std::size_t i = 0; i < n; ++i) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    }
  }
  return a;
}

enum class ConditionMode { dense, iterative };

inline constexpr std::size_t kDenseConditionLimit = 4096;

namespace detail {

struct ExtremalEigenvalues {
  double min = 0.0;
  double max = 0.0;
};

/// Lanczos with full reorthogonalization; stops when both extreme Ritz
/// residual bounds fall below rel_tol * |theta|.
template <LinearOperator Op>
ExtremalEigenvalues lanczos_extremes(const Op& op, double rel_tol, std::size_t max_steps) {
  const std::size_t n = op.size();
  max_steps = std::min(max_steps, n);
  std::mt19937_64 rng(20240521);
  std::normal_distribution<double> normal;
  std::vector<ComplexVector> v;
  ComplexVector q(n);
  for (auto& z : q) z = {normal(rng), normal(rng)};
  blas::scale(1.0 / blas::norm(q), q);
  v.push_back(q);

  std::vector<double> alpha;
  std::vector<double> beta;
  ComplexVector w(n);
  ExtremalEigenvalues out;
  for (std::size_t j = 0; j < max_steps; ++j) {
    op.apply(v[j], w);
    alpha.push_back(blas::dot(v[j], w).real());
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : v) blas::axpy(-blas::dot(b, w), b, w);
    }
    const double bnorm = blas::norm(w);

    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    out.min = es.eigenvalues()(0);
    out.max = es.eigenvalues()(m - 1);
    const double rmin = bnorm * std::abs(es.eigenvectors()(m - 1, 0));
    const double rmax = bnorm * std::abs(es.eigenvectors()(m - 1, m - 1));
    const bool done = rmin <= rel_tol * std::abs(out.min) && rmax <= rel_tol * std::abs(out.max);
    if (done || bnorm <= 1e-14 * std::abs(out.max) || j + 1 == max_steps) break;
    beta.push_back(bnorm);
    blas::scale(1.0 / bnorm, w);
    v.push_back(w);
  }
  return out;
}

}  // namespace detail

/// lambda_max / lambda_min of a Hermitian positive definite operator.
template <LinearOperator Op>
double estimate_condition(const Op& op, ConditionMode mode, double rel_tol = 1e-4,
                          std::size_t max_steps = 600) {
  double lmin = 0.0;
  double lmax = 0.0;
  if (mode == ConditionMode::dense) {
    if (op.size() > kDenseConditionLimit) {
      throw error::ConfigError("dense condition estimate limited to N <= 4096");
    }
    Eigen::MatrixXcd a = assemble_dense(op);
    a = (0.5 * (a + a.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a, Eigen::EigenvaluesOnly);
    lmin = es.eigenvalues()(0);
    lmax = es.eigenvalues()(a.rows() - 1);
  } else {
    const auto ext = detail::lanczos_extremes(op, rel_tol, max_steps);
    lmin = ext.min;
    lmax = ext.max;
  }
  if (!(lmin > 0.0)) throw error::NotPositiveDefinite(lmin);
  return lmax / lmin;
}

}  // namespace quasispec
