#pragma once

// Projection-matrix decomposition, irrational-window index sets, the
// index-shift map between the window and the FFT rectangle, and dual grids.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "quasispec/errors.hpp"

namespace quasispec {

using LatticeIndex = std::vector<std::int64_t>;

enum class Method { iwfpm, pm };

inline std::string_view to_string(Method m) { return m == Method::pm ? "pm" : "iwfpm"; }

inline Method method_from_string(std::string_view s) {
  if (s == "pm") return Method::pm;
  if (s == "iwfpm") return Method::iwfpm;
  throw error::ConfigError("unknown method '" + std::string(s) + "' (expected pm or iwfpm)");
}

/// Nonnegative remainder, so floor_mod(-10, 4) == 2.
inline std::int64_t floor_mod(std::int64_t a, std::int64_t m) {
  const std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

inline constexpr std::size_t kDefaultDofCap = std::size_t{1} << 28;

/// DOF cap, overridable through QUASISPEC_DOF_CAP.
inline std::size_t default_dof_cap() {
  if (const char* env = std::getenv("QUASISPEC_DOF_CAP"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return kDefaultDofCap;
}

// ---------------------------------------------------------------------------
// ProjectionMatrix
// ---------------------------------------------------------------------------

/// d x n projection matrix P = (P_I, P_II) together with Q = P_I^{-1} P_II.
class ProjectionMatrix {
 public:
  int dim() const { return static_cast<int>(p_.rows()); }
  int lifted_dim() const { return static_cast<int>(p_.cols()); }
  const Eigen::MatrixXd& matrix() const { return p_; }
  Eigen::MatrixXd leading_block() const { return p_.leftCols(dim()); }
  Eigen::MatrixXd trailing_block() const { return p_.rightCols(lifted_dim() - dim()); }
  const Eigen::MatrixXd& q() const { return q_; }

  /// Physical wavevector Pk.
  Eigen::VectorXd wavevector(std::span<const std::int64_t> k) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
    for (int j = 0; j < lifted_dim(); ++j) out += p_.col(j) * static_cast<double>(k[j]);
    return out;
  }

  friend ProjectionMatrix split_projection(const Eigen::MatrixXd& p);

 private:
  ProjectionMatrix(Eigen::MatrixXd p, Eigen::MatrixXd q) : p_(std::move(p)), q_(std::move(q)) {}

  Eigen::MatrixXd p_;
  Eigen::MatrixXd q_;
};

/// Splits P into (P_I, P_II) and caches Q = P_I^{-1} P_II. Columns are never
/// permuted: the caller must supply P with an invertible leading block.
inline ProjectionMatrix split_projection(const Eigen::MatrixXd& p) {
  const auto d = p.rows();
  const auto n = p.cols();
  if (d < 1 || n < d) {
    throw error::ConfigError("projection matrix must be d x n with 1 <= d <= n, got " +
                             std::to_string(d) + " x " + std::to_string(n));
  }
  if (!p.allFinite()) throw error::ConfigError("projection matrix has non-finite entries");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(p);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > 1e-10 * smax) ++rank;
  }
  if (smax == 0.0) rank = 0;
  if (rank < d) throw error::RankDeficient(rank, static_cast<int>(d));

  const Eigen::MatrixXd lead = p.leftCols(d);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(lead);
  const double det = lu.determinant();
  const double lead_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(lead).singularValues()(0);
  if (!(std::abs(det) > 1e-12 * std::pow(lead_norm, static_cast<double>(d)))) {
    throw error::SingularLeadingBlock(det);
  }

  Eigen::MatrixXd q = lu.solve(p.rightCols(n - d));
  Eigen::MatrixXd recon(d, n);
  recon << Eigen::MatrixXd::Identity(d, d), q;
  if ((lead * recon - p).norm() > 1e-12 * p.norm()) throw error::SingularLeadingBlock(det);
  return ProjectionMatrix(p, std::move(q));
}

// ---------------------------------------------------------------------------
// Window extents and the index-shift map
// ---------------------------------------------------------------------------

/// Per-axis half-widths: K_1..K_d along the rational directions and
/// L_1..L_{n-d} along the lattice directions.
struct WindowExtents {
  std::vector<std::int64_t> K;
  std::vector<std::int64_t> L;

  static WindowExtents broadcast(std::int64_t k, std::int64_t l, int d, int n) {
    return {std::vector<std::int64_t>(static_cast<std::size_t>(d), k),
            std::vector<std::int64_t>(static_cast<std::size_t>(n - d), l)};
  }

  int dim() const { return static_cast<int>(K.size()); }
  int lifted_dim() const { return static_cast<int>(K.size() + L.size()); }
  std::int64_t half(int j) const {
    return j < dim() ? K[static_cast<std::size_t>(j)] : L[static_cast<std::size_t>(j - dim())];
  }

  std::vector<int> shape() const {
    std::vector<int> s;
    for (int j = 0; j < lifted_dim(); ++j) s.push_back(static_cast<int>(2 * half(j)));
    return s;
  }

  /// (2K)^d (2L)^{n-d} in floating point, for overflow checks.
  long double dof() const {
    long double v = 1.0L;
    for (int j = 0; j < lifted_dim(); ++j) v *= 2.0L * static_cast<long double>(half(j));
    return v;
  }

  void validate() const {
    if (K.empty()) throw error::ConfigError("window needs at least one K");
    for (int j = 0; j < lifted_dim(); ++j) {
      if (half(j) < 1) throw error::ConfigError("K and L must be positive integers");
    }
  }

  bool operator==(const WindowExtents&) const = default;
};

inline std::size_t row_major_rank(std::span<const std::int64_t> idx, std::span<const int> shape) {
  std::size_t r = 0;
  for (std::size_t j = 0; j < shape.size(); ++j) r = r * static_cast<std::size_t>(shape[j]) +
                                                     static_cast<std::size_t>(idx[j]);
  return r;
}

inline void row_major_unrank(std::size_t rank, std::span<const int> shape,
                             std::span<std::int64_t> out) {
  for (std::size_t j = shape.size(); j-- > 0;) {
    const auto s = static_cast<std::size_t>(shape[j]);
    out[j] = static_cast<std::int64_t>(rank % s);
    rank /= s;
  }
}

/// k*_j = k_j mod 2K (j <= d), k_j mod 2L (j > d).
inline LatticeIndex rho(std::span<const std::int64_t> k, const WindowExtents& ext) {
  LatticeIndex out(k.size());
  for (int j = 0; j < ext.lifted_dim(); ++j) out[j] = floor_mod(k[j], 2 * ext.half(j));
  return out;
}

/// Inverse of the index-shift map restricted to the window defined by window_q:
/// recover k_II, then shift each k*_j by the unique multiple of 2K that lands in
/// [-K - (Q k_II)_j, K - (Q k_II)_j).
inline LatticeIndex rho_inverse(std::span<const std::int64_t> kstar,
                                const Eigen::MatrixXd& window_q, const WindowExtents& ext) {
  const int d = ext.dim();
  const int n = ext.lifted_dim();
  if (static_cast<int>(kstar.size()) != n) throw error::ShapeMismatch(kstar.size(), n);
  for (int j = 0; j < n; ++j) {
    if (kstar[j] < 0 || kstar[j] >= 2 * ext.half(j)) {
      throw error::OutOfRange("k*_" + std::to_string(j + 1) + " = " + std::to_string(kstar[j]) +
                              " outside [0, " + std::to_string(2 * ext.half(j)) + ")");
    }
  }
  LatticeIndex k(static_cast<std::size_t>(n));
  for (int j = d; j < n; ++j) {
    const auto l = ext.half(j);
    k[j] = kstar[j] < l ? kstar[j] : kstar[j] - 2 * l;
  }
  for (int j = 0; j < d; ++j) {
    double shift = 0.0;
    for (int m = d; m < n; ++m) shift += window_q(j, m - d) * static_cast<double>(k[m]);
    const auto kk = static_cast<double>(ext.half(j));
    const double r = std::ceil((-kk - shift) / (2.0 * kk)) * 2.0 * kk;
    const auto base = kstar[j] + static_cast<std::int64_t>(r);
    k[j] = (static_cast<double>(base) + shift < kk) ? base : base - 2 * ext.half(j);
  }
  return k;
}

// ---------------------------------------------------------------------------
// WindowIndexSet
// ---------------------------------------------------------------------------

/// The lattice set K_{K,L} = W_{K,L} ∩ Z^n, stored in the row-major order of
/// its shifted rectangle K*_{K,L}: the entry at rank r is rho^{-1}(unrank(r)).
///
/// Only the lower bounds ceil(-K_j - (Q k_II)_j) are stored, one row per k_II,
/// so lookups in either direction are O(n).
class WindowIndexSet {
 public:
  WindowIndexSet(std::shared_ptr<const ProjectionMatrix> projection, WindowExtents extents,
                 Method method, std::size_t dof_cap = default_dof_cap())
      : projection_(std::move(projection)), extents_(std::move(extents)), method_(method) {
    if (!projection_) throw error::ConfigError("window set needs a projection matrix");
    extents_.validate();
    const int d = projection_->dim();
    const int n = projection_->lifted_dim();
    if (extents_.dim() != d || extents_.lifted_dim() != n) {
      throw error::ConfigError("window extents do not match projection dimensions");
    }
    const long double dof = extents_.dof();
    if (dof > static_cast<long double>(dof_cap)) {
      throw error::OverflowRisk(static_cast<double>(dof), dof_cap);
    }
    size_ = static_cast<std::size_t>(dof);
    shape_ = extents_.shape();
    window_q_ = method_ == Method::pm ? Eigen::MatrixXd::Zero(d, n - d) : projection_->q();

    const std::span<const int> shape_ii(shape_.data() + d, static_cast<std::size_t>(n - d));
    size_ii_ = 1;
    for (int s : shape_ii) size_ii_ *= static_cast<std::size_t>(s);
    lower_.resize(size_ii_ * static_cast<std::size_t>(d));

    std::vector<std::int64_t> kstar_ii(static_cast<std::size_t>(n - d));
    for (std::size_t r = 0; r < size_ii_; ++r) {
      row_major_unrank(r, shape_ii, kstar_ii);
      for (int j = 0; j < d; ++j) {
        double shift = 0.0;
        for (int m = 0; m < n - d; ++m) {
          const auto l = extents_.L[static_cast<std::size_t>(m)];
          const auto k_m = kstar_ii[m] < l ? kstar_ii[m] : kstar_ii[m] - 2 * l;
          shift += window_q_(j, m) * static_cast<double>(k_m);
        }
        const double bound = -static_cast<double>(extents_.K[static_cast<std::size_t>(j)]) - shift;
        const double frac = std::abs(bound - std::round(bound));
        if (frac > 0.0 && frac <= 1e-12) ++boundary_ties_;
        lower_[r * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] =
            static_cast<std::int64_t>(std::ceil(bound));
      }
    }
  }

  const ProjectionMatrix& projection() const { return *projection_; }
  const std::shared_ptr<const ProjectionMatrix>& projection_ptr() const { return projection_; }
  Method method() const { return method_; }
  const Eigen::MatrixXd& window_q() const { return window_q_; }
  const WindowExtents& extents() const { return extents_; }
  int dim() const { return projection_->dim(); }
  int lifted_dim() const { return projection_->lifted_dim(); }
  std::size_t size() const { return size_; }
  const std::vector<int>& shape() const { return shape_; }

  /// Number of window boundaries that landed within 1e-12 of an integer
  /// without being one. Nonzero means membership at those edges is decided
  /// by round-off.
  std::size_t boundary_ties() const { return boundary_ties_; }

  void index(std::size_t rank, std::span<std::int64_t> out) const {
    const int d = dim();
    const int n = lifted_dim();
    row_major_unrank(rank, shape_, out);
    const std::size_t r_ii = rank % size_ii_;
    for (int j = d; j < n; ++j) {
      const auto l = extents_.half(j);
      if (out[j] >= l) out[j] -= 2 * l;
    }
    for (int j = 0; j < d; ++j) {
      const auto lo = lower_[r_ii * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
      out[j] = lo + floor_mod(out[j] - lo, 2 * extents_.half(j));
    }
  }

  LatticeIndex index(std::size_t rank) const {
    LatticeIndex k(static_cast<std::size_t>(lifted_dim()));
    index(rank, k);
    return k;
  }

  /// Rank of k in the set, or nullopt when k lies outside the window.
  std::optional<std::size_t> find(std::span<const std::int64_t> k) const {
    const int d = dim();
    const int n = lifted_dim();
    if (static_cast<int>(k.size()) != n) return std::nullopt;
    for (int j = d; j < n; ++j) {
      const auto l = extents_.half(j);
      if (k[j] < -l || k[j] >= l) return std::nullopt;
    }
    const LatticeIndex kstar = rho(k, extents_);
    const std::size_t rank = row_major_rank(kstar, shape_);
    const std::size_t r_ii = rank % size_ii_;
    for (int j = 0; j < d; ++j) {
      const auto lo = lower_[r_ii * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
      if (k[j] < lo || k[j] >= lo + 2 * extents_.half(j)) return std::nullopt;
    }
    return rank;
  }

  bool contains(std::span<const std::int64_t> k) const { return find(k).has_value(); }

  std::vector<LatticeIndex> indices() const {
    std::vector<LatticeIndex> out;
    out.reserve(size_);
    for (std::size_t r = 0; r < size_; ++r) out.push_back(index(r));
    return out;
  }

 private:
  std::shared_ptr<const ProjectionMatrix> projection_;
  WindowExtents extents_;
  Method method_;
  Eigen::MatrixXd window_q_;
  std::vector<int> shape_;
  std::size_t size_ = 0;
  std::size_t size_ii_ = 1;
  std::vector<std::int64_t> lower_;
  std::size_t boundary_ties_ = 0;
};

inline std::shared_ptr<const WindowIndexSet> build_window_set(
    std::shared_ptr<const ProjectionMatrix> projection, WindowExtents extents, Method method,
    std::size_t dof_cap = default_dof_cap()) {
  return std::make_shared<const WindowIndexSet>(std::move(projection), std::move(extents), method,
                                                dof_cap);
}

inline std::shared_ptr<const WindowIndexSet> build_window_set(
    std::shared_ptr<const ProjectionMatrix> projection, std::int64_t k, std::int64_t l,
    Method method, std::size_t dof_cap = default_dof_cap()) {
  const int d = projection->dim();
  const int n = projection->lifted_dim();
  return build_window_set(std::move(projection), WindowExtents::broadcast(k, l, d, n), method,
                          dof_cap);
}

// ---------------------------------------------------------------------------
// DualGrid
// ---------------------------------------------------------------------------

/// Grid points y_l = (pi l_I / K, pi l_II / L) over the rectangle K*_{K,L}.
/// Points are generated on demand.
class DualGrid {
 public:
  explicit DualGrid(WindowExtents extents, std::size_t dof_cap = default_dof_cap())
      : extents_(std::move(extents)) {
    extents_.validate();
    if (extents_.lifted_dim() > 16) throw error::ConfigError("lifted dimension above 16");
    const long double dof = extents_.dof();
    if (dof > static_cast<long double>(dof_cap)) {
      throw error::OverflowRisk(static_cast<double>(dof), dof_cap);
    }
    size_ = static_cast<std::size_t>(dof);
    shape_ = extents_.shape();
  }

  const WindowExtents& extents() const { return extents_; }
  int lifted_dim() const { return extents_.lifted_dim(); }
  std::size_t size() const { return size_; }
  const std::vector<int>& shape() const { return shape_; }

  void point(std::size_t rank, std::span<double> out) const {
    std::int64_t ell[16];
    const std::span<std::int64_t> ls(ell, shape_.size());
    row_major_unrank(rank, shape_, ls);
    for (int j = 0; j < lifted_dim(); ++j) {
      out[j] = std::numbers::pi * static_cast<double>(ls[j]) / static_cast<double>(extents_.half(j));
    }
  }

  std::vector<double> point(std::size_t rank) const {
    std::vector<double> y(static_cast<std::size_t>(lifted_dim()));
    point(rank, y);
    return y;
  }

  std::vector<std::vector<double>> points() const {
    std::vector<std::vector<double>> out;
    out.reserve(size_);
    for (std::size_t r = 0; r < size_; ++r) out.push_back(point(r));
    return out;
  }

 private:
  WindowExtents extents_;
  std::vector<int> shape_;
  std::size_t size_ = 0;
};

inline DualGrid build_dual_grid(std::int64_t k, std::int64_t l, int n, int d,
                                std::size_t dof_cap = default_dof_cap()) {
  return DualGrid(WindowExtents::broadcast(k, l, d, n), dof_cap);
}

/// CSV dump of an index set: k_1..k_n, kstar_1..kstar_n, rank.
inline void write_index_set_csv(std::ostream& os, const WindowIndexSet& set) {
  const int n = set.lifted_dim();
  for (int j = 1; j <= n; ++j) os << "k_" << j << ',';
  for (int j = 1; j <= n; ++j) os << "kstar_" << j << ',';
  os << "rank\n";
  LatticeIndex k(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < set.size(); ++r) {
    set.index(r, k);
    for (auto v : k) os << v << ',';
    for (auto v : rho(k, set.extents())) os << v << ',';
    os << r << '\n';
  }
}

}  // namespace quasispec
