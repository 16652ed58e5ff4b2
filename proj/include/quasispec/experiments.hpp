#pragma once

// Built-in potentials, physical-space density sampling, error metrics,
// reference solutions and parameter studies.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "quasispec/core.hpp"
#include "quasispec/errors.hpp"
#include "quasispec/io.hpp"
#include "quasispec/solver.hpp"
#include "quasispec/transform.hpp"

namespace quasispec {

inline const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

enum class PotentialKind { example1, example2, example3, constant, custom };

inline std::string_view to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::example1: return "example1";
    case PotentialKind::example2: return "example2";
    case PotentialKind::example3: return "example3";
    case PotentialKind::constant: return "constant";
    case PotentialKind::custom: return "custom";
  }
  return "custom";
}

inline PotentialKind potential_kind_from_string(std::string_view s) {
  for (auto k : {PotentialKind::example1, PotentialKind::example2, PotentialKind::example3,
                 PotentialKind::constant, PotentialKind::custom}) {
    if (s == to_string(k)) return k;
  }
  throw error::ConfigError("unknown potential '" + std::string(s) + "'");
}

/// amplitude * cos(k . y)
struct CosineTerm {
  double amplitude = 0.0;
  std::vector<std::int64_t> k;
  bool operator==(const CosineTerm&) const = default;
};

/// Parent potential offset + sum of cosine terms, with its projection matrix.
struct PotentialSpec {
  PotentialKind kind = PotentialKind::example1;
  double v0 = 2.5;
  double beta = 0.8 * std::numbers::pi;
  double theta = 0.2 * std::numbers::pi;
  double c = 0.0;
  // custom only
  double offset = 0.0;
  std::vector<CosineTerm> terms;
  std::vector<std::vector<double>> projection;

  static PotentialSpec example1(double v0) {
    PotentialSpec s;
    s.kind = PotentialKind::example1;
    s.v0 = v0;
    return s;
  }
  static PotentialSpec example2(double beta, double theta) {
    PotentialSpec s;
    s.kind = PotentialKind::example2;
    s.beta = beta;
    s.theta = theta;
    return s;
  }
  static PotentialSpec example3(double beta, double theta = 0.2 * std::numbers::pi) {
    PotentialSpec s;
    s.kind = PotentialKind::example3;
    s.beta = beta;
    s.theta = theta;
    return s;
  }
  static PotentialSpec constant(double c) {
    PotentialSpec s;
    s.kind = PotentialKind::constant;
    s.c = c;
    return s;
  }
  static PotentialSpec custom(double offset, std::vector<CosineTerm> terms,
                              std::vector<std::vector<double>> projection) {
    PotentialSpec s;
    s.kind = PotentialKind::custom;
    s.offset = offset;
    s.terms = std::move(terms);
    s.projection = std::move(projection);
    return s;
  }

  Eigen::MatrixXd projection_matrix() const {
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    switch (kind) {
      case PotentialKind::example1:
      case PotentialKind::constant: {
        Eigen::MatrixXd p(1, 2);
        p << 2.0 * std::numbers::pi, 2.0 * std::numbers::pi * kGolden;
        return p;
      }
      case PotentialKind::example2: {
        Eigen::MatrixXd p(2, 3);
        p << 1, 0, ct, 0, 1, st;
        return beta * p;
      }
      case PotentialKind::example3: {
        Eigen::MatrixXd p(3, 6);
        p << 1, 0, 0, ct, -st, 0,  //
            0, 1, 0, st, ct, 0,    //
            0, 0, 1, 0, 0, kGolden;
        return beta * p;
      }
      case PotentialKind::custom: {
        if (projection.empty()) throw error::ConfigError("custom potential needs a projection");
        const auto rows = static_cast<Eigen::Index>(projection.size());
        const auto cols = static_cast<Eigen::Index>(projection.front().size());
        Eigen::MatrixXd p(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
          if (static_cast<Eigen::Index>(projection[static_cast<std::size_t>(i)].size()) != cols) {
            throw error::ConfigError("ragged projection matrix");
          }
          for (Eigen::Index j = 0; j < cols; ++j) {
            p(i, j) = projection[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          }
        }
        return p;
      }
    }
    throw error::ConfigError("unknown potential kind");
  }

  int lifted_dim() const { return static_cast<int>(projection_matrix().cols()); }
  int dim() const { return static_cast<int>(projection_matrix().rows()); }

  /// Constant part and cosine terms of the parent function.
  std::pair<double, std::vector<CosineTerm>> parent_terms() const {
    auto unit = [](int n, int j) {
      std::vector<std::int64_t> k(static_cast<std::size_t>(n), 0);
      k[static_cast<std::size_t>(j)] = 1;
      return k;
    };
    std::vector<CosineTerm> t;
    switch (kind) {
      case PotentialKind::example1:
        t = {{-v0, unit(2, 0)}, {-v0, unit(2, 1)}};
        return {2.0 * v0, t};
      case PotentialKind::example2:
        t = {{-1.0, unit(3, 0)}, {-2.0, unit(3, 1)}, {-1.0, unit(3, 2)}};
        return {4.0, t};
      case PotentialKind::example3:
        for (int j = 0; j < 6; ++j) t.push_back({-1.0, unit(6, j)});
        return {6.0, t};
      case PotentialKind::constant: return {c, t};
      case PotentialKind::custom: {
        const int n = lifted_dim();
        for (const auto& term : terms) {
          if (static_cast<int>(term.k.size()) != n) {
            throw error::ConfigError("cosine term wavevector length does not match projection");
          }
        }
        return {offset, terms};
      }
    }
    return {0.0, t};
  }

  /// V(y) on the n-torus.
  std::function<cplx(std::span<const double>)> parent() const {
    auto [off, t] = parent_terms();
    return [off, t](std::span<const double> y) -> cplx {
      double v = off;
      for (const auto& term : t) {
        double phase = 0.0;
        for (std::size_t j = 0; j < term.k.size(); ++j) phase += static_cast<double>(term.k[j]) * y[j];
        v += term.amplitude * std::cos(phase);
      }
      return v;
    };
  }

  /// Exact Fourier coefficients of the parent.
  SparseSpectrum spectrum() const {
    auto [off, t] = parent_terms();
    SparseSpectrum s;
    s.n = lifted_dim();
    std::vector<std::int64_t> zero(static_cast<std::size_t>(s.n), 0);
    s.push(zero, off);
    for (const auto& term : t) {
      std::vector<std::int64_t> neg(term.k.size());
      for (std::size_t j = 0; j < neg.size(); ++j) neg[j] = -term.k[j];
      s.push(term.k, 0.5 * term.amplitude);
      s.push(neg, 0.5 * term.amplitude);
    }
    return s;
  }

  bool operator==(const PotentialSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const CosineTerm& t) {
  j = nlohmann::json{{"amplitude", t.amplitude}, {"k", t.k}};
}
inline void from_json(const nlohmann::json& j, CosineTerm& t) {
  j.at("amplitude").get_to(t.amplitude);
  j.at("k").get_to(t.k);
}

inline void to_json(nlohmann::json& j, const PotentialSpec& s) {
  j = nlohmann::json{{"kind", std::string(to_string(s.kind))}};
  switch (s.kind) {
    case PotentialKind::example1: j["v0"] = s.v0; break;
    case PotentialKind::example2:
    case PotentialKind::example3:
      j["beta"] = s.beta;
      j["theta"] = s.theta;
      break;
    case PotentialKind::constant: j["c"] = s.c; break;
    case PotentialKind::custom:
      j["offset"] = s.offset;
      j["terms"] = s.terms;
      j["projection"] = s.projection;
      break;
  }
}

inline void from_json(const nlohmann::json& j, PotentialSpec& s) {
  s = PotentialSpec{};
  s.kind = potential_kind_from_string(j.at("kind").get<std::string>());
  if (s.kind == PotentialKind::example3) s.beta = std::numbers::pi;
  if (j.contains("v0")) j.at("v0").get_to(s.v0);
  if (j.contains("beta")) j.at("beta").get_to(s.beta);
  if (j.contains("theta")) j.at("theta").get_to(s.theta);
  if (j.contains("c")) j.at("c").get_to(s.c);
  if (j.contains("offset")) j.at("offset").get_to(s.offset);
  if (j.contains("terms")) j.at("terms").get_to(s.terms);
  if (j.contains("projection")) j.at("projection").get_to(s.projection);
}

// ---------------------------------------------------------------------------
// Discretization and solve
// ---------------------------------------------------------------------------

struct SolverSettings {
  double tol = 1e-10;
  std::size_t max_iter = 20000;
  std::size_t dof_cap = default_dof_cap();
};

/// K and L per axis; a single entry broadcasts.
struct Resolution {
  Method method = Method::iwfpm;
  std::vector<std::int64_t> K{1};
  std::vector<std::int64_t> L{1};

  WindowExtents extents(int d, int n) const {
    auto expand = [](const std::vector<std::int64_t>& v, int m, const char* name) {
      if (v.size() == 1) return std::vector<std::int64_t>(static_cast<std::size_t>(m), v[0]);
      if (static_cast<int>(v.size()) != m) {
        throw error::ConfigError(std::string(name) + " has " + std::to_string(v.size()) +
                                 " entries, expected 1 or " + std::to_string(m));
      }
      return v;
    };
    WindowExtents e{expand(K, d, "K"), expand(L, n - d, "L")};
    e.validate();
    return e;
  }
  bool operator==(const Resolution&) const = default;
};

struct Discretization {
  std::shared_ptr<const WindowIndexSet> set;
  HamiltonianOperator op;
  DiagonalPreconditioner pre;
};

inline Discretization discretize(const PotentialSpec& potential, const Resolution& res,
                                 std::size_t dof_cap = default_dof_cap()) {
  auto proj = std::make_shared<const ProjectionMatrix>(split_projection(potential.projection_matrix()));
  const auto ext = res.extents(proj->dim(), proj->lifted_dim());
  auto set = build_window_set(proj, ext, res.method, dof_cap);
  GridField v = sample_parent(potential.parent(), DualGrid(ext, dof_cap));
  HamiltonianOperator op(set, std::move(v));
  DiagonalPreconditioner pre = build_preconditioner(op);
  return {std::move(set), std::move(op), std::move(pre)};
}

struct SolveRecord {
  EigenResult result;
  double seconds = 0.0;
};

/// Discretize and run LOBPCG from e_1. Non-convergence is reported through
/// result.converged rather than thrown.
inline SolveRecord solve_qse(const PotentialSpec& potential, const Resolution& res,
                             const SolverSettings& settings = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  Discretization disc = discretize(potential, res, settings.dof_cap);
  SolveRecord rec;
  try {
    rec.result = lobpcg_smallest(disc.op, disc.pre, first_basis_vector(disc.set), settings.tol,
                                 settings.max_iter);
  } catch (error::NotConverged& e) {
    rec.result = std::move(e.result);
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// ---------------------------------------------------------------------------
// Physical-space sampling
// ---------------------------------------------------------------------------

/// Uniform grid on [-5a, 5a]^d with a = 10^(3-d), spacing h * stride.
struct EvalGrid {
  int d = 1;
  double a = 100.0;
  double h = 0.1;
  int stride = 1;

  static EvalGrid standard(int d, int stride = 0) {
    if (d < 1) throw error::ConfigError("evaluation grid dimension must be positive");
    EvalGrid g;
    g.d = d;
    g.a = std::pow(10.0, 3 - d);
    g.stride = stride > 0 ? stride : (d == 1 ? 1 : 5);
    return g;
  }

  std::size_t per_axis() const {
    const auto cells = static_cast<std::int64_t>(std::llround(10.0 * a / h));
    return static_cast<std::size_t>(cells / stride + 1);
  }
  std::size_t size() const {
    std::size_t s = 1;
    for (int i = 0; i < d; ++i) s *= per_axis();
    return s;
  }
  /// d coordinates per point, row-major over the axes.
  std::vector<double> points() const {
    const std::size_t m = per_axis();
    const double step = h * stride;
    std::vector<double> out;
    out.reserve(size() * static_cast<std::size_t>(d));
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t p = 0; p < size(); ++p) {
      std::size_t r = p;
      for (int i = d; i-- > 0;) {
        idx[static_cast<std::size_t>(i)] = r % m;
        r /= m;
      }
      for (int i = 0; i < d; ++i) {
        out.push_back(-5.0 * a + step * static_cast<double>(idx[static_cast<std::size_t>(i)]));
      }
    }
    return out;
  }
};

struct DensitySample {
  std::vector<cplx> wavefunction;  // phase-fixed, max modulus 1
  std::vector<double> density;
};

/// Coefficients below this fraction of the largest are skipped when sampling.
inline constexpr double kSampleCutoff = 1e-15;

/// u_0 on the grid: rotated so the largest coefficient is real positive, then
/// divided by its maximum modulus; rho = |u_0|^2.
inline DensitySample sample_density(const SpectralField& coeffs, const EvalGrid& grid,
                                    double relative_cutoff = kSampleCutoff) {
  std::size_t imax = 0;
  for (std::size_t r = 1; r < coeffs.size(); ++r) {
    if (std::abs(coeffs[r]) > std::abs(coeffs[imax])) imax = r;
  }
  const double cmax = std::abs(coeffs[imax]);
  const cplx phase = cmax > 0.0 ? std::conj(coeffs[imax]) / cmax : cplx{1.0};

  DensitySample out;
  out.wavefunction = evaluate(coeffs, grid.points(), relative_cutoff * cmax);
  double umax = 0.0;
  for (const auto& u : out.wavefunction) umax = std::max(umax, std::abs(u));
  const cplx scale = umax > 0.0 ? phase / umax : phase;
  out.density.reserve(out.wavefunction.size());
  for (auto& u : out.wavefunction) {
    u *= scale;
    out.density.push_back(std::norm(u));
  }
  return out;
}

/// N sum rho^2 / (sum rho)^2: 1 for a flat density, N for a single spike.
inline double inverse_participation_ratio(std::span<const double> rho) {
  double s1 = 0.0;
  double s2 = 0.0;
  for (double r : rho) {
    s1 += r;
    s2 += r * r;
  }
  return static_cast<double>(rho.size()) * s2 / (s1 * s1);
}

/// (sum rho)^2 / (N sum rho^2), the fraction of the grid effectively occupied.
inline double participation_fraction(std::span<const double> rho) {
  return 1.0 / inverse_participation_ratio(rho);
}

/// Share of sum rho carried by the largest `fraction` of grid points.
inline double top_mass_fraction(std::span<const double> rho, double fraction = 0.01) {
  std::vector<double> v(rho.begin(), rho.end());
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * v.size())));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m - 1), v.end(),
                   std::greater<>());
  double top = 0.0;
  for (std::size_t i = 0; i < m; ++i) top += v[i];
  double total = 0.0;
  for (double r : rho) total += r;
  return top / total;
}

struct ErrorReport {
  double E_v = 0.0;
  double E_f = 0.0;
  /// max | |u| - |u*| |, insensitive to the phase convention.
  double E_f_modulus = 0.0;
  long double dof = 0;
  std::size_t iterations = 0;
  double wall_time_s = 0.0;
};

inline ErrorReport compute_errors(double energy, std::span<const cplx> samples,
                                  double ref_energy, std::span<const cplx> ref_samples) {
  if (ref_energy == 0.0) throw error::ZeroReference();
  if (samples.size() != ref_samples.size()) {
    throw error::ShapeMismatch(samples.size(), ref_samples.size());
  }
  ErrorReport r;
  r.E_v = std::abs((energy - ref_energy) / ref_energy);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    r.E_f = std::max(r.E_f, std::abs(samples[i] - ref_samples[i]));
    r.E_f_modulus = std::max(r.E_f_modulus, std::abs(std::abs(samples[i]) - std::abs(ref_samples[i])));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reference solutions
// ---------------------------------------------------------------------------

struct Reference {
  PotentialSpec potential;
  Resolution resolution;
  double energy = 0.0;
  SparseSpectrum coefficients;
  int stride = 0;  // 0: no grid samples
  std::vector<cplx> samples;
};

inline Reference make_reference(const PotentialSpec& potential, const Resolution& res,
                                const SolverSettings& settings, int stride) {
  SolveRecord rec = solve_qse(potential, res, settings);
  if (!rec.result.converged) throw error::NotConverged(settings.max_iter, std::move(rec.result));
  Reference ref;
  ref.potential = potential;
  ref.resolution = res;
  ref.energy = rec.result.energy;
  ref.coefficients = rec.result.coefficients.to_sparse();
  ref.stride = stride;
  if (stride > 0) {
    ref.samples = sample_density(rec.result.coefficients,
                                 EvalGrid::standard(potential.dim(), stride))
                      .wavefunction;
  }
  return ref;
}

namespace detail {

inline std::string join_ints(const std::vector<std::int64_t>& v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

inline std::vector<std::int64_t> split_ints(const std::string& s, char sep = ',') {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(std::stoll(item));
  return out;
}

}  // namespace detail

inline constexpr std::string_view kReferenceMagic = "#quasispec-reference v1";

inline void write_reference(std::ostream& os, const Reference& ref) {
  os << kReferenceMagic << '\n';
  os << "method=" << to_string(ref.resolution.method) << '\n';
  os << "K=" << detail::join_ints(ref.resolution.K) << '\n';
  os << "L=" << detail::join_ints(ref.resolution.L) << '\n';
  os << "potential=" << nlohmann::json(ref.potential).dump() << '\n';
  os << "E0=" << format_double(ref.energy) << '\n';
  os << "stride=" << ref.stride << '\n';
  os << "[coefficients]\n";
  for (std::size_t i = 0; i < ref.coefficients.size(); ++i) {
    for (auto v : ref.coefficients.index(i)) os << v << ',';
    os << format_double(ref.coefficients.values[i].real()) << ','
       << format_double(ref.coefficients.values[i].imag()) << '\n';
  }
  os << "[grid]\n";
  if (ref.stride > 0) {
    const auto grid = EvalGrid::standard(ref.potential.dim(), ref.stride);
    const auto pts = grid.points();
    const auto d = static_cast<std::size_t>(grid.d);
    for (std::size_t p = 0; p < ref.samples.size(); ++p) {
      for (std::size_t i = 0; i < d; ++i) os << format_double(pts[p * d + i]) << ',';
      os << format_double(ref.samples[p].real()) << ',' << format_double(ref.samples[p].imag())
         << '\n';
    }
  }
}

inline void save_reference(const std::filesystem::path& path, const Reference& ref) {
  write_atomically(path, [&](std::ostream& os) { write_reference(os, ref); });
}

inline Reference read_reference(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kReferenceMagic) {
    throw error::ConfigError("not a quasispec reference file");
  }
  Reference ref;
  auto value = [&](const std::string& key) {
    if (!std::getline(is, line) || line.rfind(key + "=", 0) != 0) {
      throw error::ConfigError("reference header missing " + key);
    }
    return line.substr(key.size() + 1);
  };
  ref.resolution.method = method_from_string(value("method"));
  ref.resolution.K = detail::split_ints(value("K"));
  ref.resolution.L = detail::split_ints(value("L"));
  ref.potential = nlohmann::json::parse(value("potential")).get<PotentialSpec>();
  ref.energy = std::stod(value("E0"));
  ref.stride = std::stoi(value("stride"));
  if (!std::getline(is, line) || line != "[coefficients]") {
    throw error::ConfigError("reference file missing coefficient table");
  }
  ref.coefficients.n = ref.potential.lifted_dim();
  const auto n = static_cast<std::size_t>(ref.coefficients.n);
  std::vector<std::int64_t> k(n);
  while (std::getline(is, line) && line != "[grid]") {
    std::stringstream ss(line);
    std::string item;
    for (std::size_t j = 0; j < n; ++j) {
      std::getline(ss, item, ',');
      k[j] = std::stoll(item);
    }
    std::getline(ss, item, ',');
    const double re = std::stod(item);
    std::getline(ss, item, ',');
    const double im = std::stod(item);
    ref.coefficients.push(k, {re, im});
  }
  const auto d = static_cast<std::size_t>(ref.potential.dim());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string item;
    for (std::size_t j = 0; j < d; ++j) std::getline(ss, item, ',');
    std::getline(ss, item, ',');
    const double re = std::stod(item);
    std::getline(ss, item, ',');
    const double im = std::stod(item);
    ref.samples.emplace_back(re, im);
  }
  if (ref.stride > 0 && ref.samples.size() != EvalGrid::standard(static_cast<int>(d), ref.stride).size()) {
    throw error::ConfigError("reference grid table has the wrong number of rows");
  }
  return ref;
}

inline Reference load_reference(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw error::ConfigError("cannot open reference " + path.string());
  return read_reference(is);
}

/// Loads `path` when it holds a reference for exactly this problem, otherwise
/// solves and saves one.
inline Reference obtain_reference(const std::filesystem::path& path,
                                  const PotentialSpec& potential, const Resolution& res,
                                  const SolverSettings& settings, int stride) {
  if (std::filesystem::exists(path)) {
    try {
      Reference cached = load_reference(path);
      if (cached.potential == potential && cached.resolution == res && cached.stride == stride) {
        return cached;
      }
    } catch (const Error&) {
      // stale or foreign file: recompute
    }
  }
  Reference ref = make_reference(potential, res, settings, stride);
  save_reference(path, ref);
  return ref;
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

struct StudyConfig {
  PotentialSpec potential;
  std::vector<Resolution> cases;
  SolverSettings settings;
  /// Evaluation-grid stride for E_f; 0 skips physical-space sampling.
  int stride = 0;
  bool condition = false;
  std::size_t jobs = 1;
};

struct StudyRow {
  Resolution resolution;
  long double dof = 0;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double E_v = std::numeric_limits<double>::quiet_NaN();
  double E_f = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
  double time_s = 0.0;
  double cond_H = std::numeric_limits<double>::quiet_NaN();
  double cond_MH = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  std::string error;
};

inline StudyRow run_study_row(const StudyConfig& cfg, const Resolution& res, const Reference* ref) {
  StudyRow row;
  row.resolution = res;
  try {
    const int d = cfg.potential.dim();
    row.dof = res.extents(d, cfg.potential.lifted_dim()).dof();
    const auto t0 = std::chrono::steady_clock::now();
    Discretization disc = discretize(cfg.potential, res, cfg.settings.dof_cap);
    EigenResult result;
    try {
      result = lobpcg_smallest(disc.op, disc.pre, first_basis_vector(disc.set), cfg.settings.tol,
                               cfg.settings.max_iter);
    } catch (error::NotConverged& e) {
      result = std::move(e.result);
      row.error = e.what();
    }
    row.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.energy = result.energy;
    row.iterations = result.iterations;
    row.converged = result.converged;
    if (ref != nullptr) {
      if (ref->energy == 0.0) throw error::ZeroReference();
      row.E_v = std::abs((result.energy - ref->energy) / ref->energy);
      if (cfg.stride > 0 && ref->stride == cfg.stride) {
        const auto s = sample_density(result.coefficients, EvalGrid::standard(d, cfg.stride));
        row.E_f = compute_errors(result.energy, s.wavefunction, ref->energy, ref->samples).E_f;
      }
    }
    if (cfg.condition) {
      const auto mode = disc.op.size() <= kDenseConditionLimit ? ConditionMode::dense
                                                               : ConditionMode::iterative;
      row.cond_H = estimate_condition(disc.op, mode);
      row.cond_MH = estimate_condition(SymmetricPreconditioned(disc.op, disc.pre), mode);
    }
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

/// One row per case; failures are recorded in the row and the sweep continues.
inline std::vector<StudyRow> run_study(const StudyConfig& cfg, const Reference* ref = nullptr) {
  std::vector<StudyRow> rows(cfg.cases.size());
  const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
  for (std::size_t start = 0; start < cfg.cases.size(); start += jobs) {
    const std::size_t stop = std::min(cfg.cases.size(), start + jobs);
    if (jobs == 1) {
      rows[start] = run_study_row(cfg, cfg.cases[start], ref);
      continue;
    }
    std::vector<std::future<StudyRow>> batch;
    for (std::size_t i = start; i < stop; ++i) {
      batch.push_back(std::async(std::launch::async, run_study_row, std::cref(cfg),
                                 std::cref(cfg.cases[i]), ref));
    }
    for (std::size_t i = start; i < stop; ++i) rows[i] = batch[i - start].get();
  }
  return rows;
}

namespace detail {

inline std::string extent_field(const std::vector<std::int64_t>& v) { return join_ints(v, ';'); }

}  // namespace detail

/// CSV: method,K,L,dof,E_v,E_f,iters,time_s,cond_H,cond_MH.
inline void write_study_csv(std::ostream& os, const std::vector<StudyRow>& rows) {
  os << "method,K,L,dof,E_v,E_f,iters,time_s,cond_H,cond_MH\n";
  for (const auto& r : rows) {
    os << to_string(r.resolution.method) << ',' << detail::extent_field(r.resolution.K) << ','
       << detail::extent_field(r.resolution.L) << ','
       << format_double(static_cast<double>(r.dof)) << ',' << format_double(r.E_v) << ','
       << format_double(r.E_f) << ',' << r.iterations << ',' << format_double(r.time_s) << ','
       << format_double(r.cond_H) << ',' << format_double(r.cond_MH) << '\n';
  }
}

/// gnuplot data: one block per method (separated by two blank lines), columns dof E_v.
inline void write_error_dof(std::ostream& os, const std::vector<StudyRow>& rows) {
  bool first = true;
  for (auto m : {Method::pm, Method::iwfpm}) {
    std::vector<const StudyRow*> sel;
    for (const auto& r : rows) {
      if (r.resolution.method == m) sel.push_back(&r);
    }
    if (sel.empty()) continue;
    if (!first) os << "\n\n";
    first = false;
    os << "# " << to_string(m) << "\n# dof E_v\n";
    std::stable_sort(sel.begin(), sel.end(), [](auto* a, auto* b) { return a->dof < b->dof; });
    for (const auto* r : sel) {
      os << format_double(static_cast<double>(r->dof), kPlotDigits) << ' '
         << format_double(r->E_v, kPlotDigits) << '\n';
    }
  }
}

}  // namespace quasispec
