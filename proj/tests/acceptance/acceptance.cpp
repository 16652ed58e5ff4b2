// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "quasispec.hpp"

using namespace quasispec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

fs::path g_cache;

std::shared_ptr<const ProjectionMatrix> projection_of(const Eigen::MatrixXd& p) {
  return std::make_shared<const ProjectionMatrix>(split_projection(p));
}

Eigen::MatrixXd p_example1() { return PotentialSpec::example1(1.0).projection_matrix(); }

ComplexVector random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  ComplexVector v(n);
  for (auto& z : v) z = {nd(rng), nd(rng)};
  return v;
}

double max_abs(std::span<const cplx> v) {
  double m = 0.0;
  for (const auto& z : v) m = std::max(m, std::abs(z));
  return m;
}

/// Per-axis tables of e^{i m pi l / h}, indexed by (m mod 2h, l); on the
/// grid the phase only depends on the residue of m.
struct PhaseTables {
  std::vector<std::vector<cplx>> table;  // [axis][residue * 2h + l]
  std::vector<std::vector<cplx>> sums;   // [axis][residue]: direct mean over l
  std::vector<std::int64_t> period;

  explicit PhaseTables(const WindowExtents& ext) {
    for (int j = 0; j < ext.lifted_dim(); ++j) {
      const std::int64_t p = 2 * ext.half(j);
      period.push_back(p);
      std::vector<cplx> t(static_cast<std::size_t>(p * p));
      for (std::int64_t m = 0; m < p; ++m) {
        for (std::int64_t l = 0; l < p; ++l) {
          t[static_cast<std::size_t>(m * p + l)] =
              std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>((m * l) % p) /
                                  static_cast<double>(p));
        }
      }
      std::vector<cplx> m_sum(static_cast<std::size_t>(p));
      for (std::int64_t m = 0; m < p; ++m) {
        cplx acc = 0.0;
        for (std::int64_t l = 0; l < p; ++l) acc += t[static_cast<std::size_t>(m * p + l)];
        m_sum[static_cast<std::size_t>(m)] = acc / static_cast<double>(p);
      }
      table.push_back(std::move(t));
      sums.push_back(std::move(m_sum));
    }
  }

  /// e^{i k . y_l} for grid multi-index ell.
  cplx phase(std::span<const std::int64_t> k, std::span<const std::int64_t> ell) const {
    cplx z = 1.0;
    for (std::size_t j = 0; j < period.size(); ++j) {
      const auto p = period[j];
      z *= table[j][static_cast<std::size_t>(floor_mod(k[j], p) * p + ell[j])];
    }
    return z;
  }

  /// (1/N) sum_l e^{i m . y_l}, summed axis by axis.
  cplx mean_phase(std::span<const std::int64_t> m) const {
    cplx z = 1.0;
    for (std::size_t j = 0; j < period.size(); ++j) {
      z *= sums[j][static_cast<std::size_t>(floor_mod(m[j], period[j]))];
    }
    return z;
  }
};

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  Eigen::MatrixXd p(1, 2);
  p << 1.0, (std::sqrt(5.0) + 1.0) / 2.0;
  const auto set = build_window_set(projection_of(p), 2, 6, Method::iwfpm);
  o.check(set->size() == 48, "size " + std::to_string(set->size()));

  std::set<LatticeIndex> seen;
  std::set<LatticeIndex> images;
  for (std::size_t r = 0; r < set->size(); ++r) {
    const auto k = set->index(r);
    const double w = static_cast<double>(k[0]) + set->window_q()(0, 0) * static_cast<double>(k[1]);
    o.check(w >= -2.0 && w < 2.0 && k[1] >= -6 && k[1] < 6, "window membership");
    seen.insert(k);
    const auto ks = rho(k, set->extents());
    images.insert(ks);
    o.check(row_major_rank(ks, set->shape()) == r, "rank of rho(k)");
    o.check(rho_inverse(ks, set->window_q(), set->extents()) == k, "rho inverse");
    o.check(set->find(k) == r, "find");
  }
  o.check(seen.size() == 48 && images.size() == 48, "bijection onto the 4 x 12 rectangle");

  // brute-force scan of a bounding box finds exactly the same indices
  std::size_t count = 0;
  for (std::int64_t k2 = -6; k2 < 6; ++k2) {
    for (std::int64_t k1 = -40; k1 <= 40; ++k1) {
      const double w = static_cast<double>(k1) + set->window_q()(0, 0) * static_cast<double>(k2);
      if (w >= -2.0 && w < 2.0) {
        ++count;
        const std::int64_t k[2] = {k1, k2};
        o.check(set->contains(k), "box scan member");
      }
    }
  }
  o.check(count == 48, "box scan count");
  o.detail << "indices=" << set->size() << " distinct_images=" << images.size();
  return o;
}

Outcome criterion2() {
  Outcome o;
  const double t = 0.2 * std::numbers::pi;
  struct Case {
    Eigen::MatrixXd p;
    std::int64_t k, l;
    Method m;
  };
  const std::vector<Case> cases = {
      {p_example1(), 8, 128, Method::iwfpm},
      {PotentialSpec::example2(0.8 * std::numbers::pi, t).projection_matrix(), 4, 16, Method::iwfpm},
      {PotentialSpec::example3(std::numbers::pi).projection_matrix(), 1, 2, Method::iwfpm},
      {p_example1(), 16, 32, Method::pm},
      {PotentialSpec::example2(0.8 * std::numbers::pi, t).projection_matrix(), 3, 8, Method::pm},
  };
  std::mt19937_64 rng(2);
  double worst_fwd = 0.0;
  double worst_rt = 0.0;
  std::size_t largest = 0;
  for (int f = 0; f < 50; ++f) {
    const auto& c = cases[static_cast<std::size_t>(f) % cases.size()];
    const auto set = build_window_set(projection_of(c.p), c.k, c.l, c.m);
    const DualGrid grid(set->extents());
    largest = std::max(largest, set->size());
    GridField field(grid, random_vector(grid.size(), rng));
    const SpectralField fast = forward_dft(field, set);

    const PhaseTables tables(set->extents());
    const auto n = grid.size();
    std::vector<LatticeIndex> ells(n, LatticeIndex(static_cast<std::size_t>(set->lifted_dim())));
    for (std::size_t l = 0; l < n; ++l) row_major_unrank(l, grid.shape(), ells[l]);
    ComplexVector direct(n);
    LatticeIndex k(static_cast<std::size_t>(set->lifted_dim()));
    for (std::size_t r = 0; r < n; ++r) {
      set->index(r, k);
      cplx acc = 0.0;
      for (std::size_t l = 0; l < n; ++l) acc += field.values[l] * std::conj(tables.phase(k, ells[l]));
      direct[r] = acc / static_cast<double>(n);
    }
    double diff = 0.0;
    for (std::size_t r = 0; r < n; ++r) diff = std::max(diff, std::abs(direct[r] - fast[r]));
    worst_fwd = std::max(worst_fwd, diff / max_abs(direct));

    const GridField back = inverse_dft(fast);
    double rt = 0.0;
    for (std::size_t l = 0; l < n; ++l) rt = std::max(rt, std::abs(back.values[l] - field.values[l]));
    worst_rt = std::max(worst_rt, rt / max_abs(field.values));
  }
  o.check(largest <= 4096, "DOF limit");
  o.check(worst_fwd <= 1e-12, "forward vs direct quadrature");
  o.check(worst_rt <= 1e-12, "round trip");
  o.detail << "fields=50 max_dof=" << largest << " forward_rel=" << sci(worst_fwd)
           << " roundtrip_rel=" << sci(worst_rt);
  return o;
}

Outcome criterion3() {
  Outcome o;
  const double t = 0.2 * std::numbers::pi;
  struct Case {
    Eigen::MatrixXd p;
    std::int64_t k, l;
    Method m;
  };
  const std::vector<Case> cases = {
      {[] {
         Eigen::MatrixXd p(1, 2);
         p << 1.0, (std::sqrt(5.0) + 1.0) / 2.0;
         return p;
       }(),
       2, 6, Method::iwfpm},
      {p_example1(), 5, 60, Method::iwfpm},
      {p_example1(), 10, 40, Method::pm},
      {PotentialSpec::example2(0.8 * std::numbers::pi, t).projection_matrix(), 3, 5, Method::iwfpm},
      {PotentialSpec::example3(std::numbers::pi).projection_matrix(), 1, 2, Method::iwfpm},
  };
  double worst_orth = 0.0;
  double worst_alias = 0.0;
  double worst_formula = 0.0;
  std::size_t aliases_checked = 0;
  for (const auto& c : cases) {
    const auto set = build_window_set(projection_of(c.p), c.k, c.l, c.m);
    const auto& ext = set->extents();
    const int nd = set->lifted_dim();
    const PhaseTables tables(ext);
    const auto idx = set->indices();
    o.check(set->size() <= 2000, "DOF limit");

    // discrete orthogonality over all pairs
    LatticeIndex diff(static_cast<std::size_t>(nd));
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = 0; b < idx.size(); ++b) {
        for (int j = 0; j < nd; ++j) diff[j] = idx[a][j] - idx[b][j];
        const cplx s = tables.mean_phase(diff);
        worst_orth = std::max(worst_orth, std::abs(s - (a == b ? 1.0 : 0.0)));
      }
    }

    // aliasing: every k' in a box three windows wide lands on the unique
    // member sharing its residue
    const DualGrid grid(ext);
    std::vector<std::int64_t> lo(static_cast<std::size_t>(nd));
    std::vector<int> box(static_cast<std::size_t>(nd));
    std::size_t box_size = 1;
    for (int j = 0; j < nd; ++j) {
      const auto h = ext.half(j);
      const auto shift = j < set->dim() ? static_cast<std::int64_t>(std::ceil(std::abs(
                                              (set->window_q().row(j).cwiseAbs().sum()) *
                                              static_cast<double>(ext.L.front()))))
                                        : 0;
      lo[j] = -3 * h - shift;
      box[j] = static_cast<int>(6 * h + 2 * shift);
      box_size *= static_cast<std::size_t>(box[j]);
    }
    // exhaustive up to 40000 k'; the 3D box is sampled evenly
    const std::size_t stride = std::max<std::size_t>(1, box_size / 40000);
    LatticeIndex kp(static_cast<std::size_t>(nd));
    for (std::size_t b = 0; b < box_size; b += stride) {
      row_major_unrank(b, box, kp);
      for (int j = 0; j < nd; ++j) kp[j] += lo[j];
      const std::size_t target = row_major_rank(rho(kp, ext), set->shape());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        for (int j = 0; j < nd; ++j) diff[j] = kp[j] - idx[r][j];
        const cplx s = tables.mean_phase(diff);
        worst_alias = std::max(worst_alias, std::abs(s - (r == target ? 1.0 : 0.0)));
      }
      ++aliases_checked;
    }

    // finite-spectrum formula: I u_k = sum over k' with rho(k') = rho(k) of U_k'
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd01;
    SparseSpectrum u;
    u.n = nd;
    ComplexVector expect(set->size());
    for (int m = 0; m < 200; ++m) {
      const std::size_t b = static_cast<std::size_t>(rng() % box_size);
      row_major_unrank(b, box, kp);
      for (int j = 0; j < nd; ++j) kp[j] += lo[j];
      const cplx v{nd01(rng), nd01(rng)};
      u.push(kp, v);
      expect[row_major_rank(rho(kp, ext), set->shape())] += v;
    }
    const SpectralField interp = forward_dft(sample_sparse_parent(u, grid), set);
    for (std::size_t r = 0; r < set->size(); ++r) {
      worst_formula = std::max(worst_formula,
                               std::abs(interp[r] - expect[r]) / std::max(1.0, std::abs(expect[r])));
    }
  }
  o.check(worst_orth <= 1e-12, "orthogonality");
  o.check(worst_alias <= 1e-12, "aliasing");
  o.check(worst_formula <= 1e-12, "aliasing formula");
  o.detail << "orthogonality=" << sci(worst_orth) << " aliasing=" << sci(worst_alias)
           << " over " << aliases_checked << " k' formula=" << sci(worst_formula);
  return o;
}

Reference example1_reference(double v0, std::int64_t k, std::int64_t l, std::size_t max_iter,
                             int stride) {
  SolverSettings s;
  s.max_iter = max_iter;
  const auto name = "example1_v" + sci(v0) + "_K" + std::to_string(k) + "_L" + std::to_string(l) + ".txt";
  return obtain_reference(g_cache / name, PotentialSpec::example1(v0),
                          Resolution{Method::iwfpm, {k}, {l}}, s, stride);
}

Outcome criterion4() {
  Outcome o;
  const auto ref = example1_reference(2.5, 10, 1024, 20000, 1);
  StudyConfig cfg;
  cfg.potential = PotentialSpec::example1(2.5);
  cfg.cases = {{Method::iwfpm, {5}, {60}}, {Method::pm, {42}, {60}}};
  cfg.stride = 1;
  const auto rows = run_study(cfg, &ref);
  const auto& iw = rows[0];
  const auto& pm = rows[1];
  o.check(iw.converged && pm.converged, "convergence");
  o.check(iw.E_v <= 1e-12, "IWFPM E_v");
  o.check(iw.E_f <= 5e-5, "IWFPM E_f");
  o.check(pm.E_v <= 1e-12, "PM E_v");
  o.check(pm.E_f <= 5e-5, "PM E_f");
  o.check(std::abs(std::log10(pm.E_f / iw.E_f)) <= 1.0, "PM and IWFPM E_f of the same order");
  o.detail << "IWFPM E_v=" << sci(iw.E_v) << " E_f=" << sci(iw.E_f) << " dof=" << iw.dof
           << "; PM E_v=" << sci(pm.E_v) << " E_f=" << sci(pm.E_f) << " dof=" << pm.dof;
  return o;
}

Outcome criterion5() {
  Outcome o;
  const auto disc = discretize(PotentialSpec::example1(2.5), Resolution{Method::iwfpm, {16}, {16}});
  const double ch = estimate_condition(disc.op, ConditionMode::dense);
  const double cmh = estimate_condition(SymmetricPreconditioned(disc.op, disc.pre), ConditionMode::dense);
  o.check(disc.op.size() == 1024, "DOF");
  o.check(ch >= 1e3, "cond(H)");
  o.check(cmh >= 2.0 && cmh <= 2.6, "cond(MH)");
  o.detail << "dof=" << disc.op.size() << " cond_H=" << sci(ch) << " cond_MH=" << sci(cmh);
  return o;
}

Outcome criterion6() {
  Outcome o;
  const auto ref = example1_reference(3.0, 10, 4096, 60000, 1);
  StudyConfig cfg;
  cfg.potential = PotentialSpec::example1(3.0);
  cfg.cases = {{Method::iwfpm, {8}, {512}}, {Method::iwfpm, {8}, {1024}}, {Method::iwfpm, {8}, {2048}}};
  cfg.settings.max_iter = 60000;
  const auto rows = run_study(cfg, &ref);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    o.check(rows[i].converged, "convergence");
    if (i > 0) o.check(rows[i].E_v < rows[i - 1].E_v, "monotone E_v");
    o.detail << "L=" << rows[i].resolution.L[0] << " E_v=" << sci(rows[i].E_v) << " ";
  }
  o.check(rows.back().E_v <= 1e-6, "final E_v");
  o.detail << "(K=8)";
  return o;
}

Outcome criterion7() {
  Outcome o;
  const auto pot = PotentialSpec::example2(0.8 * std::numbers::pi, 0.2 * std::numbers::pi);
  const auto ref = obtain_reference(g_cache / "example2_caseI_K10_L160.txt", pot,
                                    Resolution{Method::iwfpm, {10}, {160}}, {}, 0);
  StudyConfig cfg;
  cfg.potential = pot;
  for (std::int64_t l : {20, 30, 40, 50}) cfg.cases.push_back({Method::iwfpm, {6}, {l}});
  const auto rows = run_study(cfg, &ref);
  const double published[3] = {4.53e-8, 3.09e-11, 1.84e-13};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    o.check(rows[i].converged, "convergence");
    if (i < 3) {
      o.check(std::abs(std::log10(rows[i].E_v / published[i])) <= 1.0,
              "E_v within an order of " + sci(published[i]));
    }
    if (i > 0 && i < 3) o.check(rows[i].E_v < rows[i - 1].E_v, "monotone E_v");
    o.detail << "L=" << rows[i].resolution.L[0] << " E_v=" << sci(rows[i].E_v) << " ";
  }
  o.check(rows[3].E_v <= 5e-15 && rows[3].E_v <= rows[2].E_v, "final E_v");
  return o;
}

Outcome criterion8() {
  Outcome o;
  const auto pot = PotentialSpec::example3(std::numbers::pi);
  const double tol = 1e-10;
  std::vector<double> energies;
  std::mt19937_64 rng(8);
  for (std::int64_t l : {4, 8, 16}) {
    const auto disc = discretize(pot, Resolution{Method::iwfpm, {3}, {l}});
    const auto n = disc.op.size();
    const auto x = random_vector(n, rng);
    const auto y = random_vector(n, rng);
    ComplexVector hx(n), hy(n);
    disc.op.apply(x, hx);
    disc.op.apply(y, hy);
    const cplx a = blas::dot(y, hx);
    const cplx b = blas::dot(hy, x);
    o.check(std::abs(a - b) <= 1e-12 * std::abs(a), "Hermiticity at L=" + std::to_string(l));

    EigenResult r;
    try {
      r = lobpcg_smallest(disc.op, disc.pre, first_basis_vector(disc.set), tol, 20000);
    } catch (error::NotConverged& e) {
      r = std::move(e.result);
    }
    o.check(r.converged, "convergence at L=" + std::to_string(l));
    const SpectralField hu = apply_hamiltonian(disc.op, r.coefficients);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res += std::norm(hu[i] - r.energy * r.coefficients[i]);
    res = std::sqrt(res);
    o.check(res <= 1.01 * tol, "residual at L=" + std::to_string(l));
    o.check(std::abs(blas::norm(r.coefficients.coeffs()) - 1.0) <= 1e-12, "unit norm");
    o.check(r.energy > 0.0, "positive energy");
    energies.push_back(r.energy);
    o.detail << "L=" << l << " dof=" << n << " E=" << format_double(r.energy, 12)
             << " iters=" << r.iterations << " res=" << sci(res) << "; ";
  }
  const double e4 = std::abs((energies[0] - energies[2]) / energies[2]);
  const double e8 = std::abs((energies[1] - energies[2]) / energies[2]);
  o.check(e8 < e4, "monotone E_v");
  o.check(e4 <= 1e-2, "L=4 error");
  o.detail << "E_v(L=4)=" << sci(e4) << " E_v(L=8)=" << sci(e8);
  return o;
}

Outcome criterion9() {
  Outcome o;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ur(0.0, 3.0);
  std::uniform_int_distribution<std::int64_t> ui(-30, 30);
  const double t = 0.2 * std::numbers::pi;
  const std::vector<Eigen::MatrixXd> ps = {
      p_example1(), PotentialSpec::example2(0.8 * std::numbers::pi, t).projection_matrix(),
      PotentialSpec::example3(std::numbers::pi).projection_matrix()};
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto& p = ps[static_cast<std::size_t>(trial) % ps.size()];
    const auto proj = split_projection(p);
    const double inv = operator_norm(proj.leading_block().inverse());
    const double fwd = operator_norm(proj.leading_block());
    double al = ur(rng);
    double be = ur(rng);
    if (be > al) std::swap(al, be);
    SparseSpectrum s;
    s.n = proj.lifted_dim();
    std::normal_distribution<double> nd;
    LatticeIndex k(static_cast<std::size_t>(s.n));
    for (int m = 0; m < 25; ++m) {
      for (auto& v : k) v = ui(rng);
      s.push(k, {nd(rng), nd(rng)});
    }
    const double mixed2 = std::pow(mixed_seminorm(s, proj.q(), al, be), 2);
    const double qp2 = std::pow(qp_seminorm(s, p, al), 2);
    const double per2 = std::pow(periodic_seminorm(s, be), 2);
    const double upper = std::pow(inv, 2 * al) * qp2 + per2;
    const double lower = std::pow(fwd, 2 * al) * mixed2;
    worst = std::max({worst, (mixed2 - upper) / upper, (qp2 - lower) / lower});
  }
  o.check(worst <= 1e-12, "norm inequalities");

  // manufactured anisotropic decay: a = 3, b = 2.5 gives rates a - 1/2, b - 1/2
  const double a = 3.0;
  const double b = 2.5;
  const auto proj = projection_of(p_example1());
  const auto support_k = build_window_set(proj, 128, 16, Method::iwfpm);
  const auto u_k = decay_spectrum(*support_k, a, b);
  std::vector<double> ks, trunc_k, interp_k;
  for (std::int64_t kk : {8, 16, 32}) {
    const auto set = build_window_set(proj, kk, 16, Method::iwfpm);
    ks.push_back(static_cast<double>(kk));
    trunc_k.push_back(truncation_error(u_k, *set));
    interp_k.push_back(interpolation_error(u_k, forward_dft(sample_sparse_parent(u_k, DualGrid(set->extents())), set)));
  }
  const auto support_l = build_window_set(proj, 8, 512, Method::iwfpm);
  const auto u_l = decay_spectrum(*support_l, a, b);
  std::vector<double> ls, trunc_l, interp_l;
  for (std::int64_t ll : {16, 32, 64}) {
    const auto set = build_window_set(proj, 8, ll, Method::iwfpm);
    ls.push_back(static_cast<double>(ll));
    trunc_l.push_back(truncation_error(u_l, *set));
    interp_l.push_back(interpolation_error(u_l, forward_dft(sample_sparse_parent(u_l, DualGrid(set->extents())), set)));
  }
  const double rate_k = a - 0.5;
  const double rate_l = b - 0.5;
  const double s_tk = -loglog_slope(ks, trunc_k);
  const double s_ik = -loglog_slope(ks, interp_k);
  const double s_tl = -loglog_slope(ls, trunc_l);
  const double s_il = -loglog_slope(ls, interp_l);
  for (double s : {s_tk, s_ik}) o.check(std::abs(s - rate_k) <= 0.25 * rate_k, "K slope");
  for (double s : {s_tl, s_il}) o.check(std::abs(s - rate_l) <= 0.25 * rate_l, "L slope");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    o.check(interp_k[i] >= trunc_k[i], "interpolation below truncation (K)");
    o.check(interp_l[i] >= trunc_l[i], "interpolation below truncation (L)");
  }
  o.detail << "inequality_slack=" << sci(worst) << " slopes K: trunc=" << sci(s_tk)
           << " interp=" << sci(s_ik) << " (expect " << rate_k << "), L: trunc=" << sci(s_tl)
           << " interp=" << sci(s_il) << " (expect " << rate_l << ")";
  return o;
}

Outcome criterion10() {
  Outcome o;
  const auto ext_ref = example1_reference(2.5, 10, 1024, 20000, 1);
  const auto loc_ref = example1_reference(3.0, 10, 4096, 60000, 1);
  auto density = [](const std::vector<cplx>& w) {
    std::vector<double> rho;
    rho.reserve(w.size());
    for (const auto& z : w) rho.push_back(std::norm(z));
    return rho;
  };
  const double ipr_ext = inverse_participation_ratio(density(ext_ref.samples));
  const double ipr_loc = inverse_participation_ratio(density(loc_ref.samples));
  o.check(ipr_loc >= 10.0 * ipr_ext, "IPR ratio");

  const auto case3 = PotentialSpec::example2(0.5 * std::numbers::pi, 0.2 * std::numbers::pi);
  SolverSettings s;
  s.max_iter = 60000;
  const auto ref3 = obtain_reference(g_cache / "example2_caseIII_K4_L512.txt", case3,
                                     Resolution{Method::iwfpm, {4}, {512}}, s, 5);
  const auto rho3 = density(ref3.samples);
  const double top = top_mass_fraction(rho3, 0.01);
  o.check(top > 0.8, "case III top 1% mass");
  o.detail << "IPR v0=2.5: " << sci(ipr_ext) << " v0=3: " << sci(ipr_loc) << " ratio "
           << sci(ipr_loc / ipr_ext) << "; case III top 1% mass=" << sci(top)
           << " participation=" << sci(participation_fraction(rho3)) << " (grid stride 5)";
  return o;
}

struct Criterion {
  int id;
  double limit_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quasispec acceptance suite"};
  std::vector<int> only;
  std::string cache = "acceptance_cache";
  app.add_option("--criterion", only, "run only these criteria (1-10)")->check(CLI::Range(1, 10));
  app.add_option("--cache", cache, "directory for cached reference solutions");
  CLI11_PARSE(app, argc, argv);
  g_cache = cache;
  fs::create_directories(g_cache);

  const std::vector<Criterion> all = {
      {1, 1, criterion1},     {2, 10, criterion2},   {3, 0, criterion3},
      {4, 60, criterion4},    {5, 120, criterion5},  {6, 600, criterion6},
      {7, 900, criterion7},   {8, 1800, criterion8}, {9, 300, criterion9},
      {10, 0, criterion10},
  };

  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs > c.limit_s) {
      o.pass = false;
      o.detail << " [failed: runtime above " << c.limit_s << " s]";
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d: %s  (%.1f s)  %s\n", c.id, o.pass ? "PASS" : "FAIL", secs,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
