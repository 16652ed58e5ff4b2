// quasispec: solve, study, interpolate, precond-stats.
//
// Exit codes: 0 success, 1 configuration or input error, 2 solver did not converge.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "quasispec.hpp"

namespace fs = std::filesystem;
using namespace quasispec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNotConverged = 2;

struct Overrides {
  std::string config;
  std::optional<std::string> potential;
  std::optional<double> v0, c, beta, theta, tol;
  std::optional<std::string> method;
  std::vector<std::int64_t> K, L;
  std::optional<std::size_t> max_iter, dof_cap, jobs;
  std::optional<int> stride;
  std::optional<std::string> out, target;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--potential", o.potential, "example1|example2|example3|constant|custom");
  cmd->add_option("--v0", o.v0, "example1 amplitude");
  cmd->add_option("--c", o.c, "constant potential value");
  cmd->add_option("--beta", o.beta, "example2/3 wavevector scale");
  cmd->add_option("--theta", o.theta, "example2/3 mixing angle");
  cmd->add_option("--method", o.method, "iwfpm|pm");
  cmd->add_option("-K", o.K, "window half-width(s) along physical directions")->delimiter(',');
  cmd->add_option("-L", o.L, "window half-width(s) along lattice directions")->delimiter(',');
  cmd->add_option("--tol", o.tol, "LOBPCG residual tolerance");
  cmd->add_option("--max-iter", o.max_iter, "LOBPCG iteration limit");
  cmd->add_option("--dof-cap", o.dof_cap, "largest admissible DOF");
  cmd->add_option("--stride", o.stride, "evaluation grid subsampling");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--jobs", o.jobs, "concurrent study rows");
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.potential) {
    const auto kind = potential_kind_from_string(*o.potential);
    if (kind != cfg.potential.kind) {
      cfg.potential = PotentialSpec{};
      cfg.potential.kind = kind;
      if (kind == PotentialKind::example3) cfg.potential.beta = std::numbers::pi;
    }
  }
  if (o.v0) cfg.potential.v0 = *o.v0;
  if (o.c) cfg.potential.c = *o.c;
  if (o.beta) cfg.potential.beta = *o.beta;
  if (o.theta) cfg.potential.theta = *o.theta;
  if (o.method) cfg.resolution.method = method_from_string(*o.method);
  if (!o.K.empty()) cfg.resolution.K = o.K;
  if (!o.L.empty()) cfg.resolution.L = o.L;
  if (o.tol) cfg.tol = *o.tol;
  if (o.max_iter) cfg.max_iter = *o.max_iter;
  if (o.dof_cap) cfg.dof_cap = *o.dof_cap;
  if (o.stride) cfg.stride = *o.stride;
  if (o.out) cfg.out = *o.out;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.target) cfg.interpolate.target = *o.target;
  cfg.validate();
  return cfg;
}

int effective_stride(const RunConfig& cfg) {
  return EvalGrid::standard(cfg.potential.dim(), cfg.stride).stride;
}

void write_density_csv(std::ostream& os, const EvalGrid& grid, const DensitySample& s) {
  for (int i = 1; i <= grid.d; ++i) os << "x_" << i << ',';
  os << "re,im,rho\n";
  const auto pts = grid.points();
  const auto d = static_cast<std::size_t>(grid.d);
  for (std::size_t p = 0; p < s.density.size(); ++p) {
    for (std::size_t i = 0; i < d; ++i) os << format_double(pts[p * d + i], kPlotDigits) << ',';
    os << format_double(s.wavefunction[p].real(), kPlotDigits) << ','
       << format_double(s.wavefunction[p].imag(), kPlotDigits) << ','
       << format_double(s.density[p], kPlotDigits) << '\n';
  }
}

int cmd_solve(const RunConfig& cfg) {
  const fs::path out = cfg.out;
  SolveRecord rec = solve_qse(cfg.potential, cfg.resolution, cfg.solver());
  const auto& r = rec.result;
  const double residual = r.residual_history.empty() ? NAN : r.residual_history.back();

  write_atomically(out / "energy.txt", [&](std::ostream& os) {
    os << "E0=" << format_double(r.energy) << '\n'
       << "converged=" << (r.converged ? "true" : "false") << '\n'
       << "iterations=" << r.iterations << '\n'
       << "residual_norm=" << format_double(residual) << '\n'
       << "dof=" << r.coefficients.size() << '\n'
       << "breakdowns=" << r.breakdowns << '\n';
  });
  write_atomically(out / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, r); });
  write_atomically(out / "coefficients.csv",
                   [&](std::ostream& os) { write_spectral_csv(os, r.coefficients); });
  const auto grid = EvalGrid::standard(cfg.potential.dim(), cfg.stride);
  const auto density = sample_density(r.coefficients, grid);
  write_atomically(out / "density.csv",
                   [&](std::ostream& os) { write_density_csv(os, grid, density); });

  std::cout << "E0 = " << format_double(r.energy) << "  iterations = " << r.iterations
            << "  residual = " << format_double(residual, 3) << '\n';
  if (!r.converged) {
    std::cerr << "quasispec: LOBPCG did not converge within " << cfg.max_iter
              << " iterations; best iterate written to " << out << '\n';
    return kExitNotConverged;
  }
  return kExitOk;
}

int cmd_study(const RunConfig& cfg) {
  const fs::path out = cfg.out;
  StudyConfig sc;
  sc.potential = cfg.potential;
  sc.cases = cfg.sweep;
  sc.settings = cfg.solver();
  sc.condition = cfg.condition;
  sc.jobs = cfg.jobs;
  std::optional<Reference> ref;
  if (cfg.reference && !sc.cases.empty()) {
    sc.stride = effective_stride(cfg);
    ref = obtain_reference(out / "reference.txt", cfg.potential, *cfg.reference, cfg.solver(),
                           sc.stride);
  }
  const auto rows = run_study(sc, ref ? &*ref : nullptr);
  for (const auto& row : rows) {
    if (!row.error.empty()) {
      std::cerr << "quasispec: " << to_string(row.resolution.method) << " K="
                << detail::join_ints(row.resolution.K, ';') << " L="
                << detail::join_ints(row.resolution.L, ';') << ": " << row.error << '\n';
    }
  }
  write_atomically(out / "study.csv", [&](std::ostream& os) { write_study_csv(os, rows); });
  write_atomically(out / "error_dof.dat", [&](std::ostream& os) { write_error_dof(os, rows); });
  write_study_csv(std::cout, rows);
  return kExitOk;
}

int cmd_interpolate(const RunConfig& cfg) {
  const fs::path out = cfg.out;
  const auto& is = cfg.interpolate;
  Eigen::MatrixXd p(1, 2);
  p << 2.0 * std::numbers::pi, 2.0 * std::numbers::pi * kGolden;
  auto proj = std::make_shared<const ProjectionMatrix>(split_projection(p));

  SparseSpectrum exact;
  if (is.target == "two-cosine") {
    exact = PotentialSpec::custom(0.0, {{1.0, {1, 0}}, {1.0, {0, 1}}}, {{p(0, 0), p(0, 1)}})
                .spectrum();
  } else if (is.target == "anisotropic") {
    const auto support = build_window_set(proj, 64, 256, Method::iwfpm);
    exact = decay_spectrum(*support, is.decay_a, is.decay_b);
  } else if (is.target == "mode") {
    if (is.mode.size() != 2) throw error::ConfigError("mode target needs two integers");
    exact.n = 2;
    exact.push(is.mode, 1.0);
  } else {
    throw error::ConfigError("unknown interpolation target '" + is.target + "'");
  }

  // build sets and grid, sample the parent, FFT with rho^{-1} relabelling
  const auto ext = cfg.resolution.extents(1, 2);
  const auto set = build_window_set(proj, ext, cfg.resolution.method, cfg.dof_cap);
  const DualGrid grid(ext, cfg.dof_cap);
  const SpectralField interp = forward_dft(sample_sparse_parent(exact, grid), set);

  // evaluate interpolant and analytic function at random points
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  std::vector<double> xs(is.samples);
  for (auto& x : xs) x = unif(rng);
  const auto approx = evaluate(interp, xs);
  double max_err = 0.0;
  for (std::size_t m = 0; m < xs.size(); ++m) {
    cplx u{};
    for (std::size_t i = 0; i < exact.size(); ++i) {
      const auto k = exact.index(i);
      const double q = p(0, 0) * static_cast<double>(k[0]) + p(0, 1) * static_cast<double>(k[1]);
      u += exact.values[i] * std::polar(1.0, q * xs[m]);
    }
    max_err = std::max(max_err, std::abs(u - approx[m]));
  }
  const double l2 = interpolation_error(exact, interp);

  write_atomically(out / "coefficients.csv",
                   [&](std::ostream& os) { write_spectral_csv(os, interp); });
  write_atomically(out / "interpolation.txt", [&](std::ostream& os) {
    os << "target=" << is.target << '\n'
       << "K=" << detail::join_ints(cfg.resolution.K) << '\n'
       << "L=" << detail::join_ints(cfg.resolution.L) << '\n'
       << "max_error=" << format_double(max_err) << '\n'
       << "l2_error=" << format_double(l2) << '\n';
    if (is.target == "mode") {
      std::size_t rmax = 0;
      for (std::size_t r = 1; r < interp.size(); ++r) {
        if (std::abs(interp[r]) > std::abs(interp[rmax])) rmax = r;
      }
      os << "aliased_index=" << detail::join_ints(set->index(rmax)) << '\n';
    }
  });
  std::cout << "max_error = " << format_double(max_err) << "  l2_error = " << format_double(l2)
            << '\n';
  return kExitOk;
}

int cmd_precond_stats(const RunConfig& cfg) {
  const fs::path out = cfg.out;
  Discretization disc = discretize(cfg.potential, cfg.resolution, cfg.dof_cap);
  const auto mode =
      disc.op.size() <= kDenseConditionLimit ? ConditionMode::dense : ConditionMode::iterative;
  const double cond_h = estimate_condition(disc.op, mode);
  const double cond_mh = estimate_condition(SymmetricPreconditioned(disc.op, disc.pre), mode);
  const auto [mmin, mmax] = std::minmax_element(disc.pre.m.begin(), disc.pre.m.end());
  auto report = [&](std::ostream& os) {
    os << "dof=" << disc.op.size() << '\n'
       << "mode=" << (mode == ConditionMode::dense ? "dense" : "iterative") << '\n'
       << "cond_H=" << format_double(cond_h) << '\n'
       << "cond_MH=" << format_double(cond_mh) << '\n'
       << "m_min=" << format_double(*mmin) << '\n'
       << "m_max=" << format_double(*mmax) << '\n';
  };
  write_atomically(out / "precond.txt", report);
  report(std::cout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasiperiodic spectral solver (IWFPM and PM)"};
  app.require_subcommand(1);
  Overrides o;
  auto* solve = app.add_subcommand("solve", "smallest eigenpair of the quasiperiodic Schroedinger operator");
  auto* study = app.add_subcommand("study", "sweep resolutions against a reference");
  auto* interp = app.add_subcommand("interpolate", "Fourier interpolation of a known function");
  auto* stats = app.add_subcommand("precond-stats", "condition numbers with and without M");
  for (auto* cmd : {solve, study, interp, stats}) add_common(cmd, o);
  interp->add_option("--target", o.target, "two-cosine|anisotropic|mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig cfg = resolve(o);
    if (*solve) return cmd_solve(cfg);
    if (*study) return cmd_study(cfg);
    if (*interp) return cmd_interpolate(cfg);
    return cmd_precond_stats(cfg);
  } catch (const error::ConfigError& e) {
    std::cerr << "quasispec: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "quasispec: " << e.what() << '\n';
    return kExitConfig;
  }
}
