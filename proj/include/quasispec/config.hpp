#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quasispec/core.hpp"
#include "quasispec/errors.hpp"
#include "quasispec/experiments.hpp"

namespace quasispec {

struct InterpolateSettings {
  std::string target = "two-cosine";  // two-cosine | anisotropic | mode
  std::size_t samples = 100;
  double decay_a = 3.0;
  double decay_b = 2.5;
  std::vector<std::int64_t> mode{1, 0};
  bool operator==(const InterpolateSettings&) const = default;
};

struct RunConfig {
  PotentialSpec potential;
  Resolution resolution{Method::iwfpm, {5}, {60}};
  double tol = 1e-10;
  std::size_t max_iter = 20000;
  std::size_t dof_cap = default_dof_cap();
  int stride = 0;  // 0: 1 in 1D, 5 otherwise
  std::string out = "out";
  std::size_t jobs = 1;
  std::vector<Resolution> sweep;
  std::optional<Resolution> reference;
  bool condition = false;
  InterpolateSettings interpolate;

  SolverSettings solver() const { return {tol, max_iter, dof_cap}; }

  void validate() const {
    if (!(tol > 0.0)) throw error::ConfigError("tol must be positive");
    if (max_iter == 0) throw error::ConfigError("max_iter must be positive");
    if (dof_cap == 0) throw error::ConfigError("dof_cap must be positive");
    if (stride < 0) throw error::ConfigError("stride must be nonnegative");
    if (jobs == 0) throw error::ConfigError("jobs must be positive");
    const int d = potential.dim();
    const int n = potential.lifted_dim();
    resolution.extents(d, n);
    for (const auto& r : sweep) r.extents(d, n);
    if (reference) reference->extents(d, n);
  }

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::vector<std::int64_t> read_extent(const nlohmann::json& j) {
  if (j.is_array()) return j.get<std::vector<std::int64_t>>();
  return {j.get<std::int64_t>()};
}

inline nlohmann::json write_extent(const std::vector<std::int64_t>& v) {
  if (v.size() == 1) return v[0];
  return v;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const Resolution& r) {
  j = nlohmann::json{{"method", std::string(to_string(r.method))},
                     {"K", detail::write_extent(r.K)},
                     {"L", detail::write_extent(r.L)}};
}

inline void from_json(const nlohmann::json& j, Resolution& r) {
  if (j.contains("method")) r.method = method_from_string(j.at("method").get<std::string>());
  if (j.contains("K")) r.K = detail::read_extent(j.at("K"));
  if (j.contains("L")) r.L = detail::read_extent(j.at("L"));
}

inline void to_json(nlohmann::json& j, const InterpolateSettings& s) {
  j = nlohmann::json{{"target", s.target}, {"samples", s.samples}, {"decay_a", s.decay_a},
                     {"decay_b", s.decay_b}, {"mode", s.mode}};
}

inline void from_json(const nlohmann::json& j, InterpolateSettings& s) {
  if (j.contains("target")) j.at("target").get_to(s.target);
  if (j.contains("samples")) j.at("samples").get_to(s.samples);
  if (j.contains("decay_a")) j.at("decay_a").get_to(s.decay_a);
  if (j.contains("decay_b")) j.at("decay_b").get_to(s.decay_b);
  if (j.contains("mode")) j.at("mode").get_to(s.mode);
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"potential", c.potential},
                     {"method", std::string(to_string(c.resolution.method))},
                     {"K", detail::write_extent(c.resolution.K)},
                     {"L", detail::write_extent(c.resolution.L)},
                     {"tol", c.tol},
                     {"max_iter", c.max_iter},
                     {"dof_cap", c.dof_cap},
                     {"stride", c.stride},
                     {"out", c.out},
                     {"jobs", c.jobs},
                     {"sweep", c.sweep},
                     {"condition", c.condition},
                     {"interpolate", c.interpolate}};
  if (c.reference) j["reference"] = *c.reference;
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  c = RunConfig{};
  if (j.contains("potential")) j.at("potential").get_to(c.potential);
  from_json(j, c.resolution);
  if (j.contains("tol")) j.at("tol").get_to(c.tol);
  if (j.contains("max_iter")) j.at("max_iter").get_to(c.max_iter);
  if (j.contains("dof_cap")) j.at("dof_cap").get_to(c.dof_cap);
  if (j.contains("stride")) j.at("stride").get_to(c.stride);
  if (j.contains("out")) j.at("out").get_to(c.out);
  if (j.contains("jobs")) j.at("jobs").get_to(c.jobs);
  if (j.contains("sweep")) {
    for (const auto& r : j.at("sweep")) {
      Resolution res = c.resolution;
      from_json(r, res);
      c.sweep.push_back(res);
    }
  }
  if (j.contains("reference")) {
    Resolution res = c.resolution;
    from_json(j.at("reference"), res);
    c.reference = res;
  }
  if (j.contains("condition")) j.at("condition").get_to(c.condition);
  if (j.contains("interpolate")) j.at("interpolate").get_to(c.interpolate);
}

/// Parses and validates; any malformed input surfaces as error::ConfigError.
inline RunConfig parse_config(const std::string& text) {
  try {
    RunConfig c = nlohmann::json::parse(text).get<RunConfig>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw error::ConfigError(e.what());
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw error::ConfigError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

inline std::string serialize_config(const RunConfig& c) { return nlohmann::json(c).dump(2); }

}  // namespace quasispec
