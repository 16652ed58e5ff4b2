#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "quasispec/errors.hpp"

namespace quasispec {

/// Significant digits for round-trip numeric output.
inline constexpr int kExactDigits = 17;
/// Significant digits for plot-ready files.
inline constexpr int kPlotDigits = 8;

inline std::string format_double(double v, int digits = kExactDigits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

/// Writes through a sibling temporary and renames it into place, so readers
/// never observe a partial file.
template <typename Writer>
void write_atomically(const std::filesystem::path& path, Writer&& writer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::out | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    writer(os);
    os.flush();
    if (!os) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace quasispec
