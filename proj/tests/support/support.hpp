#pragma once

// Shared test helpers: scratch directories and small random generators.
// Generators use std::mt19937_64 so they stay independent of the library RNG.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "autorad/grid.hpp"

namespace testsupport {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("autorad-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Gen {
  std::mt19937_64 eng;
  explicit Gen(std::uint64_t seed) : eng(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(eng); }
  bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }
};

// Random ROI on a rows x cols grid with at least one foreground pixel.
inline autorad::MaskGrid random_roi(Gen& g, int rows, int cols, double density) {
  autorad::MaskGrid m(rows, cols, 0);
  for (auto& v : m.values()) v = g.coin(density) ? 1 : 0;
  m(g.integer(0, rows - 1), g.integer(0, cols - 1)) = 1;
  return m;
}

// Integer-valued image whose in-ROI bins (width 25) span at most `levels` levels.
inline autorad::ImageGrid random_levels_image(Gen& g, int rows, int cols, int levels, double base = 0.0) {
  autorad::ImageGrid img(rows, cols, 0.0);
  for (auto& v : img.values()) v = base + 25.0 * g.integer(0, levels - 1) + g.integer(0, 24);
  return img;
}

inline double rel_err(double a, double b, double floor = 1.0) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace testsupport
