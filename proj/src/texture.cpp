#include "autorad/texture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace autorad {

double NamedVector::at(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  throw std::out_of_range("no feature named " + std::string(name));
}

const char* matrix_kind_name(MatrixKind k) {
  switch (k) {
    case MatrixKind::glcm: return "glcm";
    case MatrixKind::glrlm: return "glrlm";
    case MatrixKind::glszm: return "glszm";
    case MatrixKind::ngtdm: return "ngtdm";
    case MatrixKind::gldm: return "gldm";
  }
  return "?";
}

double TextureMatrix::total() const {
  if (kind == MatrixKind::ngtdm) {
    double n = 0.0;
    for (int a = 1; a <= n_levels; ++a) n += at(a, 0);
    return n;
  }
  double s = 0.0;
  for (double v : counts) s += v;
  return s;
}

std::vector<double> TextureMatrix::normalized() const {
  if (kind == MatrixKind::ngtdm) {
    std::vector<double> p(n_levels);
    for (int a = 1; a <= n_levels; ++a) p[a - 1] = at(a, 1);
    return p;
  }
  const double t = total();
  std::vector<double> p(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) p[i] = counts[i] / t;
  return p;
}

namespace {

bool inside(const DiscretizedROI& d, int r, int c) { return d.roi.in_bounds(r, c) && d.roi(r, c) != 0; }

void require_roi(const DiscretizedROI& d, const char* who) {
  if (d.n_levels < 1 || d.pixel_count() == 0) throw ValidationError(std::string(who) + ": empty ROI");
}

TextureMatrix make(MatrixKind kind, int n_levels, int n_cols) {
  TextureMatrix m;
  m.kind = kind;
  m.n_levels = n_levels;
  m.n_cols = n_cols;
  m.counts.assign(static_cast<std::size_t>(n_levels) * n_cols, 0.0);
  return m;
}

}  // namespace

TextureMatrix glcm(const DiscretizedROI& d, Offset offset, bool symmetric) {
  require_roi(d, "glcm");
  if (offset.dr == 0 && offset.dc == 0) throw ValidationError("glcm: zero offset");
  auto m = make(MatrixKind::glcm, d.n_levels, d.n_levels);
  m.params.offset = offset;
  m.params.symmetric = symmetric;
  double pairs = 0.0;
  for (int r = 0; r < d.grid.rows(); ++r) {
    for (int c = 0; c < d.grid.cols(); ++c) {
      if (!inside(d, r, c) || !inside(d, r + offset.dr, c + offset.dc)) continue;
      const int a = d.grid(r, c);
      const int b = d.grid(r + offset.dr, c + offset.dc);
      m.at(a, b - 1) += 1.0;
      if (symmetric) m.at(b, a - 1) += 1.0;
      pairs += 1.0;
    }
  }
  if (pairs == 0.0) throw ValidationError("glcm: no valid pairs");
  return m;
}

TextureMatrix glrlm(const DiscretizedROI& d, Offset direction) {
  require_roi(d, "glrlm");
  if (direction.dr == 0 && direction.dc == 0) throw ValidationError("glrlm: zero direction");
  const int max_run = std::max(d.grid.rows(), d.grid.cols());
  auto m = make(MatrixKind::glrlm, d.n_levels, max_run);
  m.params.offset = direction;
  int longest = 0;
  for (int r = 0; r < d.grid.rows(); ++r) {
    for (int c = 0; c < d.grid.cols(); ++c) {
      if (!inside(d, r, c)) continue;
      const int a = d.grid(r, c);
      const int pr = r - direction.dr, pc = c - direction.dc;
      if (inside(d, pr, pc) && d.grid(pr, pc) == a) continue;  // not a run start
      int len = 1;
      int nr = r + direction.dr, nc = c + direction.dc;
      while (inside(d, nr, nc) && d.grid(nr, nc) == a) {
        ++len;
        nr += direction.dr;
        nc += direction.dc;
      }
      m.at(a, len - 1) += 1.0;
      longest = std::max(longest, len);
    }
  }
  // trim unused run-length columns
  TextureMatrix t = make(MatrixKind::glrlm, d.n_levels, longest);
  t.params = m.params;
  for (int a = 1; a <= d.n_levels; ++a)
    for (int l = 0; l < longest; ++l) t.at(a, l) = m.at(a, l);
  return t;
}

TextureMatrix glszm(const DiscretizedROI& d, int connectivity) {
  require_roi(d, "glszm");
  if (connectivity != 4 && connectivity != 8) throw ValidationError("glszm: connectivity must be 4 or 8");
  const int rows = d.grid.rows(), cols = d.grid.cols();
  Grid2D<int> visited(rows, cols, 0);
  std::vector<int> sizes_levels;  // pairs (level, size)
  std::vector<std::pair<int, int>> stack;
  int largest = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!inside(d, r, c) || visited(r, c)) continue;
      const int a = d.grid(r, c);
      int size = 0;
      stack.assign(1, {r, c});
      visited(r, c) = 1;
      while (!stack.empty()) {
        const auto [cr, cc] = stack.back();
        stack.pop_back();
        ++size;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (connectivity == 4 && dr != 0 && dc != 0) continue;
            const int nr = cr + dr, nc = cc + dc;
            if (inside(d, nr, nc) && !visited(nr, nc) && d.grid(nr, nc) == a) {
              visited(nr, nc) = 1;
              stack.emplace_back(nr, nc);
            }
          }
        }
      }
      sizes_levels.push_back(a);
      sizes_levels.push_back(size);
      largest = std::max(largest, size);
    }
  }
  auto m = make(MatrixKind::glszm, d.n_levels, largest);
  m.params.connectivity = connectivity;
  for (std::size_t i = 0; i < sizes_levels.size(); i += 2) m.at(sizes_levels[i], sizes_levels[i + 1] - 1) += 1.0;
  return m;
}

TextureMatrix ngtdm(const DiscretizedROI& d, int distance) {
  require_roi(d, "ngtdm");
  if (distance < 1) throw ValidationError("ngtdm: distance must be positive");
  auto m = make(MatrixKind::ngtdm, d.n_levels, 3);
  m.params.distance = distance;
  double total = 0.0;
  for (int r = 0; r < d.grid.rows(); ++r) {
    for (int c = 0; c < d.grid.cols(); ++c) {
      if (!inside(d, r, c)) continue;
      const int a = d.grid(r, c);
      double sum = 0.0;
      int n = 0;
      for (int dr = -distance; dr <= distance; ++dr) {
        for (int dc = -distance; dc <= distance; ++dc) {
          if ((dr == 0 && dc == 0) || !inside(d, r + dr, c + dc)) continue;
          sum += d.grid(r + dr, c + dc);
          ++n;
        }
      }
      m.at(a, 0) += 1.0;
      if (n > 0) m.at(a, 2) += std::abs(a - sum / n);
      total += 1.0;
    }
  }
  for (int a = 1; a <= d.n_levels; ++a) m.at(a, 1) = m.at(a, 0) / total;
  return m;
}

TextureMatrix gldm(const DiscretizedROI& d, double alpha, int distance) {
  require_roi(d, "gldm");
  if (distance < 1) throw ValidationError("gldm: distance must be positive");
  if (!(alpha >= 0.0)) throw ValidationError("gldm: alpha must be non-negative");
  const int side = 2 * distance + 1;
  auto m = make(MatrixKind::gldm, d.n_levels, side * side);
  m.params.distance = distance;
  m.params.alpha = alpha;
  for (int r = 0; r < d.grid.rows(); ++r) {
    for (int c = 0; c < d.grid.cols(); ++c) {
      if (!inside(d, r, c)) continue;
      const int a = d.grid(r, c);
      int k = 0;
      for (int dr = -distance; dr <= distance; ++dr) {
        for (int dc = -distance; dc <= distance; ++dc) {
          if ((dr == 0 && dc == 0) || !inside(d, r + dr, c + dc)) continue;
          if (std::abs(d.grid(r + dr, c + dc) - a) <= alpha) ++k;
        }
      }
      m.at(a, k) += 1.0;
    }
  }
  return m;
}

namespace {

constexpr std::array<std::string_view, 24> kGlcmNames{
    "Autocorrelation", "JointAverage",   "ClusterProminence", "ClusterShade",    "ClusterTendency",
    "Contrast",        "Correlation",    "DifferenceAverage", "DifferenceEntropy", "DifferenceVariance",
    "JointEnergy",     "JointEntropy",   "Imc1",              "Imc2",            "Idm",
    "Idmn",            "Id",             "Idn",               "InverseVariance", "MaximumProbability",
    "SumAverage",      "SumEntropy",     "SumSquares",        "MCC"};

constexpr std::array<std::string_view, 16> kGlrlmNames{
    "ShortRunEmphasis",          "LongRunEmphasis",
    "GrayLevelNonUniformity",    "GrayLevelNonUniformityNormalized",
    "RunLengthNonUniformity",    "RunLengthNonUniformityNormalized",
    "RunPercentage",             "GrayLevelVariance",
    "RunVariance",               "RunEntropy",
    "LowGrayLevelRunEmphasis",   "HighGrayLevelRunEmphasis",
    "ShortRunLowGrayLevelEmphasis", "ShortRunHighGrayLevelEmphasis",
    "LongRunLowGrayLevelEmphasis",  "LongRunHighGrayLevelEmphasis"};

constexpr std::array<std::string_view, 16> kGlszmNames{
    "SmallAreaEmphasis",          "LargeAreaEmphasis",
    "GrayLevelNonUniformity",     "GrayLevelNonUniformityNormalized",
    "SizeZoneNonUniformity",      "SizeZoneNonUniformityNormalized",
    "ZonePercentage",             "GrayLevelVariance",
    "ZoneVariance",               "ZoneEntropy",
    "LowGrayLevelZoneEmphasis",   "HighGrayLevelZoneEmphasis",
    "SmallAreaLowGrayLevelEmphasis", "SmallAreaHighGrayLevelEmphasis",
    "LargeAreaLowGrayLevelEmphasis", "LargeAreaHighGrayLevelEmphasis"};

constexpr std::array<std::string_view, 5> kNgtdmNames{"Coarseness", "Contrast", "Busyness", "Complexity",
                                                      "Strength"};

constexpr std::array<std::string_view, 14> kGldmNames{
    "SmallDependenceEmphasis",          "LargeDependenceEmphasis",
    "GrayLevelNonUniformity",           "DependenceNonUniformity",
    "DependenceNonUniformityNormalized", "GrayLevelVariance",
    "DependenceVariance",               "DependenceEntropy",
    "LowGrayLevelEmphasis",             "HighGrayLevelEmphasis",
    "SmallDependenceLowGrayLevelEmphasis", "SmallDependenceHighGrayLevelEmphasis",
    "LargeDependenceLowGrayLevelEmphasis", "LargeDependenceHighGrayLevelEmphasis"};

// -p log2 p with 0 log 0 = 0
double plog2(double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; }

// Largest-but-one singular value of B = Dx^-1/2 P Dy^-1/2 restricted to
// non-empty rows/columns; its square is the second eigenvalue of Q.
double maximal_correlation(const std::vector<double>& p, int ng, const std::vector<double>& px,
                           const std::vector<double>& py) {
  std::vector<int> rows, cols;
  for (int i = 0; i < ng; ++i) {
    if (px[i] > 0.0) rows.push_back(i);
    if (py[i] > 0.0) cols.push_back(i);
  }
  if (rows.size() < 2 || cols.size() < 2) return 0.0;
  Eigen::MatrixXd b(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < cols.size(); ++k)
      b(i, k) = p[rows[i] * ng + cols[k]] / std::sqrt(px[rows[i]] * py[cols[k]]);
  Eigen::MatrixXd q = b * b.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();  // ascending
  const double second = ev(ev.size() - 2);
  return std::sqrt(std::max(0.0, second));
}

std::vector<double> glcm_values(const TextureMatrix& m) {
  const int ng = m.n_levels;
  const auto p = m.normalized();
  std::vector<double> px(ng, 0.0), py(ng, 0.0), sum_dist(2 * ng + 1, 0.0), diff_dist(ng, 0.0);
  double mux = 0.0, muy = 0.0;
  for (int i = 1; i <= ng; ++i) {
    for (int j = 1; j <= ng; ++j) {
      const double v = p[(i - 1) * ng + (j - 1)];
      px[i - 1] += v;
      py[j - 1] += v;
      sum_dist[i + j] += v;
      diff_dist[std::abs(i - j)] += v;
    }
  }
  for (int i = 1; i <= ng; ++i) {
    mux += i * px[i - 1];
    muy += i * py[i - 1];
  }
  double varx = 0.0, vary = 0.0, hx = 0.0, hy = 0.0;
  for (int i = 1; i <= ng; ++i) {
    varx += (i - mux) * (i - mux) * px[i - 1];
    vary += (i - muy) * (i - muy) * py[i - 1];
    hx += plog2(px[i - 1]);
    hy += plog2(py[i - 1]);
  }

  double autocorr = 0, prom = 0, shade = 0, tend = 0, contrast = 0, energy = 0, hxy = 0, hxy1 = 0, hxy2 = 0;
  double idm = 0, idmn = 0, id = 0, idn = 0, invvar = 0, maxp = 0, sumsq = 0;
  const double ng2 = static_cast<double>(ng) * ng;
  for (int i = 1; i <= ng; ++i) {
    for (int j = 1; j <= ng; ++j) {
      const double v = p[(i - 1) * ng + (j - 1)];
      const double pp = px[i - 1] * py[j - 1];
      if (pp > 0.0) hxy2 -= pp * std::log2(pp);
      if (v == 0.0) continue;
      const double s = i + j - mux - muy;
      const double dij = i - j;
      const double adij = std::abs(dij);
      autocorr += i * j * v;
      prom += s * s * s * s * v;
      shade += s * s * s * v;
      tend += s * s * v;
      contrast += dij * dij * v;
      energy += v * v;
      hxy -= v * std::log2(v);
      hxy1 -= v * std::log2(pp);
      idm += v / (1.0 + dij * dij);
      idmn += v / (1.0 + dij * dij / ng2);
      id += v / (1.0 + adij);
      idn += v / (1.0 + adij / ng);
      if (i != j) invvar += v / (dij * dij);
      maxp = std::max(maxp, v);
      sumsq += (i - mux) * (i - mux) * v;
    }
  }
  const double sd = std::sqrt(varx) * std::sqrt(vary);
  const double correlation = sd > 0.0 ? (autocorr - mux * muy) / sd : 0.0;

  double diff_avg = 0, diff_ent = 0, diff_var = 0;
  for (int k = 0; k < ng; ++k) {
    diff_avg += k * diff_dist[k];
    diff_ent += plog2(diff_dist[k]);
  }
  for (int k = 0; k < ng; ++k) diff_var += (k - diff_avg) * (k - diff_avg) * diff_dist[k];
  double sum_avg = 0, sum_ent = 0;
  for (int k = 2; k <= 2 * ng; ++k) {
    sum_avg += k * sum_dist[k];
    sum_ent += plog2(sum_dist[k]);
  }
  const double hmax = std::max(hx, hy);
  const double imc1 = hmax > 0.0 ? (hxy - hxy1) / hmax : 0.0;
  const double imc2 = hxy2 > hxy ? std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - hxy)))) : 0.0;
  const double mcc = maximal_correlation(p, ng, px, py);

  return {autocorr, mux,    prom,   shade, tend,   contrast, correlation, diff_avg, diff_ent, diff_var,
          energy,   hxy,    imc1,   imc2,  idm,    idmn,     id,          idn,      invvar,   maxp,
          sum_avg,  sum_ent, sumsq, mcc};
}

// Shared by GLRLM / GLSZM / GLDM: rows are gray levels, columns a size-like
// quantity j = column + j_offset.
struct SizeStats {
  double total = 0, small = 0, large = 0, gln = 0, sn = 0, gvar = 0, svar = 0, ent = 0;
  double low = 0, high = 0, small_low = 0, small_high = 0, large_low = 0, large_high = 0;
};

SizeStats size_stats(const TextureMatrix& m, int j_offset) {
  SizeStats s;
  s.total = m.total();
  const auto p = m.normalized();
  std::vector<double> row_sum(m.n_levels, 0.0), col_sum(m.n_cols, 0.0);
  double mu_i = 0, mu_j = 0;
  for (int a = 1; a <= m.n_levels; ++a) {
    for (int c = 0; c < m.n_cols; ++c) {
      const double v = p[(a - 1) * m.n_cols + c];
      row_sum[a - 1] += m.at(a, c);
      col_sum[c] += m.at(a, c);
      mu_i += a * v;
      mu_j += (c + j_offset) * v;
    }
  }
  for (int a = 1; a <= m.n_levels; ++a) {
    const double i2 = static_cast<double>(a) * a;
    for (int c = 0; c < m.n_cols; ++c) {
      const double v = p[(a - 1) * m.n_cols + c];
      if (v == 0.0) continue;
      const double j = c + j_offset;
      const double j2 = j * j;
      s.small += v / j2;
      s.large += v * j2;
      s.gvar += (a - mu_i) * (a - mu_i) * v;
      s.svar += (j - mu_j) * (j - mu_j) * v;
      s.ent -= v * std::log2(v);
      s.low += v / i2;
      s.high += v * i2;
      s.small_low += v / (i2 * j2);
      s.small_high += v * i2 / j2;
      s.large_low += v * j2 / i2;
      s.large_high += v * i2 * j2;
    }
  }
  for (double r : row_sum) s.gln += r * r;
  for (double c : col_sum) s.sn += c * c;
  s.gln /= s.total;
  s.sn /= s.total;
  return s;
}

std::vector<double> run_zone_values(const TextureMatrix& m, double pixels) {
  const auto s = size_stats(m, 1);
  return {s.small,          s.large,          s.gln,       s.gln / s.total, s.sn,      s.sn / s.total,
          s.total / pixels, s.gvar,           s.svar,      s.ent,           s.low,     s.high,
          s.small_low,      s.small_high,     s.large_low, s.large_high};
}

// Pixel count of a GLRLM: every pixel belongs to exactly one run.
double run_pixels(const TextureMatrix& m) {
  double n = 0.0;
  for (int a = 1; a <= m.n_levels; ++a)
    for (int c = 0; c < m.n_cols; ++c) n += (c + 1) * m.at(a, c);
  return n;
}

std::vector<double> gldm_values(const TextureMatrix& m) {
  // dependence size j = k + 1 (neighbour count plus the centre pixel)
  const auto s = size_stats(m, 1);
  return {s.small, s.large,     s.gln,        s.sn,         s.sn / s.total, s.gvar,      s.svar,
          s.ent,   s.low,       s.high,       s.small_low,  s.small_high,   s.large_low, s.large_high};
}

std::vector<double> ngtdm_values(const TextureMatrix& m) {
  const int ng = m.n_levels;
  double n_total = 0.0, ps = 0.0, s_total = 0.0;
  int ngp = 0;
  for (int a = 1; a <= ng; ++a) {
    n_total += m.at(a, 0);
    ps += m.at(a, 1) * m.at(a, 2);
    s_total += m.at(a, 2);
    ngp += m.at(a, 1) > 0.0;
  }
  double contrast_sum = 0.0, busy_den = 0.0, complexity = 0.0, strength_num = 0.0;
  for (int i = 1; i <= ng; ++i) {
    const double pi = m.at(i, 1), si = m.at(i, 2);
    if (pi == 0.0) continue;
    for (int j = 1; j <= ng; ++j) {
      const double pj = m.at(j, 1), sj = m.at(j, 2);
      if (pj == 0.0) continue;
      const double d = i - j;
      contrast_sum += pi * pj * d * d;
      busy_den += std::abs(i * pi - j * pj);
      complexity += std::abs(d) * (pi * si + pj * sj) / (pi + pj);
      strength_num += (pi + pj) * d * d;
    }
  }
  const double coarseness = ps > 0.0 ? 1.0 / ps : 1.0e6;
  const double contrast = ngp > 1 ? contrast_sum / (static_cast<double>(ngp) * (ngp - 1)) * (s_total / n_total) : 0.0;
  const double busyness = busy_den > 0.0 ? ps / busy_den : 0.0;
  complexity /= n_total;
  const double strength = s_total > 0.0 ? strength_num / s_total : 0.0;
  return {coarseness, contrast, busyness, complexity, strength};
}

}  // namespace

std::span<const std::string_view> feature_names(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::glcm: return kGlcmNames;
    case MatrixKind::glrlm: return kGlrlmNames;
    case MatrixKind::glszm: return kGlszmNames;
    case MatrixKind::ngtdm: return kNgtdmNames;
    case MatrixKind::gldm: return kGldmNames;
  }
  return {};
}

std::vector<double> matrix_feature_values(const TextureMatrix& m) {
  if (m.n_levels < 1 || m.counts.size() != static_cast<std::size_t>(m.n_levels) * m.n_cols || !(m.total() > 0.0)) {
    throw ValidationError(std::string("matrix_features: invalid ") + matrix_kind_name(m.kind) + " matrix");
  }
  switch (m.kind) {
    case MatrixKind::glcm: return glcm_values(m);
    case MatrixKind::glrlm: return run_zone_values(m, run_pixels(m));
    case MatrixKind::glszm: {
      double pixels = 0.0;
      for (int a = 1; a <= m.n_levels; ++a)
        for (int c = 0; c < m.n_cols; ++c) pixels += (c + 1) * m.at(a, c);
      return run_zone_values(m, pixels);
    }
    case MatrixKind::ngtdm: return ngtdm_values(m);
    case MatrixKind::gldm: return gldm_values(m);
  }
  return {};
}

NamedVector matrix_features(const TextureMatrix& m) { return matrix_features(std::span<const TextureMatrix>(&m, 1)); }

NamedVector matrix_features(std::span<const TextureMatrix> matrices) {
  if (matrices.empty()) throw ValidationError("matrix_features: no matrices");
  const auto kind = matrices.front().kind;
  const auto names = feature_names(kind);
  std::vector<double> mean(names.size(), 0.0);
  for (const auto& m : matrices) {
    if (m.kind != kind) throw ValidationError("matrix_features: mixed matrix kinds");
    const auto v = matrix_feature_values(m);
    for (std::size_t i = 0; i < v.size(); ++i) mean[i] += v[i];
  }
  NamedVector out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    out.push(std::string(matrix_kind_name(kind)) + "::" + std::string(names[i]),
             mean[i] / static_cast<double>(matrices.size()));
  }
  return out;
}

NamedVector texture_features(const DiscretizedROI& d) {
  require_roi(d, "texture_features");
  NamedVector out;
  auto append = [&out](const NamedVector& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out.push(v.names[i], v.values[i]);
  };

  std::vector<TextureMatrix> co;
  for (const auto& off : kDefaultDirections) {
    try {
      co.push_back(glcm(d, off, true));
    } catch (const ValidationError&) {
      // no pair along this offset
    }
  }
  if (co.empty()) {
    TextureMatrix single = make(MatrixKind::glcm, 1, 1);
    single.counts[0] = 1.0;
    co.push_back(single);
  }
  append(matrix_features(co));

  std::vector<TextureMatrix> runs;
  for (const auto& dir : kDefaultDirections) runs.push_back(glrlm(d, dir));
  append(matrix_features(runs));
  append(matrix_features(glszm(d, 8)));
  append(matrix_features(ngtdm(d, 1)));
  append(matrix_features(gldm(d, 0.0, 1)));
  return out;
}

}  // namespace autorad
