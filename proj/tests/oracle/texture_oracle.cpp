#include "texture_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include <Eigen/Dense>

namespace oracle {

int LevelImage::n_levels() const { return level.empty() ? 0 : *std::max_element(level.begin(), level.end()); }

LevelImage bin_image(int rows, int cols, const std::vector<double>& values, const std::vector<int>& roi, double width) {
  double lo = INFINITY;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (roi[i]) lo = std::min(lo, values[i]);
  LevelImage img{rows, cols, std::vector<int>(values.size(), 0)};
  for (std::size_t i = 0; i < values.size(); ++i)
    if (roi[i]) img.level[i] = static_cast<int>(std::floor((values[i] - lo) / width)) + 1;
  return img;
}

namespace {

struct Pixel {
  int r, c, a;
};

std::vector<Pixel> pixels(const LevelImage& img) {
  std::vector<Pixel> out;
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c)
      if (img.in(r, c)) out.push_back({r, c, img.at(r, c)});
  return out;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void join(int a, int b) { parent[find(a)] = find(b); }
};

// Components of same-level pixels linked by any of `steps`.
Sparse components(const LevelImage& img, const std::vector<std::pair<int, int>>& steps) {
  const auto px = pixels(img);
  UnionFind uf(static_cast<int>(px.size()));
  for (std::size_t i = 0; i < px.size(); ++i)
    for (std::size_t j = 0; j < px.size(); ++j)
      for (auto [dr, dc] : steps)
        if (px[j].r - px[i].r == dr && px[j].c - px[i].c == dc && px[i].a == px[j].a)
          uf.join(static_cast<int>(i), static_cast<int>(j));
  std::map<int, std::pair<int, int>> comp;  // root -> (level, size)
  for (std::size_t i = 0; i < px.size(); ++i) {
    auto& e = comp[uf.find(static_cast<int>(i))];
    e.first = px[i].a;
    e.second += 1;
  }
  Sparse out;
  for (const auto& [root, e] : comp) out[{e.first, e.second}] += 1.0;
  return out;
}

bool neighbours(const Pixel& x, const Pixel& y) {
  const int d = std::max(std::abs(x.r - y.r), std::abs(x.c - y.c));
  return d == 1;
}

double xlog2(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

double total(const Sparse& m) {
  double t = 0.0;
  for (const auto& [k, v] : m) t += v;
  return t;
}

// Shared run / zone / dependence statistics with size quantity j = key + shift.
struct Emphasis {
  double nz = 0, small = 0, large = 0, gln = 0, sn = 0, gvar = 0, svar = 0, ent = 0;
  double low = 0, high = 0, sl = 0, sh = 0, ll = 0, lh = 0;
};

Emphasis emphasis(const Sparse& m, int shift) {
  Emphasis e;
  e.nz = total(m);
  std::map<int, double> by_level, by_size;
  for (const auto& [k, v] : m) {
    by_level[k.first] += v;
    by_size[k.second + shift] += v;
  }
  double mu_i = 0.0, mu_j = 0.0;
  for (const auto& [k, v] : m) {
    mu_i += k.first * v / e.nz;
    mu_j += (k.second + shift) * v / e.nz;
  }
  for (const auto& [k, v] : m) {
    const double i = k.first, j = k.second + shift, p = v / e.nz;
    e.small += v / (j * j);
    e.large += v * j * j;
    e.low += v / (i * i);
    e.high += v * i * i;
    e.sl += v / (i * i * j * j);
    e.sh += v * i * i / (j * j);
    e.ll += v * j * j / (i * i);
    e.lh += v * i * i * j * j;
    e.gvar += p * (i - mu_i) * (i - mu_i);
    e.svar += p * (j - mu_j) * (j - mu_j);
    e.ent -= xlog2(p);
  }
  for (auto* x : {&e.small, &e.large, &e.low, &e.high, &e.sl, &e.sh, &e.ll, &e.lh}) *x /= e.nz;
  for (const auto& [k, v] : by_level) e.gln += v * v;
  for (const auto& [k, v] : by_size) e.sn += v * v;
  return e;
}

std::vector<double> run_like(const Sparse& m, double np) {
  const auto e = emphasis(m, 0);
  return {e.small,   e.large,  e.gln / e.nz, e.gln / (e.nz * e.nz), e.sn / e.nz, e.sn / (e.nz * e.nz),
          e.nz / np, e.gvar,   e.svar,       e.ent,                 e.low,       e.high,
          e.sl,      e.sh,     e.ll,         e.lh};
}

double mcc(const std::vector<std::vector<double>>& p, const std::vector<double>& px, const std::vector<double>& py) {
  std::vector<int> keep_i, keep_k;
  for (std::size_t i = 0; i < px.size(); ++i)
    if (px[i] > 0.0) keep_i.push_back(static_cast<int>(i));
  for (std::size_t k = 0; k < py.size(); ++k)
    if (py[k] > 0.0) keep_k.push_back(static_cast<int>(k));
  if (keep_i.size() < 2 || keep_k.size() < 2) return 0.0;
  const int n = static_cast<int>(keep_i.size());
  // Q(i, j) = sum_k p(i, k) p(j, k) / (px(i) py(k)), not symmetric
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int k : keep_k)
        q(a, b) += p[keep_i[a]][k] * p[keep_i[b]][k] / (px[keep_i[a]] * py[k]);
  Eigen::EigenSolver<Eigen::MatrixXd> es(q, false);
  std::vector<double> ev;
  for (int a = 0; a < n; ++a) ev.push_back(es.eigenvalues()(a).real());
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return std::sqrt(std::max(0.0, ev[1]));
}

}  // namespace

Sparse glcm(const LevelImage& img, int dr, int dc) {
  const auto px = pixels(img);
  Sparse out;
  for (const auto& x : px)
    for (const auto& y : px)
      if (y.r - x.r == dr && y.c - x.c == dc) {
        out[{x.a, y.a}] += 1.0;
        out[{y.a, x.a}] += 1.0;
      }
  return out;
}

Sparse glrlm(const LevelImage& img, int dr, int dc) { return components(img, {{dr, dc}}); }

Sparse glszm(const LevelImage& img) {
  return components(img, {{0, 1}, {1, 0}, {1, 1}, {1, -1}, {0, -1}, {-1, 0}, {-1, -1}, {-1, 1}});
}

Sparse gldm(const LevelImage& img) {
  const auto px = pixels(img);
  Sparse out;
  for (const auto& x : px) {
    int k = 0;
    for (const auto& y : px) k += neighbours(x, y) && y.a == x.a;
    out[{x.a, k}] += 1.0;
  }
  return out;
}

Ngtdm ngtdm(const LevelImage& img) {
  const int ng = img.n_levels();
  Ngtdm m{std::vector<double>(ng, 0.0), std::vector<double>(ng, 0.0), std::vector<double>(ng, 0.0)};
  const auto px = pixels(img);
  for (const auto& x : px) {
    double sum = 0.0;
    int cnt = 0;
    for (const auto& y : px)
      if (neighbours(x, y)) {
        sum += y.a;
        ++cnt;
      }
    m.n[x.a - 1] += 1.0;
    if (cnt > 0) m.s[x.a - 1] += std::abs(x.a - sum / cnt);
  }
  for (int a = 0; a < ng; ++a) m.p[a] = m.n[a] / static_cast<double>(px.size());
  return m;
}

std::vector<double> glcm_features(const Sparse& counts, int ng) {
  const double t = total(counts);
  std::vector<std::vector<double>> p(ng, std::vector<double>(ng, 0.0));
  for (const auto& [k, v] : counts) p[k.first - 1][k.second - 1] = v / t;
  std::vector<double> px(ng, 0.0), py(ng, 0.0);
  for (int i = 0; i < ng; ++i)
    for (int j = 0; j < ng; ++j) {
      px[i] += p[i][j];
      py[j] += p[i][j];
    }
  auto lv = [](int idx) { return static_cast<double>(idx + 1); };
  double mux = 0, muy = 0;
  for (int i = 0; i < ng; ++i) {
    mux += lv(i) * px[i];
    muy += lv(i) * py[i];
  }
  double sx = 0, sy = 0;
  for (int i = 0; i < ng; ++i) {
    sx += px[i] * (lv(i) - mux) * (lv(i) - mux);
    sy += py[i] * (lv(i) - muy) * (lv(i) - muy);
  }
  sx = std::sqrt(sx);
  sy = std::sqrt(sy);

  std::map<int, double> psum, pdiff;
  for (int i = 0; i < ng; ++i)
    for (int j = 0; j < ng; ++j) {
      psum[i + j + 2] += p[i][j];
      pdiff[std::abs(i - j)] += p[i][j];
    }

  double f[24] = {};
  double hxy = 0, hxy1 = 0, hxy2 = 0, hx = 0, hy = 0;
  const double ngd = ng;
  for (int i = 0; i < ng; ++i) {
    hx -= xlog2(px[i]);
    hy -= xlog2(py[i]);
    for (int j = 0; j < ng; ++j) {
      const double v = p[i][j], a = lv(i), b = lv(j);
      const double c = a + b - mux - muy;
      f[0] += a * b * v;
      f[2] += std::pow(c, 4) * v;
      f[3] += std::pow(c, 3) * v;
      f[4] += c * c * v;
      f[5] += (a - b) * (a - b) * v;
      f[10] += v * v;
      hxy -= xlog2(v);
      if (v > 0) hxy1 -= v * std::log2(px[i] * py[j]);
      hxy2 -= xlog2(px[i] * py[j]);
      f[14] += v / (1 + (a - b) * (a - b));
      f[15] += v / (1 + (a - b) * (a - b) / (ngd * ngd));
      f[16] += v / (1 + std::abs(a - b));
      f[17] += v / (1 + std::abs(a - b) / ngd);
      if (i != j) f[18] += v / ((a - b) * (a - b));
      f[19] = std::max(f[19], v);
      f[22] += (a - mux) * (a - mux) * v;
    }
  }
  f[1] = mux;
  f[6] = sx * sy > 0 ? (f[0] - mux * muy) / (sx * sy) : 0.0;
  for (const auto& [k, v] : pdiff) {
    f[7] += k * v;
    f[8] -= xlog2(v);
  }
  for (const auto& [k, v] : pdiff) f[9] += (k - f[7]) * (k - f[7]) * v;
  f[11] = hxy;
  f[12] = std::max(hx, hy) > 0 ? (hxy - hxy1) / std::max(hx, hy) : 0.0;
  f[13] = hxy2 > hxy ? std::sqrt(1 - std::exp(-2 * (hxy2 - hxy))) : 0.0;
  for (const auto& [k, v] : psum) {
    f[20] += k * v;
    f[21] -= xlog2(v);
  }
  f[23] = mcc(p, px, py);
  return std::vector<double>(f, f + 24);
}

std::vector<double> glrlm_features(const Sparse& counts) {
  double np = 0.0;
  for (const auto& [k, v] : counts) np += k.second * v;
  return run_like(counts, np);
}

std::vector<double> glszm_features(const Sparse& counts) { return glrlm_features(counts); }

std::vector<double> gldm_features(const Sparse& counts) {
  const auto e = emphasis(counts, 1);
  return {e.small, e.large, e.gln / e.nz, e.sn / e.nz, e.sn / (e.nz * e.nz), e.gvar, e.svar,
          e.ent,   e.low,   e.high,       e.sl,        e.sh,                  e.ll,   e.lh};
}

std::vector<double> ngtdm_features(const Ngtdm& m) {
  const int ng = static_cast<int>(m.n.size());
  const double nv = std::accumulate(m.n.begin(), m.n.end(), 0.0);
  const double s_sum = std::accumulate(m.s.begin(), m.s.end(), 0.0);
  double ps = 0.0;
  std::vector<int> present;
  for (int i = 0; i < ng; ++i) {
    ps += m.p[i] * m.s[i];
    if (m.p[i] > 0) present.push_back(i);
  }
  const double ngp = static_cast<double>(present.size());
  double con = 0, busy = 0, cplx = 0, str = 0;
  for (int i : present)
    for (int j : present) {
      const double a = i + 1, b = j + 1;
      con += m.p[i] * m.p[j] * (a - b) * (a - b);
      busy += std::abs(a * m.p[i] - b * m.p[j]);
      cplx += std::abs(a - b) * (m.p[i] * m.s[i] + m.p[j] * m.s[j]) / (m.p[i] + m.p[j]);
      str += (m.p[i] + m.p[j]) * (a - b) * (a - b);
    }
  return {ps == 0.0 ? 1e6 : 1.0 / ps,
          ngp > 1 ? con / (ngp * (ngp - 1)) * s_sum / nv : 0.0,
          busy == 0.0 ? 0.0 : ps / busy,
          cplx / nv,
          s_sum == 0.0 ? 0.0 : str / s_sum};
}

std::vector<double> texture_features(const LevelImage& img) {
  const int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  std::vector<double> out;

  std::vector<double> co(24, 0.0);
  int used = 0;
  for (const auto& d : dirs) {
    const auto m = glcm(img, d[0], d[1]);
    if (m.empty()) continue;
    const auto f = glcm_features(m, img.n_levels());
    for (int i = 0; i < 24; ++i) co[i] += f[i];
    ++used;
  }
  if (used == 0) {
    co = glcm_features(Sparse{{{1, 1}, 1.0}}, 1);
    used = 1;
  }
  for (double v : co) out.push_back(v / used);

  std::vector<double> rl(16, 0.0);
  for (const auto& d : dirs) {
    const auto f = glrlm_features(glrlm(img, d[0], d[1]));
    for (int i = 0; i < 16; ++i) rl[i] += f[i];
  }
  for (double v : rl) out.push_back(v / 4.0);

  for (double v : glszm_features(glszm(img))) out.push_back(v);
  for (double v : ngtdm_features(ngtdm(img))) out.push_back(v);
  for (double v : gldm_features(gldm(img))) out.push_back(v);
  return out;
}

}  // namespace oracle
