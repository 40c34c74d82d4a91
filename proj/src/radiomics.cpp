#include "autorad/radiomics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "autorad/preprocess.hpp"
#include "io_util.hpp"

namespace autorad {

namespace {

constexpr std::array<std::string_view, kFirstOrderFeatureCount> kFirstOrderNames{
    "Mean",         "Median",       "Minimum",    "Maximum",
    "Range",        "Variance",     "Skewness",   "Kurtosis",
    "Energy",       "Entropy",      "MeanAbsoluteDeviation", "RootMeanSquared",
    "Uniformity",   "10Percentile", "90Percentile", "InterquartileRange",
    "RobustMeanAbsoluteDeviation", "TotalEnergy"};

constexpr std::array<ShiftBehavior, kFirstOrderFeatureCount> kFirstOrderShift{
    ShiftBehavior::translates, ShiftBehavior::translates, ShiftBehavior::translates, ShiftBehavior::translates,
    ShiftBehavior::invariant,  ShiftBehavior::invariant,  ShiftBehavior::invariant,  ShiftBehavior::invariant,
    ShiftBehavior::varies,     ShiftBehavior::invariant,  ShiftBehavior::invariant,  ShiftBehavior::varies,
    ShiftBehavior::invariant,  ShiftBehavior::translates, ShiftBehavior::translates, ShiftBehavior::invariant,
    ShiftBehavior::invariant,  ShiftBehavior::varies};

constexpr std::array<std::string_view, kShapeFeatureCount> kShapeNames{
    "PixelSurface",    "Perimeter",       "PerimeterSurfaceRatio", "Sphericity", "EquivalentDiameter",
    "MajorAxisLength", "MinorAxisLength", "Elongation",            "MaximumDiameter", "Extent"};

// numpy-style linear interpolation on sorted data
double percentile(const std::vector<double>& sorted, double q) {
  const double pos = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> roi_values(const ImageGrid& slice, const MaskGrid& roi) {
  if (slice.rows() != roi.rows() || slice.cols() != roi.cols()) {
    throw ValidationError("ROI shape differs from slice shape");
  }
  std::vector<double> v;
  for (std::size_t i = 0; i < roi.size(); ++i)
    if (roi.values()[i]) v.push_back(slice.values()[i]);
  if (v.empty()) throw ValidationError("empty ROI");
  return v;
}

}  // namespace

NamedVector firstorder_features(const ImageGrid& slice, const MaskGrid& roi, double bin_width, double pixel_volume) {
  auto x = roi_values(slice, roi);
  const double n = static_cast<double>(x.size());
  double sum = 0.0, energy = 0.0;
  for (double v : x) {
    sum += v;
    energy += v * v;
  }
  const double mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0, mad = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
    mad += std::abs(d);
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  mad /= n;
  const double skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  const double kurt = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;

  const auto bins = discretize_fixed_width(slice, roi, bin_width);
  std::vector<double> hist(bins.n_levels, 0.0);
  for (std::size_t i = 0; i < roi.size(); ++i)
    if (roi.values()[i]) hist[bins.grid.values()[i] - 1] += 1.0;
  double entropy = 0.0, uniformity = 0.0;
  for (double h : hist) {
    const double p = h / n;
    if (p > 0.0) entropy -= p * std::log2(p);
    uniformity += p * p;
  }

  std::sort(x.begin(), x.end());
  const double p10 = percentile(x, 0.10), p90 = percentile(x, 0.90);
  const double p25 = percentile(x, 0.25), p75 = percentile(x, 0.75);
  double robust_sum = 0.0, robust_n = 0.0;
  for (double v : x) {
    if (v >= p10 && v <= p90) {
      robust_sum += v;
      robust_n += 1.0;
    }
  }
  // two distinct values leave nothing inside [p10, p90]; report 0
  double rmad = 0.0;
  if (robust_n > 0.0) {
    const double robust_mean = robust_sum / robust_n;
    for (double v : x)
      if (v >= p10 && v <= p90) rmad += std::abs(v - robust_mean);
    rmad /= robust_n;
  }

  const std::array<double, kFirstOrderFeatureCount> values{
      mean,    percentile(x, 0.5), x.front(), x.back(),   x.back() - x.front(),   m2,        skew,
      kurt,    energy,             entropy,   mad,        std::sqrt(energy / n),  uniformity, p10,
      p90,     p75 - p25,          rmad,      pixel_volume * energy};
  NamedVector out;
  for (std::size_t i = 0; i < values.size(); ++i) out.push("firstorder::" + std::string(kFirstOrderNames[i]), values[i]);
  return out;
}

NamedVector shape2d_features(const MaskGrid& roi) {
  const std::size_t count = count_foreground(roi);
  if (count == 0) throw ValidationError("shape2d_features: empty ROI");
  const double area = static_cast<double>(count);

  double perimeter = 0.0, sr = 0.0, sc = 0.0;
  int rmin = roi.rows(), rmax = -1, cmin = roi.cols(), cmax = -1;
  auto fg = [&roi](int r, int c) { return roi.in_bounds(r, c) && roi(r, c) != 0; };
  std::vector<std::array<int, 2>> corners;
  for (int r = 0; r < roi.rows(); ++r) {
    for (int c = 0; c < roi.cols(); ++c) {
      if (!fg(r, c)) continue;
      const int exposed = !fg(r - 1, c) + !fg(r + 1, c) + !fg(r, c - 1) + !fg(r, c + 1);
      perimeter += exposed;
      if (exposed > 0 || !fg(r - 1, c - 1) || !fg(r - 1, c + 1) || !fg(r + 1, c - 1) || !fg(r + 1, c + 1)) {
        for (int dr = 0; dr <= 1; ++dr)
          for (int dc = 0; dc <= 1; ++dc) corners.push_back({r + dr, c + dc});
      }
      sr += r;
      sc += c;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
    }
  }
  std::sort(corners.begin(), corners.end());
  corners.erase(std::unique(corners.begin(), corners.end()), corners.end());
  double max_d2 = 0.0;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    for (std::size_t j = i + 1; j < corners.size(); ++j) {
      const double dr = corners[i][0] - corners[j][0];
      const double dc = corners[i][1] - corners[j][1];
      max_d2 = std::max(max_d2, dr * dr + dc * dc);
    }
  }

  const double mr = sr / area, mc = sc / area;
  double crr = 0.0, ccc = 0.0, crc = 0.0;
  for (int r = 0; r < roi.rows(); ++r) {
    for (int c = 0; c < roi.cols(); ++c) {
      if (!fg(r, c)) continue;
      crr += (r - mr) * (r - mr);
      ccc += (c - mc) * (c - mc);
      crc += (r - mr) * (c - mc);
    }
  }
  crr /= area;
  ccc /= area;
  crc /= area;
  const double half_tr = 0.5 * (crr + ccc);
  const double disc = std::sqrt(0.25 * (crr - ccc) * (crr - ccc) + crc * crc);
  const double major_ev = half_tr + disc;
  const double minor_ev = std::max(0.0, half_tr - disc);
  const double elongation = major_ev > 0.0 ? std::sqrt(minor_ev / major_ev) : 1.0;
  const double bbox = static_cast<double>(rmax - rmin + 1) * (cmax - cmin + 1);

  const std::array<double, kShapeFeatureCount> values{
      area,
      perimeter,
      perimeter / area,
      2.0 * std::sqrt(std::numbers::pi * area) / perimeter,
      2.0 * std::sqrt(area / std::numbers::pi),
      4.0 * std::sqrt(major_ev),
      4.0 * std::sqrt(minor_ev),
      elongation,
      std::sqrt(max_d2),
      area / bbox};
  NamedVector out;
  for (std::size_t i = 0; i < values.size(); ++i) out.push("shape2D::" + std::string(kShapeNames[i]), values[i]);
  return out;
}

const char* shift_behavior_name(ShiftBehavior b) {
  switch (b) {
    case ShiftBehavior::invariant: return "invariant";
    case ShiftBehavior::translates: return "translates";
    case ShiftBehavior::varies: return "varies";
    case ShiftBehavior::not_applicable: return "n/a";
  }
  return "?";
}

namespace {

ShiftBehavior shift_behavior_from_name(const std::string& s) {
  for (auto b : {ShiftBehavior::invariant, ShiftBehavior::translates, ShiftBehavior::varies,
                 ShiftBehavior::not_applicable}) {
    if (s == shift_behavior_name(b)) return b;
  }
  throw ValidationError("unknown shift behaviour '" + s + "'");
}

std::string directions_string() {
  std::string s;
  for (const auto& o : kDefaultDirections) {
    if (!s.empty()) s += ",";
    s += "(" + std::to_string(o.dr) + "," + std::to_string(o.dc) + ")";
  }
  return s;
}

std::string class_parameters(MatrixKind k, double bin_width) {
  const std::string bw = "bin_width=" + io::format_double(bin_width);
  switch (k) {
    case MatrixKind::glcm: return bw + ";offsets=" + directions_string() + ";symmetric;per_offset_mean";
    case MatrixKind::glrlm: return bw + ";directions=" + directions_string() + ";per_direction_mean";
    case MatrixKind::glszm: return bw + ";connectivity=8";
    case MatrixKind::ngtdm: return bw + ";distance=1";
    case MatrixKind::gldm: return bw + ";alpha=0;distance=1;dependence=k+1";
  }
  return bw;
}

nlohmann::json config_json(const ExtractionConfig& c) {
  nlohmann::json j;
  j["bin_width"] = c.bin_width;
  j["log_sigmas"] = c.filters.log_sigmas;
  j["wavelet_subbands"] = c.filters.wavelet_subbands;
  return j;
}

constexpr MatrixKind kMatrixOrder[] = {MatrixKind::glcm, MatrixKind::glrlm, MatrixKind::glszm, MatrixKind::ngtdm,
                                       MatrixKind::gldm};

}  // namespace

std::vector<std::string> FeatureManifest::names() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.name());
  return out;
}

FeatureManifest build_manifest(const ExtractionConfig& config) {
  FeatureManifest m;
  m.version = kManifestVersion;
  m.config = config;
  for (const auto& name : kShapeNames) {
    m.entries.push_back({"original", "shape2D", std::string(name), "mask_only;pixel_spacing=1mm",
                         ShiftBehavior::invariant});
  }
  for (const auto& channel : list_filter_channels(config.filters)) {
    const bool original = channel == "original";
    for (std::size_t i = 0; i < kFirstOrderNames.size(); ++i) {
      m.entries.push_back({channel, "firstorder", std::string(kFirstOrderNames[i]),
                           "bin_width=" + io::format_double(config.bin_width),
                           original ? kFirstOrderShift[i] : ShiftBehavior::not_applicable});
    }
    for (auto kind : kMatrixOrder) {
      for (const auto& name : feature_names(kind)) {
        m.entries.push_back({channel, matrix_kind_name(kind), std::string(name),
                             class_parameters(kind, config.bin_width),
                             original ? ShiftBehavior::invariant : ShiftBehavior::not_applicable});
      }
    }
  }
  return m;
}

void write_manifest(const FeatureManifest& m, const std::filesystem::path& path) {
  nlohmann::json j;
  j["version"] = m.version;
  j["n_features"] = m.entries.size();
  j["config"] = config_json(m.config);
  j["filter_conventions"] = {
      {"wavelet", "undecimated single-level Haar; low=(a+b)/2, high=(a-b)/2; name XY = X along columns, Y along rows"},
      {"log", "scale-normalised LoG (kernel*sigma^2), radius ceil(4 sigma), zero-sum"},
      {"square", "(x/sqrt(M))^2, M = max|x| over the analysis region"},
      {"squareroot", "sign(x) sqrt(M|x|)"},
      {"logarithm", "sign(x) log(|x|+1) rescaled to max magnitude M"},
      {"exponential", "exp(x log(M)/M); 1 when M = 0"},
      {"gradient", "central-difference gradient magnitude, unit spacing"},
      {"lbp2d", "radius 1, 8 neighbours, rotation-invariant uniform codes 0..8, non-uniform 9"},
      {"padding", "symmetric (edge sample repeated)"},
      {"analysis_region", "ROI bounding box grown by ceil(4*max sigma)+1, clipped to the slice"}};
  j["degenerate_limits"] = {
      {"glcm_no_pairs", "features of P=[[1]]"},
      {"correlation_zero_variance", 0.0},
      {"mcc_single_level", 0.0},
      {"imc1_zero_marginal_entropy", 0.0},
      {"skewness_kurtosis_zero_variance", 0.0},
      {"ngtdm_coarseness_zero_sum", 1.0e6},
      {"ngtdm_contrast_single_level", 0.0},
      {"ngtdm_busyness_zero_denominator", 0.0},
      {"ngtdm_strength_zero_sum", 0.0},
      {"shape_elongation_zero_axes", 1.0}};
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    j["entries"].push_back({{"name", e.name()},
                            {"channel", e.channel},
                            {"class", e.feature_class},
                            {"feature", e.feature},
                            {"parameters", e.parameters},
                            {"shift_behavior", shift_behavior_name(e.shift)}});
  }
  io::write_json(path, j);
}

FeatureManifest read_manifest(const std::filesystem::path& path) {
  const auto j = io::read_json(path);
  FeatureManifest m;
  try {
    m.version = j.at("version").get<std::string>();
    const auto& c = j.at("config");
    m.config.bin_width = c.at("bin_width").get<double>();
    m.config.filters.log_sigmas = c.at("log_sigmas").get<std::vector<double>>();
    m.config.filters.wavelet_subbands = c.at("wavelet_subbands").get<std::vector<std::string>>();
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("channel").get<std::string>(), e.at("class").get<std::string>(),
                           e.at("feature").get<std::string>(), e.at("parameters").get<std::string>(),
                           shift_behavior_from_name(e.at("shift_behavior").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

RadiomicsVector extract_slice(const std::string& nodule_id, const ImageGrid& slice, const MaskGrid& roi,
                              const ExtractionConfig& config) {
  if (slice.rows() != roi.rows() || slice.cols() != roi.cols()) {
    throw ValidationError("nodule " + nodule_id + ": ROI shape differs from slice shape");
  }
  int rmin = roi.rows(), rmax = -1, cmin = roi.cols(), cmax = -1;
  for (int r = 0; r < roi.rows(); ++r) {
    for (int c = 0; c < roi.cols(); ++c) {
      if (!roi(r, c)) continue;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
    }
  }
  if (rmax < 0) throw ValidationError("nodule " + nodule_id + ": empty ROI");

  double max_sigma = 0.0;
  for (double s : config.filters.log_sigmas) max_sigma = std::max(max_sigma, s);
  const int margin = static_cast<int>(std::ceil(4.0 * max_sigma)) + 1;
  const int r0 = std::max(0, rmin - margin), r1 = std::min(roi.rows() - 1, rmax + margin);
  const int c0 = std::max(0, cmin - margin), c1 = std::min(roi.cols() - 1, cmax + margin);
  ImageGrid region(r1 - r0 + 1, c1 - c0 + 1);
  MaskGrid region_roi(r1 - r0 + 1, c1 - c0 + 1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      region(r - r0, c - c0) = slice(r, c);
      region_roi(r - r0, c - c0) = roi(r, c);
    }
  }

  RadiomicsVector out;
  out.nodule_id = nodule_id;
  auto append = [&out](const std::string& channel, const NamedVector& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.names.push_back(channel + "::" + v.names[i]);
      out.values.push_back(v.values[i]);
    }
  };
  append("original", shape2d_features(roi));
  for (const auto& [channel, image] : apply_filter_bank(region, config.filters)) {
    append(channel, firstorder_features(image, region_roi, config.bin_width));
    append(channel, texture_features(discretize_fixed_width(image, region_roi, config.bin_width)));
  }
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (!std::isfinite(out.values[i])) {
      throw NumericError("nodule " + nodule_id + ": non-finite feature " + out.names[i]);
    }
  }
  return out;
}

RadiomicsVector extract_all(const NoduleRecord& record, const ExtractionConfig& config) {
  const auto prepared = prepare_nodule(record);
  try {
    return extract_slice(record.nodule_id, prepared.image.slice(prepared.middle), prepared.mask.slice(prepared.middle),
                         config);
  } catch (const ValidationError& e) {
    throw ValidationError("nodule " + record.nodule_id + ": " + e.what());
  }
}

std::size_t FeatureTable::row_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return i;
  throw ValidationError("feature table has no row for nodule " + id);
}

std::filesystem::path manifest_path_for(const std::filesystem::path& table_path) {
  auto p = table_path;
  p.replace_extension(".manifest.json");
  return p;
}

std::string format_feature_table(const FeatureTable& table) {
  std::string s = "nodule_id";
  for (const auto& n : table.names) s += "," + n;
  s += "\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    s += table.ids[r];
    for (double v : table.rows[r]) s += "," + io::format_double(v);
    s += "\n";
  }
  return s;
}

void write_feature_table(std::span<const RadiomicsVector> vectors, const FeatureManifest& manifest,
                         const std::filesystem::path& path) {
  FeatureTable t;
  t.names = manifest.names();
  std::vector<const RadiomicsVector*> sorted;
  for (const auto& v : vectors) {
    if (v.names != t.names) throw ValidationError("nodule " + v.nodule_id + ": feature names differ from the manifest");
    sorted.push_back(&v);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const RadiomicsVector* a, const RadiomicsVector* b) { return a->nodule_id < b->nodule_id; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->nodule_id == sorted[i - 1]->nodule_id) {
      throw ValidationError("duplicate nodule id " + sorted[i]->nodule_id + " in feature table");
    }
  }
  for (const auto* v : sorted) {
    t.ids.push_back(v->nodule_id);
    t.rows.push_back(v->values);
  }
  io::write_text(path, format_feature_table(t));
  write_manifest(manifest, manifest_path_for(path));
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const auto pos = l.find(',', start);
      cols.push_back(l.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return cols;
  };
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty feature table");
  auto header = split(line);
  if (header.empty() || header[0] != "nodule_id") throw ValidationError(path.string() + ": first column must be nodule_id");
  FeatureTable t;
  t.names.assign(header.begin() + 1, header.end());
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split(line);
    if (cols.size() != header.size()) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " columns");
    }
    std::vector<double> row(cols.size() - 1);
    for (std::size_t i = 1; i < cols.size(); ++i) {
      try {
        std::size_t used = 0;
        row[i - 1] = std::stod(cols[i], &used);
        if (used != cols[i].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ValidationError(path.string() + ": nodule " + cols[0] + ": bad value for " + t.names[i - 1]);
      }
    }
    t.ids.push_back(cols[0]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace autorad
