#include "autorad/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "io_util.hpp"

namespace autorad {

namespace io {
std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace io

namespace {

std::size_t checked_product(const Dims3& dims, const char* what) {
  std::size_t n = 1;
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0) {
      throw ValidationError(std::string(what) + ": dims[" + std::to_string(a) + "] must be positive");
    }
    n *= static_cast<std::size_t>(dims[a]);
  }
  return n;
}

template <typename T, std::size_t N>
std::array<T, N> json_array(const nlohmann::json& j, const char* key, const std::filesystem::path& p) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != N) {
    throw ValidationError("malformed header " + p.string() + ": '" + key + "' must be an array of " +
                          std::to_string(N));
  }
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[key][i].is_number()) throw ValidationError("malformed header " + p.string() + ": non-numeric " + key);
    out[i] = j[key][i].get<T>();
  }
  return out;
}

struct Header {
  Dims3 dims;
  Vec3 spacing;
  Vec3 origin;
  std::string dtype;
  std::filesystem::path data_path;
};

Header read_header(const std::filesystem::path& header_path) {
  const auto j = io::read_json(header_path);
  if (!j.is_object()) throw ValidationError("malformed header " + header_path.string() + ": not an object");
  Header h;
  h.dims = json_array<int, 3>(j, "dims", header_path);
  h.spacing = json_array<double, 3>(j, "spacing", header_path);
  h.origin = j.contains("origin") ? json_array<double, 3>(j, "origin", header_path) : Vec3{0, 0, 0};
  h.dtype = j.value("dtype", "float32");
  if (j.value("endianness", "little") != "little") {
    throw ValidationError("malformed header " + header_path.string() + ": only little-endian payloads are supported");
  }
  if (!j.contains("data_file") || !j["data_file"].is_string()) {
    throw ValidationError("malformed header " + header_path.string() + ": missing data_file");
  }
  h.data_path = io::resolve(header_path, j["data_file"].get<std::string>());
  return h;
}

void write_header(const std::filesystem::path& header_path, const Dims3& dims, const Vec3& spacing,
                  const Vec3& origin, const std::string& dtype) {
  auto raw = header_path.filename();
  raw.replace_extension(".raw");
  nlohmann::json j;
  j["dims"] = dims;
  j["spacing"] = spacing;
  j["origin"] = origin;
  j["dtype"] = dtype;
  j["endianness"] = "little";
  j["data_file"] = raw.string();
  io::write_json(header_path, j);
}

std::filesystem::path raw_path_for(const std::filesystem::path& header_path) {
  auto p = header_path;
  p.replace_extension(".raw");
  return p;
}

}  // namespace

VoxelVolume::VoxelVolume(Dims3 dims, Vec3 spacing, std::vector<float> data, Vec3 origin)
    : dims_(dims), spacing_(spacing), origin_(origin), data_(std::move(data)) {
  const auto n = checked_product(dims_, "VoxelVolume");
  if (data_.size() != n) {
    throw ValidationError("VoxelVolume: length mismatch (dims product " + std::to_string(n) + ", data length " +
                          std::to_string(data_.size()) + ")");
  }
  for (int a = 0; a < 3; ++a) {
    if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a])) {
      throw ValidationError("VoxelVolume: spacing[" + std::to_string(a) + "] must be positive and finite");
    }
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw ValidationError("VoxelVolume: non-finite value at index " + std::to_string(i));
    }
  }
}

ImageGrid VoxelVolume::slice(int z) const {
  if (z < 0 || z >= dims_[0]) throw ValidationError("slice index " + std::to_string(z) + " out of range");
  ImageGrid g(dims_[1], dims_[2]);
  for (int y = 0; y < dims_[1]; ++y)
    for (int x = 0; x < dims_[2]; ++x) g(y, x) = at(z, y, x);
  return g;
}

BinaryMask::BinaryMask(Dims3 dims, std::vector<std::uint8_t> data) : dims_(dims), data_(std::move(data)) {
  const auto n = checked_product(dims_, "BinaryMask");
  if (data_.size() != n) {
    throw ValidationError("BinaryMask: length mismatch (dims product " + std::to_string(n) + ", data length " +
                          std::to_string(data_.size()) + ")");
  }
  for (auto& v : data_) v = v ? 1 : 0;
}

std::size_t BinaryMask::foreground_count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

std::size_t BinaryMask::slice_foreground(int z) const {
  const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(index(z, 0, 0));
  return static_cast<std::size_t>(std::count(begin, begin + dims_[1] * dims_[2], std::uint8_t{1}));
}

MaskGrid BinaryMask::slice(int z) const {
  if (z < 0 || z >= dims_[0]) throw ValidationError("mask slice index " + std::to_string(z) + " out of range");
  MaskGrid g(dims_[1], dims_[2]);
  for (int y = 0; y < dims_[1]; ++y)
    for (int x = 0; x < dims_[2]; ++x) g(y, x) = data_[index(z, y, x)];
  return g;
}

const char* label_name(Label l) {
  switch (l) {
    case Label::benign: return "benign";
    case Label::unsure: return "unsure";
    case Label::malignant: return "malignant";
  }
  return "?";
}

Label label_from_name(const std::string& name) {
  if (name == "benign") return Label::benign;
  if (name == "unsure") return Label::unsure;
  if (name == "malignant") return Label::malignant;
  throw ValidationError("unknown label '" + name + "'");
}

Label derive_label(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("derive_label: empty score list");
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 1.0 && scores[i] <= 5.0)) {
      throw ValidationError("derive_label: score " + std::to_string(i) + " outside [1,5]");
    }
    sum += scores[i];
  }
  const double mean = sum / static_cast<double>(scores.size());
  if (mean < 2.5) return Label::benign;
  if (mean > 3.5) return Label::malignant;
  return Label::unsure;
}

BinaryMask consensus_mask(std::span<const BinaryMask> annotator_masks) {
  if (annotator_masks.empty()) throw ValidationError("consensus_mask: no annotator masks");
  const auto& dims = annotator_masks.front().dims();
  for (std::size_t k = 1; k < annotator_masks.size(); ++k) {
    if (annotator_masks[k].dims() != dims) {
      throw ValidationError("consensus_mask: dim mismatch for annotator " + std::to_string(k));
    }
  }
  const std::size_t n = annotator_masks.front().data().size();
  std::vector<int> votes(n, 0);
  for (const auto& m : annotator_masks) {
    auto d = m.data();
    for (std::size_t i = 0; i < n; ++i) votes[i] += d[i];
  }
  // votes / raters >= 1/2  <=>  2 * votes >= raters (exact in integers)
  const int raters = static_cast<int>(annotator_masks.size());
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (2 * votes[i] >= raters) ? 1 : 0;
  return BinaryMask(dims, std::move(out));
}

int middle_slice(std::pair<int, int> slice_range) {
  const auto [first, last] = slice_range;
  if (first > last) {
    throw ValidationError("middle_slice: inverted range (" + std::to_string(first) + ", " + std::to_string(last) + ")");
  }
  const long long sum = static_cast<long long>(first) + last;
  // floor division, also for negative sums
  return static_cast<int>(sum >= 0 ? sum / 2 : -((-sum + 1) / 2));
}

void save_volume(const VoxelVolume& v, const std::filesystem::path& header_path) {
  write_header(header_path, v.dims(), v.spacing(), v.origin(), "float32");
  io::write_le<float>(raw_path_for(header_path), v.data());
}

VoxelVolume load_volume(const std::filesystem::path& header_path) {
  const auto h = read_header(header_path);
  if (h.dtype != "float32") {
    throw ValidationError("malformed header " + header_path.string() + ": volume dtype must be float32");
  }
  auto data = io::read_le<float>(h.data_path);
  try {
    return VoxelVolume(h.dims, h.spacing, std::move(data), h.origin);
  } catch (const ValidationError& e) {
    throw ValidationError(header_path.string() + ": " + e.what());
  }
}

void save_mask(const BinaryMask& m, const std::filesystem::path& header_path, const Vec3& spacing) {
  write_header(header_path, m.dims(), spacing, {0, 0, 0}, "uint8");
  io::write_le<std::uint8_t>(raw_path_for(header_path), m.data());
}

BinaryMask load_mask(const std::filesystem::path& header_path) {
  const auto h = read_header(header_path);
  std::vector<std::uint8_t> data;
  if (h.dtype == "uint8") {
    data = io::read_le<std::uint8_t>(h.data_path);
  } else if (h.dtype == "float32") {
    auto f = io::read_le<float>(h.data_path);
    data.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) data[i] = f[i] != 0.0f;
  } else {
    throw ValidationError("malformed header " + header_path.string() + ": unsupported mask dtype " + h.dtype);
  }
  try {
    return BinaryMask(h.dims, std::move(data));
  } catch (const ValidationError& e) {
    throw ValidationError(header_path.string() + ": " + e.what());
  }
}

std::vector<NoduleRecord> load_nodule_records(const std::filesystem::path& path) {
  const auto j = io::read_json(path);
  if (!j.is_array()) throw ValidationError(path.string() + ": nodule metadata must be a JSON array");
  std::vector<NoduleRecord> out;
  std::map<std::string, int> seen;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto& e = j[k];
    NoduleRecord r;
    try {
      r.nodule_id = e.at("nodule_id").get<std::string>();
      r.volume_path = io::resolve(path, e.at("volume_path").get<std::string>());
      for (const auto& m : e.at("mask_paths")) r.mask_paths.push_back(io::resolve(path, m.get<std::string>()));
      r.scores = e.at("scores").get<std::vector<double>>();
      const auto sr = e.at("slice_range").get<std::vector<int>>();
      if (sr.size() != 2) throw ValidationError("slice_range must have two entries");
      r.slice_range = {sr[0], sr[1]};
    } catch (const nlohmann::json::exception& ex) {
      throw ValidationError(path.string() + ": record " + std::to_string(k) + ": " + ex.what());
    } catch (const ValidationError& ex) {
      throw ValidationError(path.string() + ": record " + std::to_string(k) + ": " + ex.what());
    }
    try {
      if (r.slice_range.first > r.slice_range.second) throw ValidationError("inverted slice_range");
      if (r.mask_paths.empty()) throw ValidationError("no mask_paths");
      r.label = derive_label(r.scores);
    } catch (const ValidationError& ex) {
      throw ValidationError("nodule " + r.nodule_id + ": " + ex.what());
    }
    if (seen.count(r.nodule_id)) throw ValidationError("duplicate nodule_id " + r.nodule_id);
    seen[r.nodule_id] = 1;
    out.push_back(std::move(r));
  }
  return out;
}

void save_nodule_records(std::span<const NoduleRecord> records, const std::filesystem::path& path) {
  const auto base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    const auto r = p.lexically_relative(base.empty() ? std::filesystem::path(".") : base);
    return r.empty() ? p.generic_string() : r.generic_string();
  };
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json e;
    e["nodule_id"] = r.nodule_id;
    e["volume_path"] = rel(r.volume_path);
    e["mask_paths"] = nlohmann::json::array();
    for (const auto& m : r.mask_paths) e["mask_paths"].push_back(rel(m));
    e["scores"] = r.scores;
    e["slice_range"] = {r.slice_range.first, r.slice_range.second};
    j.push_back(e);
  }
  io::write_json(path, j);
}

std::map<std::string, std::vector<double>> load_scores_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty scores CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "nodule_id,annotator,score") {
    throw ValidationError(path.string() + ": header must be 'nodule_id,annotator,score'");
  }
  std::map<std::string, std::vector<double>> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (cols.size() != 3) throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
    double score = 0.0;
    try {
      std::size_t used = 0;
      score = std::stod(cols[2], &used);
      if (used != cols[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": bad score for nodule " + cols[0]);
    }
    if (!(score >= 1.0 && score <= 5.0)) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": score outside [1,5] for nodule " +
                            cols[0]);
    }
    out[cols[0]].push_back(score);
  }
  return out;
}

}  // namespace autorad
