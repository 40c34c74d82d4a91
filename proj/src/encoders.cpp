#include "autorad/encoders.hpp"

#include <cmath>
#include <cctype>

#include "autorad/rng.hpp"
#include "io_util.hpp"

namespace autorad {

Vector pool_slices(const Matrix& slices) {
  if (slices.rows() == 0) throw ValidationError("pool_slices: no slice embeddings");
  return slices.colwise().mean().transpose();
}

namespace {

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double std) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = std * rng.gaussian();
  return m;
}

Vector gaussian_vector(Rng& rng, Eigen::Index n, double std) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = std * rng.gaussian();
  return v;
}

}  // namespace

FrozenTextEncoder::FrozenTextEncoder(std::uint64_t seed, int token_dim, int hidden_dim, int embed_dim) : seed_(seed) {
  if (token_dim <= 0 || hidden_dim <= 0 || embed_dim <= 0) {
    throw ValidationError("FrozenTextEncoder: dimensions must be positive");
  }
  Rng rng(seed);
  w1_ = gaussian_matrix(rng, hidden_dim, token_dim, 1.0 / std::sqrt(static_cast<double>(token_dim)));
  b1_ = gaussian_vector(rng, hidden_dim, 0.1);
  w2_ = gaussian_matrix(rng, embed_dim, hidden_dim, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
  b2_ = gaussian_vector(rng, embed_dim, 0.1);
}

Vector FrozenTextEncoder::encode(const Matrix& tokens, Trace* trace) const {
  if (tokens.rows() == 0 || tokens.cols() != token_dim()) {
    throw ValidationError("FrozenTextEncoder: expected tokens of width " + std::to_string(token_dim()));
  }
  Vector pooled = tokens.colwise().mean().transpose();
  Vector hidden = (w1_ * pooled + b1_).array().tanh().matrix();
  Vector out = (w2_ * hidden + b2_).array().tanh().matrix();
  if (trace) {
    trace->pooled = std::move(pooled);
    trace->hidden = hidden;
    trace->output = out;
    trace->token_count = static_cast<int>(tokens.rows());
  }
  return out;
}

Vector FrozenTextEncoder::backward_pooled(const Trace& trace, const Vector& grad_output) const {
  const Vector g2 = grad_output.cwiseProduct((1.0 - trace.output.array().square()).matrix());
  const Vector gh = w2_.transpose() * g2;
  const Vector g1 = gh.cwiseProduct((1.0 - trace.hidden.array().square()).matrix());
  return w1_.transpose() * g1;
}

Vector encode_prompt(const FrozenTextEncoder& encoder, const Matrix& tokens, int expected_tokens) {
  if (tokens.rows() != expected_tokens) {
    throw ValidationError("encode_prompt: expected " + std::to_string(expected_tokens) + " tokens, got " +
                          std::to_string(tokens.rows()));
  }
  if (tokens.cols() != encoder.token_dim()) {
    throw ValidationError("encode_prompt: token width " + std::to_string(tokens.cols()) + " != " +
                          std::to_string(encoder.token_dim()));
  }
  return encoder.encode(tokens);
}

Matrix make_class_tokens(int n_classes, int token_dim, std::uint64_t seed, double scale) {
  if (n_classes < 2 || token_dim <= 0) throw ValidationError("make_class_tokens: need >= 2 classes and positive width");
  Matrix out(n_classes, token_dim);
  for (int k = 0; k < n_classes; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k) + 1));
    for (int d = 0; d < token_dim; ++d) out(k, d) = scale * rng.gaussian();
  }
  return out;
}

ToyImageEncoder::ToyImageEncoder(std::uint64_t seed, int embed_dim, int grid) : grid_(grid) {
  if (embed_dim <= 0 || grid <= 0) throw ValidationError("ToyImageEncoder: dimensions must be positive");
  Rng rng(seed);
  weights_ = gaussian_matrix(rng, embed_dim, static_cast<Eigen::Index>(grid) * grid, 1.0 / grid);
  bias_ = gaussian_vector(rng, embed_dim, 1.0);
}

Vector ToyImageEncoder::patch_means(const ImageGrid& crop) const {
  if (crop.rows() != crop.cols()) throw ValidationError("toy_image_encoder: crop must be square");
  const int n = crop.rows();
  if (n < grid_) throw ValidationError("toy_image_encoder: crop smaller than the patch grid");
  Vector means(static_cast<Eigen::Index>(grid_) * grid_);
  for (int gi = 0; gi < grid_; ++gi) {
    for (int gj = 0; gj < grid_; ++gj) {
      const int r0 = gi * n / grid_, r1 = (gi + 1) * n / grid_;
      const int c0 = gj * n / grid_, c1 = (gj + 1) * n / grid_;
      double s = 0.0;
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) s += crop(r, c);
      means(gi * grid_ + gj) = s / static_cast<double>((r1 - r0) * (c1 - c0));
    }
  }
  return means;
}

Vector ToyImageEncoder::encode(const ImageGrid& crop) const { return weights_ * patch_means(crop) + bias_; }

Vector EmbeddingStore::pooled(const std::string& nodule_id) const {
  const auto it = slices.find(nodule_id);
  if (it == slices.end()) throw ValidationError("no embeddings for nodule " + nodule_id);
  return pool_slices(it->second);
}

bool EmbeddingStore::operator==(const EmbeddingStore& o) const {
  if (embed_dim != o.embed_dim || token_dim != o.token_dim || slices.size() != o.slices.size()) return false;
  if (class_tokens.rows() != o.class_tokens.rows() || class_tokens.cols() != o.class_tokens.cols() ||
      class_tokens != o.class_tokens) {
    return false;
  }
  for (const auto& [id, m] : slices) {
    const auto it = o.slices.find(id);
    if (it == o.slices.end() || it->second.rows() != m.rows() || it->second.cols() != m.cols() || it->second != m) {
      return false;
    }
  }
  return true;
}

namespace {

std::vector<float> to_floats(const Matrix& m) {
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(static_cast<float>(m(r, c)));
  return out;
}

Matrix from_floats(const std::vector<float>& v, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  return m;
}

std::string safe_file_name(const std::string& id) {
  std::string s;
  for (char ch : id) s += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.') ? ch : '_';
  return s;
}

}  // namespace

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& manifest) {
  nlohmann::json j;
  j["d_e"] = store.embed_dim;
  j["d_t"] = store.token_dim;
  j["entries"] = nlohmann::json::array();
  const auto dir = manifest.parent_path();
  int k = 0;
  for (const auto& [id, m] : store.slices) {
    if (m.cols() != store.embed_dim) throw ValidationError("nodule " + id + ": embedding width != d_e");
    const std::string rel = "embeddings/" + std::to_string(k++) + "_" + safe_file_name(id) + ".f32";
    io::write_le<float>(dir / rel, to_floats(m));
    j["entries"].push_back({{"nodule_id", id}, {"path", rel}, {"rows", m.rows()}, {"d_e", m.cols()}});
  }
  if (store.class_tokens.size() > 0) {
    io::write_le<float>(dir / "class_tokens.f32", to_floats(store.class_tokens));
    j["class_tokens"] = {{"path", "class_tokens.f32"}, {"count", store.class_tokens.rows()}, {"d_t", store.class_tokens.cols()}};
  }
  io::write_json(manifest, j);
}

EmbeddingStore load_embeddings(const std::filesystem::path& manifest, std::optional<int> expected_classes,
                               const ClassTokenFallback& fallback) {
  const auto j = io::read_json(manifest);
  EmbeddingStore store;
  try {
    store.embed_dim = j.at("d_e").get<int>();
    store.token_dim = j.at("d_t").get<int>();
    if (store.embed_dim <= 0 || store.token_dim <= 0) throw ValidationError("d_e and d_t must be positive");
    for (const auto& e : j.at("entries")) {
      const auto id = e.at("nodule_id").get<std::string>();
      const auto rows = e.at("rows").get<int>();
      const auto width = e.at("d_e").get<int>();
      if (width != store.embed_dim) {
        throw ValidationError("nodule " + id + ": embedding width " + std::to_string(width) + " != d_e " +
                              std::to_string(store.embed_dim));
      }
      if (rows < 1) throw ValidationError("nodule " + id + ": no slice embeddings");
      if (store.slices.count(id)) throw ValidationError("duplicate nodule_id " + id + " in embeddings");
      const auto data = io::read_le<float>(io::resolve(manifest, e.at("path").get<std::string>()));
      if (data.size() != static_cast<std::size_t>(rows) * width) {
        throw ValidationError("nodule " + id + ": array length " + std::to_string(data.size()) + " != rows*d_e");
      }
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) throw ValidationError("nodule " + id + ": non-finite embedding value");
      }
      store.slices.emplace(id, from_floats(data, rows, width));
    }
    if (j.contains("class_tokens")) {
      const auto& c = j["class_tokens"];
      const auto count = c.at("count").get<int>();
      const auto width = c.at("d_t").get<int>();
      if (width != store.token_dim) throw ValidationError("class token width != d_t");
      const auto data = io::read_le<float>(io::resolve(manifest, c.at("path").get<std::string>()));
      if (data.size() != static_cast<std::size_t>(count) * width) throw ValidationError("class token array length mismatch");
      store.class_tokens = from_floats(data, count, width);
    } else {
      store.class_tokens = make_class_tokens(fallback.n_classes, store.token_dim, fallback.seed, fallback.scale);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed embedding manifest " + manifest.string() + ": " + e.what());
  }
  if (store.class_tokens.rows() < 2) throw ValidationError("embedding store needs at least 2 class tokens");
  if (expected_classes && store.class_tokens.rows() != *expected_classes) {
    throw ValidationError("class token count " + std::to_string(store.class_tokens.rows()) + " != N_c " +
                          std::to_string(*expected_classes));
  }
  return store;
}

}  // namespace autorad
