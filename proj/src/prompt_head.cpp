#include "autorad/prompt_head.hpp"

#include <algorithm>
#include <cmath>

#include "autorad/rng.hpp"
#include "io_util.hpp"

namespace autorad {

const char* HeadTensors::group_name(int g) {
  static const char* names[kGroupCount] = {"context", "metanet.w1", "metanet.b1", "metanet.w2", "metanet.b2"};
  return names[g];
}

Eigen::Map<Vector> HeadTensors::group(int g) {
  switch (g) {
    case 0: return {context.data(), context.size()};
    case 1: return {w1.data(), w1.size()};
    case 2: return {b1.data(), b1.size()};
    case 3: return {w2.data(), w2.size()};
    default: return {b2.data(), b2.size()};
  }
}

Eigen::Map<const Vector> HeadTensors::group(int g) const {
  switch (g) {
    case 0: return {context.data(), context.size()};
    case 1: return {w1.data(), w1.size()};
    case 2: return {b1.data(), b1.size()};
    case 3: return {w2.data(), w2.size()};
    default: return {b2.data(), b2.size()};
  }
}

HeadTensors HeadTensors::zeros_like() const {
  return {Matrix::Zero(context.rows(), context.cols()), Matrix::Zero(w1.rows(), w1.cols()), Vector::Zero(b1.size()),
          Matrix::Zero(w2.rows(), w2.cols()), Vector::Zero(b2.size())};
}

bool HeadTensors::all_finite() const {
  for (int g = 0; g < kGroupCount; ++g)
    if (!group(g).allFinite()) return false;
  return true;
}

bool HeadTensors::operator==(const HeadTensors& o) const {
  for (int g = 0; g < kGroupCount; ++g) {
    if (group(g).size() != o.group(g).size() || group(g) != o.group(g)) return false;
  }
  return context.rows() == o.context.rows() && w1.rows() == o.w1.rows() && w2.rows() == o.w2.rows();
}

void PromptHeadParams::validate() const {
  const auto& t = tensors;
  if (t.context.rows() < 1) throw ValidationError("prompt head: need at least one context token");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("prompt head: tau must be positive");
  const auto d_t = t.context.cols();
  if (d_t < 1 || t.w1.rows() < 1 || t.w1.cols() < 1) throw ValidationError("prompt head: empty dimensions");
  if (t.b1.size() != t.w1.rows() || t.w2.cols() != t.w1.rows() || t.w2.rows() != d_t || t.b2.size() != d_t) {
    throw ValidationError("prompt head: MetaNet shapes disagree with the context width");
  }
  for (int g = 0; g < HeadTensors::kGroupCount; ++g) {
    if (!t.group(g).allFinite()) {
      throw ValidationError(std::string("prompt head: non-finite values in ") + HeadTensors::group_name(g));
    }
  }
}

int default_metanet_hidden(int radiomics_dim) { return std::max(1, (radiomics_dim + 15) / 16); }

PromptHeadParams init_params(int context_tokens, int token_dim, int radiomics_dim, int hidden_dim, std::uint64_t seed,
                             double tau) {
  if (context_tokens < 1 || token_dim < 1 || radiomics_dim < 1 || hidden_dim < 1) {
    throw ValidationError("init_params: dimensions must be positive");
  }
  PromptHeadParams p;
  p.tau = tau;
  auto& t = p.tensors;
  Rng ctx_rng(derive_seed(seed, 1));
  t.context.resize(context_tokens, token_dim);
  for (int m = 0; m < context_tokens; ++m)
    for (int d = 0; d < token_dim; ++d) t.context(m, d) = kContextInitStd * ctx_rng.gaussian();

  Rng net_rng(derive_seed(seed, 2));
  t.w1.resize(hidden_dim, radiomics_dim);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(radiomics_dim));
  for (int h = 0; h < hidden_dim; ++h)
    for (int k = 0; k < radiomics_dim; ++k) t.w1(h, k) = s1 * net_rng.gaussian();
  t.b1 = Vector::Zero(hidden_dim);
  t.w2.resize(token_dim, hidden_dim);
  const double s2 = kMetaNetOutputInitGain / std::sqrt(static_cast<double>(hidden_dim));
  for (int d = 0; d < token_dim; ++d)
    for (int h = 0; h < hidden_dim; ++h) t.w2(d, h) = s2 * net_rng.gaussian();
  t.b2 = Vector::Zero(token_dim);
  p.validate();
  return p;
}

Vector metanet_forward(const PromptHeadParams& params, const Vector& r, MetaNetTrace* trace) {
  const auto& t = params.tensors;
  if (r.size() != t.w1.cols()) {
    throw ValidationError("metanet: radiomics vector has " + std::to_string(r.size()) + " entries, expected " +
                          std::to_string(t.w1.cols()));
  }
  Vector pre = t.w1 * r + t.b1;
  Vector hidden = pre.cwiseMax(0.0);
  Vector delta = t.w2 * hidden + t.b2;
  if (trace) {
    trace->pre = std::move(pre);
    trace->hidden = hidden;
    trace->delta = delta;
  }
  return delta;
}

Matrix assemble_prompt(const PromptHeadParams& params, const Vector& delta, const Vector& class_token) {
  const auto& ctx = params.tensors.context;
  if (delta.size() != ctx.cols() || class_token.size() != ctx.cols()) {
    throw ValidationError("assemble_prompt: token width mismatch");
  }
  Matrix tokens(ctx.rows() + 1, ctx.cols());
  tokens.topRows(ctx.rows()) = ctx.rowwise() + delta.transpose();
  tokens.row(ctx.rows()) = class_token.transpose();
  return tokens;
}

int PromptOutput::predicted() const {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < probabilities.size(); ++i)
    if (probabilities(i) > probabilities(best)) best = i;
  return static_cast<int>(best);
}

Vector softmax(const Vector& logits) {
  const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine similarity undefined for a zero-norm vector");
  return a.dot(b) / (na * nb);
}

namespace {

void check_inputs(const PromptHeadParams& params, const Vector& x, const FrozenTextEncoder& encoder,
                  const Matrix& class_tokens) {
  if (params.tau <= 0.0) throw ValidationError("classify: tau must be positive");
  if (x.size() != encoder.embed_dim()) {
    throw ValidationError("classify: image embedding width " + std::to_string(x.size()) + " != d_e " +
                          std::to_string(encoder.embed_dim()));
  }
  if (x.norm() == 0.0) throw ValidationError("classify: image embedding has zero norm");
  if (class_tokens.cols() != params.token_dim() || encoder.token_dim() != params.token_dim()) {
    throw ValidationError("classify: token width mismatch between context, class tokens and encoder");
  }
  if (class_tokens.rows() < 2) throw ValidationError("classify: need at least two classes");
}

struct InstanceForward {
  PromptOutput out;
  MetaNetTrace meta;
  std::vector<FrozenTextEncoder::Trace> enc;
};

InstanceForward forward(const PromptHeadParams& params, const Vector& x, const FrozenTextEncoder& encoder,
                        const Matrix& class_tokens, const Vector& r) {
  check_inputs(params, x, encoder, class_tokens);
  InstanceForward f;
  const int n_classes = static_cast<int>(class_tokens.rows());
  const int n_tokens = params.context_tokens() + 1;
  f.out.delta = metanet_forward(params, r, &f.meta);
  f.out.prompt_embeddings.resize(n_classes, encoder.embed_dim());
  f.out.similarities.resize(n_classes);
  f.enc.resize(static_cast<std::size_t>(n_classes));
  for (int i = 0; i < n_classes; ++i) {
    const Matrix tokens = assemble_prompt(params, f.out.delta, class_tokens.row(i).transpose());
    if (tokens.rows() != n_tokens) throw ValidationError("classify: prompt length mismatch");
    const Vector e = encoder.encode(tokens, &f.enc[static_cast<std::size_t>(i)]);
    f.out.prompt_embeddings.row(i) = e.transpose();
    f.out.similarities(i) = cosine_similarity(x, e);
  }
  f.out.logits = f.out.similarities / params.tau;
  f.out.probabilities = softmax(f.out.logits);
  return f;
}

}  // namespace

PromptOutput classify(const PromptHeadParams& params, const Vector& image_embedding, const FrozenTextEncoder& encoder,
                      const Matrix& class_tokens, const Vector& r) {
  // Same path as the training forward, minus the traces.
  check_inputs(params, image_embedding, encoder, class_tokens);
  PromptOutput out;
  const int n_classes = static_cast<int>(class_tokens.rows());
  out.delta = metanet_forward(params, r);
  out.prompt_embeddings.resize(n_classes, encoder.embed_dim());
  out.similarities.resize(n_classes);
  for (int i = 0; i < n_classes; ++i) {
    const Matrix tokens = assemble_prompt(params, out.delta, class_tokens.row(i).transpose());
    const Vector e = encode_prompt(encoder, tokens, params.context_tokens() + 1);
    out.prompt_embeddings.row(i) = e.transpose();
    out.similarities(i) = cosine_similarity(image_embedding, e);
  }
  out.logits = out.similarities / params.tau;
  out.probabilities = softmax(out.logits);
  return out;
}

namespace {

void check_batch(const PromptHeadParams& params, const Matrix& class_tokens, const Batch& batch) {
  if (batch.size() == 0) throw ValidationError("loss_and_grads: empty batch");
  if (static_cast<std::size_t>(batch.images.rows()) != batch.size() ||
      static_cast<std::size_t>(batch.radiomics.rows()) != batch.size()) {
    throw ValidationError("loss_and_grads: batch arrays have different lengths");
  }
  if (batch.radiomics.cols() != params.radiomics_dim()) throw ValidationError("loss_and_grads: radiomics width mismatch");
  for (int y : batch.labels) {
    if (y < 0 || y >= class_tokens.rows()) throw ValidationError("loss_and_grads: label out of range");
  }
}

double log_prob(const Vector& logits, int y) {
  const double m = logits.maxCoeff();
  return logits(y) - m - std::log((logits.array() - m).exp().sum());
}

}  // namespace

LossAndGrads loss_and_grads(const PromptHeadParams& params, const FrozenTextEncoder& encoder,
                            const Matrix& class_tokens, const Batch& batch) {
  check_batch(params, class_tokens, batch);
  LossAndGrads res;
  res.grads = params.tensors.zeros_like();
  auto& g = res.grads;
  const auto& t = params.tensors;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const int m_tokens = params.context_tokens();
  const double n_tokens = m_tokens + 1.0;
  const int n_classes = static_cast<int>(class_tokens.rows());

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Vector x = batch.images.row(static_cast<Eigen::Index>(b)).transpose();
    const Vector r = batch.radiomics.row(static_cast<Eigen::Index>(b)).transpose();
    const int y = batch.labels[b];
    const auto f = forward(params, x, encoder, class_tokens, r);
    res.loss -= log_prob(f.out.logits, y) * inv_n;

    const double x_norm = x.norm();
    Vector grad_pooled = Vector::Zero(params.token_dim());
    for (int i = 0; i < n_classes; ++i) {
      const double ds = (f.out.probabilities(i) - (i == y ? 1.0 : 0.0)) / params.tau * inv_n;
      const Vector e = f.out.prompt_embeddings.row(i).transpose();
      const double e_norm = e.norm();
      const double s = f.out.similarities(i);
      const Vector grad_e = ds * (x / (x_norm * e_norm) - s * e / (e_norm * e_norm));
      grad_pooled += encoder.backward_pooled(f.enc[static_cast<std::size_t>(i)], grad_e);
    }
    g.context.rowwise() += (grad_pooled / n_tokens).transpose();
    const Vector grad_delta = grad_pooled * (m_tokens / n_tokens);
    g.b2 += grad_delta;
    g.w2.noalias() += grad_delta * f.meta.hidden.transpose();
    Vector grad_hidden = t.w2.transpose() * grad_delta;
    for (Eigen::Index h = 0; h < grad_hidden.size(); ++h)
      if (!(f.meta.pre(h) > 0.0)) grad_hidden(h) = 0.0;
    g.b1 += grad_hidden;
    g.w1.noalias() += grad_hidden * r.transpose();
  }
  return res;
}

double batch_loss(const PromptHeadParams& params, const FrozenTextEncoder& encoder, const Matrix& class_tokens,
                  const Batch& batch) {
  check_batch(params, class_tokens, batch);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto out = classify(params, batch.images.row(static_cast<Eigen::Index>(b)).transpose(), encoder, class_tokens,
                              batch.radiomics.row(static_cast<Eigen::Index>(b)).transpose());
    loss -= log_prob(out.logits, batch.labels[b]);
  }
  return loss / static_cast<double>(batch.size());
}

FeatureNormalizer::FeatureNormalizer(Vector mean, Vector scale) : mean_(std::move(mean)), scale_(std::move(scale)) {
  if (mean_.size() != scale_.size()) throw ValidationError("normalizer: mean and scale lengths differ");
  for (Eigen::Index i = 0; i < scale_.size(); ++i) {
    if (!(scale_(i) > 0.0) || !std::isfinite(mean_(i))) throw ValidationError("normalizer: invalid statistics");
  }
}

FeatureNormalizer FeatureNormalizer::fit(const Matrix& rows, std::vector<std::string> row_ids) {
  if (rows.rows() < 1) throw ValidationError("normalizer: no rows to fit");
  const Vector mean = rows.colwise().mean().transpose();
  Vector scale(rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double var = (rows.col(c).array() - mean(c)).square().mean();
    const double sd = std::sqrt(var);
    scale(c) = (sd > 0.0 && std::isfinite(sd)) ? sd : 1.0;
  }
  FeatureNormalizer n(mean, scale);
  n.fitted_ids_ = std::move(row_ids);
  return n;
}

Vector FeatureNormalizer::apply(const Vector& r) const {
  if (r.size() != mean_.size()) throw ValidationError("normalizer: feature count mismatch");
  return ((r - mean_).array() / scale_.array()).cwiseMax(-kClip).cwiseMin(kClip).matrix();
}

Matrix FeatureNormalizer::apply_rows(const Matrix& rows) const {
  Matrix out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out.row(i) = apply(rows.row(i).transpose()).transpose();
  return out;
}

namespace {

void append_row_major(std::vector<double>& buf, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) buf.push_back(m(r, c));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  ckpt.params.validate();
  const auto& t = ckpt.params.tensors;
  std::vector<double> buf;
  nlohmann::json arrays = nlohmann::json::array();
  auto add = [&](const char* name, const Matrix& m) {
    arrays.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", buf.size()}});
    append_row_major(buf, m);
  };
  add("context", t.context);
  add("metanet.w1", t.w1);
  add("metanet.b1", t.b1);
  add("metanet.w2", t.w2);
  add("metanet.b2", t.b2);
  add("normalizer.mean", ckpt.normalizer.mean());
  add("normalizer.scale", ckpt.normalizer.scale());
  add("class_tokens", ckpt.class_tokens);

  const auto bin = std::filesystem::path(path).replace_extension(".bin");
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["M"] = ckpt.params.context_tokens();
  j["d_t"] = ckpt.params.token_dim();
  j["n_r"] = ckpt.params.radiomics_dim();
  j["metanet_hidden"] = ckpt.params.hidden_dim();
  j["n_classes"] = ckpt.class_tokens.rows();
  j["tau"] = ckpt.params.tau;
  j["seed"] = ckpt.seed;
  j["encoder"] = {{"seed", ckpt.encoder.seed},
                  {"token_dim", ckpt.encoder.token_dim},
                  {"hidden_dim", ckpt.encoder.hidden_dim},
                  {"embed_dim", ckpt.encoder.embed_dim}};
  j["feature_names"] = ckpt.feature_names;
  j["dtype"] = "float64";
  j["endianness"] = "little";
  j["data_file"] = bin.filename().string();
  j["arrays"] = arrays;
  io::write_le<double>(bin, buf);
  io::write_json(path, j);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto j = io::read_json(path);
  Checkpoint c;
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw ValidationError("unsupported checkpoint format");
    if (j.at("dtype").get<std::string>() != "float64" || j.at("endianness").get<std::string>() != "little") {
      throw ValidationError("checkpoint arrays must be little-endian float64");
    }
    const auto data = io::read_le<double>(io::resolve(path, j.at("data_file").get<std::string>()));
    auto read = [&](const char* name) {
      for (const auto& a : j.at("arrays")) {
        if (a.at("name").get<std::string>() != name) continue;
        const auto rows = a.at("rows").get<Eigen::Index>(), cols = a.at("cols").get<Eigen::Index>();
        const auto off = a.at("offset").get<std::size_t>();
        if (rows < 0 || cols < 0 || off + static_cast<std::size_t>(rows * cols) > data.size()) {
          throw ValidationError(std::string("checkpoint array ") + name + " exceeds the data file");
        }
        Matrix m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index k = 0; k < cols; ++k) m(r, k) = data[off + static_cast<std::size_t>(r * cols + k)];
        return m;
      }
      throw ValidationError(std::string("checkpoint is missing array ") + name);
    };
    auto& t = c.params.tensors;
    t.context = read("context");
    t.w1 = read("metanet.w1");
    t.b1 = read("metanet.b1");
    t.w2 = read("metanet.w2");
    t.b2 = read("metanet.b2");
    c.params.tau = j.at("tau").get<double>();
    c.params.validate();
    if (c.params.context_tokens() != j.at("M").get<int>()) throw ValidationError("checkpoint M disagrees with context");
    c.normalizer = FeatureNormalizer(read("normalizer.mean"), read("normalizer.scale"));
    c.class_tokens = read("class_tokens");
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& e = j.at("encoder");
    c.encoder = {e.at("seed").get<std::uint64_t>(), e.at("token_dim").get<int>(), e.at("hidden_dim").get<int>(),
                 e.at("embed_dim").get<int>()};
    c.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  if (c.normalizer.size() != c.params.radiomics_dim() ||
      c.feature_names.size() != static_cast<std::size_t>(c.params.radiomics_dim())) {
    throw ValidationError("checkpoint feature count disagrees with the MetaNet input width");
  }
  if (c.class_tokens.cols() != c.params.token_dim() || c.encoder.token_dim != c.params.token_dim()) {
    throw ValidationError("checkpoint token width mismatch");
  }
  return c;
}

}  // namespace autorad
