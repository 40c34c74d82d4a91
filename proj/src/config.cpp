#include "autorad/config.hpp"

#include <set>

#include "io_util.hpp"

namespace autorad {

namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ValidationError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError(field(key) + ": wrong type");
    }
  }

  Reader child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Reader(obj_.contains(key) ? obj_.at(key) : empty, field(key));
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ValidationError(field(key) + ": unknown key");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
  if (!(extraction.bin_width > 0.0)) throw ValidationError("extraction.bin_width must be positive");
  for (double s : extraction.filters.log_sigmas) {
    if (!(s > 0.0)) throw ValidationError("extraction.log_sigmas must be positive");
  }
  const std::set<std::string> bands{"LL", "LH", "HL", "HH"};
  std::set<std::string> seen;
  for (const auto& b : extraction.filters.wavelet_subbands) {
    if (!bands.count(b)) throw ValidationError("extraction.wavelet_subbands: unknown sub-band " + b);
    if (!seen.insert(b).second) throw ValidationError("extraction.wavelet_subbands: duplicate sub-band " + b);
  }
  train.validate();
  if (train.seed != seed) throw ValidationError("train.seed must equal seed");
  if (encoder.hidden_dim < 1) throw ValidationError("encoder.hidden_dim must be positive");
  if (encoder.n_classes < 2) throw ValidationError("encoder.n_classes must be at least 2");
  if (!(encoder.class_token_scale > 0.0)) throw ValidationError("encoder.class_token_scale must be positive");
  if (toy_embedding.embed_dim < 1 || toy_embedding.token_dim < 1) {
    throw ValidationError("toy_embedding dimensions must be positive");
  }
  if (toy_embedding.grid < 1 || toy_embedding.crop_size < toy_embedding.grid) {
    throw ValidationError("toy_embedding.crop_size must be at least toy_embedding.grid");
  }
  if (sweep.grid.empty()) throw ValidationError("sweep.grid must not be empty");
  for (int m : sweep.grid) {
    if (m < 1) throw ValidationError("sweep.grid entries must be positive");
  }
  if (sweep.folds < 0 || sweep.folds > train.folds) throw ValidationError("sweep.folds must lie in [0, train.folds]");
}

RunConfig parse_run_config(const std::string& json_text, const std::string& source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON in " + source + ": " + e.what());
  }
  RunConfig c;
  Reader root(j, "");
  root.get("seed", c.seed);
  c.train.seed = c.seed;
  {
    auto r = root.child("extraction");
    r.get("bin_width", c.extraction.bin_width);
    r.get("log_sigmas", c.extraction.filters.log_sigmas);
    r.get("wavelet_subbands", c.extraction.filters.wavelet_subbands);
    r.finish();
  }
  {
    auto r = root.child("train");
    r.get("lr0", c.train.lr0);
    r.get("momentum", c.train.momentum);
    r.get("weight_decay", c.train.weight_decay);
    r.get("epochs", c.train.epochs);
    r.get("batch_size", c.train.batch_size);
    r.get("folds", c.train.folds);
    r.get("context_tokens", c.train.context_tokens);
    r.get("tau", c.train.tau);
    r.get("metanet_hidden", c.train.metanet_hidden);
    r.finish();
  }
  {
    auto r = root.child("encoder");
    r.get("seed", c.encoder.seed);
    r.get("hidden_dim", c.encoder.hidden_dim);
    r.get("n_classes", c.encoder.n_classes);
    r.get("class_token_seed", c.encoder.class_token_seed);
    r.get("class_token_scale", c.encoder.class_token_scale);
    r.finish();
  }
  {
    auto r = root.child("toy_embedding");
    r.get("embed_dim", c.toy_embedding.embed_dim);
    r.get("token_dim", c.toy_embedding.token_dim);
    r.get("grid", c.toy_embedding.grid);
    r.get("crop_size", c.toy_embedding.crop_size);
    r.get("seed", c.toy_embedding.seed);
    r.finish();
  }
  {
    auto r = root.child("sweep");
    r.get("grid", c.sweep.grid);
    r.get("folds", c.sweep.folds);
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(io::read_text(path), path.string());
}

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["extraction"] = {{"bin_width", extraction.bin_width},
                     {"log_sigmas", extraction.filters.log_sigmas},
                     {"wavelet_subbands", extraction.filters.wavelet_subbands}};
  j["train"] = {{"lr0", train.lr0},
                {"momentum", train.momentum},
                {"weight_decay", train.weight_decay},
                {"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"folds", train.folds},
                {"context_tokens", train.context_tokens},
                {"tau", train.tau},
                {"metanet_hidden", train.metanet_hidden}};
  j["encoder"] = {{"seed", encoder.seed},
                  {"hidden_dim", encoder.hidden_dim},
                  {"n_classes", encoder.n_classes},
                  {"class_token_seed", encoder.class_token_seed},
                  {"class_token_scale", encoder.class_token_scale}};
  j["toy_embedding"] = {{"embed_dim", toy_embedding.embed_dim},
                        {"token_dim", toy_embedding.token_dim},
                        {"grid", toy_embedding.grid},
                        {"crop_size", toy_embedding.crop_size},
                        {"seed", toy_embedding.seed}};
  j["sweep"] = {{"grid", sweep.grid}, {"folds", sweep.folds}};
  return j.dump(2) + "\n";
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  io::write_text(path, config.to_json());
}

EncoderSpec encoder_spec(const EncoderConfig& config, int token_dim, int embed_dim) {
  return {config.seed, token_dim, config.hidden_dim, embed_dim};
}

ClassTokenFallback class_token_fallback(const EncoderConfig& config) {
  return {config.n_classes, config.class_token_seed, config.class_token_scale};
}

}  // namespace autorad
