#include "autorad/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "autorad/rng.hpp"
#include "io_util.hpp"

namespace autorad {

namespace {

std::string cohort_id(int k, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "syn-%d-%03d", k, i);
  return buf;
}

}  // namespace

SyntheticCohort make_synthetic_cohort(const SyntheticCohortConfig& c, const FrozenTextEncoder& encoder,
                                      const Matrix& class_tokens) {
  if (c.per_class < 1 || c.n_classes < 2 || c.n_features < 1 || c.informative < 0 || c.informative > c.n_features ||
      c.min_slices < 1 || c.max_slices < c.min_slices || c.reference_tokens < 1) {
    throw ValidationError("synthetic cohort: invalid configuration");
  }
  if (c.embed_dim != encoder.embed_dim()) throw ValidationError("synthetic cohort: embed_dim != encoder output width");
  if (class_tokens.rows() != c.n_classes || class_tokens.cols() != encoder.token_dim()) {
    throw ValidationError("synthetic cohort: class tokens do not match n_classes x token_dim");
  }
  const int d_t = encoder.token_dim();
  const double n_tokens = c.reference_tokens + 1.0;
  Rng rng(derive_seed(c.seed, 1));
  auto random_direction = [&](int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.gaussian();
    return Vector(v / v.norm());
  };

  const Vector u_star = c.reference_norm * random_direction(d_t);
  Matrix centres(c.n_classes, c.embed_dim);
  for (int k = 0; k < c.n_classes; ++k) {
    const Vector u_k = u_star + c.class_shift * random_direction(d_t);
    Matrix prompts(c.n_classes, c.embed_dim);
    for (int i = 0; i < c.n_classes; ++i) {
      // Mean-pooled input of [u_k x M, c_i] is u_k M/(M+1) + c_i/(M+1); a
      // single-token sequence with that value pools to the same point.
      const Matrix token = (u_k * (c.reference_tokens / n_tokens) + class_tokens.row(i).transpose() / n_tokens).transpose();
      prompts.row(i) = encoder.encode(token).transpose();
    }
    const Vector mean = prompts.colwise().mean().transpose();
    const Vector axis = mean.normalized();
    Vector dev = prompts.row(k).transpose() - mean;
    dev -= dev.dot(axis) * axis;
    centres.row(k) = (axis + c.signal_gain * dev.normalized()).transpose();
  }
  Matrix offsets = Matrix::Zero(c.n_classes, c.n_features);
  for (int k = 0; k < c.n_classes; ++k)
    for (int j = 0; j < c.informative; ++j) offsets(k, j) = c.feature_separation * rng.gaussian();
  std::vector<double> units(static_cast<std::size_t>(c.n_features));
  for (auto& u : units) u = std::pow(10.0, 4.0 * rng.uniform() - 1.0);

  SyntheticCohort out;
  out.embeddings.embed_dim = c.embed_dim;
  out.embeddings.token_dim = d_t;
  out.embeddings.class_tokens = class_tokens;
  for (int j = 0; j < c.n_features; ++j) {
    out.features.names.push_back("synthetic::" + std::string(j < c.informative ? "signal" : "noise") + "::f" +
                                 std::to_string(j));
  }
  const double per_dim = 1.0 / std::sqrt(static_cast<double>(c.embed_dim));
  for (int k = 0; k < c.n_classes; ++k) {
    for (int i = 0; i < c.per_class; ++i) {
      const std::string id = cohort_id(k, i);
      Vector nodule = centres.row(k).transpose();
      for (int d = 0; d < c.embed_dim; ++d) nodule(d) += c.embedding_noise * per_dim * rng.gaussian();
      const int n_slices =
          c.min_slices + static_cast<int>(rng.below(static_cast<std::uint64_t>(c.max_slices - c.min_slices + 1)));
      Matrix slices(n_slices, c.embed_dim);
      for (int s = 0; s < n_slices; ++s)
        for (int d = 0; d < c.embed_dim; ++d) slices(s, d) = nodule(d) + c.slice_noise * per_dim * rng.gaussian();
      out.embeddings.slices.emplace(id, std::move(slices));

      std::vector<double> row(static_cast<std::size_t>(c.n_features));
      for (int j = 0; j < c.n_features; ++j) {
        row[static_cast<std::size_t>(j)] = units[static_cast<std::size_t>(j)] * (offsets(k, j) + rng.gaussian());
      }
      out.features.ids.push_back(id);
      out.features.rows.push_back(std::move(row));
      out.labels.emplace(id, k);
    }
  }
  return out;
}

std::vector<NoduleRecord> write_synthetic_volumes(const SyntheticVolumeConfig& c, const std::filesystem::path& dir) {
  if (c.per_class < 1 || c.n_classes < 1 || c.n_classes > kNumClasses || c.annotators < 1) {
    throw ValidationError("synthetic volumes: invalid configuration");
  }
  const auto [nz, ny, nx] = c.dims;
  const std::size_t n_vox = static_cast<std::size_t>(nz) * ny * nx;
  std::vector<NoduleRecord> records;
  Rng rng(derive_seed(c.seed, 2));
  for (int k = 0; k < c.n_classes; ++k) {
    for (int i = 0; i < c.per_class; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "vol-%d-%02d", k, i);
      const std::string id = buf;
      // Nodule radii in mm grow with the class; texture amplitude too.
      const double radius_mm = 3.0 + 1.5 * k + rng.uniform();
      const double texture = 20.0 + 60.0 * k;
      const double cz = nz / 2.0 + (rng.uniform() - 0.5), cy = ny / 2.0 + 2.0 * (rng.uniform() - 0.5),
                   cx = nx / 2.0 + 2.0 * (rng.uniform() - 0.5);
      std::vector<float> data(n_vox);
      std::vector<double> dist(n_vox);
      for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
          for (int x = 0; x < nx; ++x) {
            const double dz = (z - cz) * c.spacing[0], dy = (y - cy) * c.spacing[1], dx = (x - cx) * c.spacing[2];
            const double r = std::sqrt(dz * dz + dy * dy * 1.1 + dx * dx * 0.9);
            const std::size_t idx = (static_cast<std::size_t>(z) * ny + y) * nx + x;
            dist[idx] = r;
            const double inside = 1.0 / (1.0 + std::exp((r - radius_mm) * 2.0));
            data[idx] = static_cast<float>(-850.0 + 25.0 * rng.gaussian() + inside * (880.0 + texture * rng.gaussian()));
          }
      const auto vol_path = dir / "volumes" / (id + ".json");
      save_volume(VoxelVolume(c.dims, c.spacing, data), vol_path);

      NoduleRecord rec;
      rec.nodule_id = id;
      rec.volume_path = vol_path;
      int z_first = nz, z_last = -1;
      for (int a = 0; a < c.annotators; ++a) {
        const double ra = radius_mm * (0.9 + 0.2 * rng.uniform());
        std::vector<std::uint8_t> m(n_vox);
        for (std::size_t v = 0; v < n_vox; ++v) m[v] = dist[v] <= ra ? 1 : 0;
        for (int z = 0; z < nz; ++z)
          for (std::size_t v = static_cast<std::size_t>(z) * ny * nx; v < static_cast<std::size_t>(z + 1) * ny * nx; ++v)
            if (m[v]) {
              z_first = std::min(z_first, z);
              z_last = std::max(z_last, z);
              break;
            }
        const auto mask_path = dir / "masks" / (id + "_a" + std::to_string(a) + ".json");
        save_mask(BinaryMask(c.dims, std::move(m)), mask_path, c.spacing);
        rec.mask_paths.push_back(mask_path);
        const double base = k == 0 ? 1.5 : (k == 1 ? 3.0 : 4.5);
        rec.scores.push_back(std::clamp(std::round(base + (rng.uniform() - 0.5)), 1.0, 5.0));
      }
      if (z_last < 0) throw ValidationError("synthetic volumes: nodule " + id + " has an empty mask");
      rec.slice_range = {z_first, z_last};
      rec.label = derive_label(rec.scores);
      records.push_back(std::move(rec));
    }
  }
  save_nodule_records(records, dir / "records.json");
  return records;
}

}  // namespace autorad
