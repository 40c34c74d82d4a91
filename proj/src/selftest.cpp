#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <set>

#include "autorad/app.hpp"
#include "autorad/gradcheck.hpp"
#include "autorad/metrics.hpp"
#include "autorad/preprocess.hpp"
#include "autorad/rng.hpp"
#include "autorad/texture.hpp"
#include "autorad/trainer.hpp"

namespace autorad {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

SelftestCheck gradient_check() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) worst = std::max(worst, check_gradients(random_head_problem(100 + s)).max_rel_error);
  return {"gradients match central differences", worst <= 1e-5, "max relative error " + fmt("%.2e", worst)};
}

SelftestCheck softmax_check() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto prob = random_head_problem(200 + s);
    const auto out = classify(prob.params, prob.batch.images.row(0).transpose(), prob.encoder, prob.class_tokens,
                              prob.batch.radiomics.row(0).transpose());
    worst = std::max(worst, std::abs(out.probabilities.sum() - 1.0));
  }
  return {"probabilities sum to one", worst <= 1e-12, "max deviation " + fmt("%.1e", worst)};
}

SelftestCheck coop_check() {
  auto prob = random_head_problem(300);
  prob.params.tensors.w2.setZero();
  prob.params.tensors.b2.setZero();
  Vector first;
  bool same = true;
  for (Eigen::Index i = 0; i < prob.batch.images.rows(); ++i) {
    const auto out = classify(prob.params, prob.batch.images.row(0).transpose(), prob.encoder, prob.class_tokens,
                              prob.batch.radiomics.row(i).transpose());
    if (i == 0) first = out.logits;
    same = same && out.logits == first;
  }
  return {"zero MetaNet output gives instance-independent prompts", same, same ? "logits identical" : "logits differ"};
}

SelftestCheck label_check() {
  const std::vector<std::pair<double, Label>> cases{{1.0, Label::benign},  {2.49, Label::benign},
                                                    {2.5, Label::unsure},  {3.5, Label::unsure},
                                                    {3.51, Label::malignant}, {5.0, Label::malignant}};
  bool ok = true;
  for (const auto& [mean, want] : cases) {
    const double s[1] = {mean};
    ok = ok && derive_label(s) == want;
  }
  return {"label thresholds", ok, ""};
}

SelftestCheck schedule_check() {
  const long T = 1000;
  double worst = 0.0;
  for (long t : {0L, T / 4, T / 2, 3 * T / 4, T}) {
    const double want = 1e-4 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / T));
    worst = std::max(worst, std::abs(cosine_lr(t, T, 1e-4) - want));
  }
  return {"cosine schedule", worst <= 1e-12, "max deviation " + fmt("%.1e", worst)};
}

SelftestCheck folds_check() {
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) labels.push_back(i < 100 ? 0 : (i < 160 ? 1 : 2));
  const auto folds = stratified_folds(labels, 5, 42);
  std::set<std::size_t> seen;
  bool ok = true;
  for (const auto& f : folds) {
    int counts[3] = {0, 0, 0};
    for (auto i : f) {
      ok = ok && seen.insert(i).second;
      ++counts[labels[i]];
    }
    ok = ok && std::abs(counts[0] - 20) <= 1 && std::abs(counts[1] - 12) <= 1 && std::abs(counts[2] - 8) <= 1;
  }
  ok = ok && seen.size() == labels.size();
  return {"stratified folds", ok, ""};
}

SelftestCheck glcm_check() {
  Rng rng(7);
  bool ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(6));
    ImageGrid img(n, n);
    MaskGrid roi(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        img(r, c) = 25.0 * static_cast<double>(rng.below(5));
        roi(r, c) = rng.uniform() < 0.8 ? 1 : 0;
      }
    roi(0, 0) = roi(0, 1) = 1;
    const auto d = discretize_fixed_width(img, roi);
    const auto m = glcm(d, {0, 1});
    std::map<std::pair<int, int>, double> brute;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c + 1 < n; ++c)
        if (roi(r, c) && roi(r, c + 1)) {
          const int a = static_cast<int>(std::floor((img(r, c) - d.min_value) / 25.0)) + 1;
          const int b = static_cast<int>(std::floor((img(r, c + 1) - d.min_value) / 25.0)) + 1;
          brute[{a, b}] += 1.0;
          brute[{b, a}] += 1.0;
        }
    for (int a = 1; a <= d.n_levels; ++a)
      for (int b = 1; b <= d.n_levels; ++b) {
        const auto it = brute.find({a, b});
        ok = ok && m.at(a, b - 1) == (it == brute.end() ? 0.0 : it->second);
      }
  }
  return {"GLCM matches pair enumeration", ok, ""};
}

SelftestCheck auc_check() {
  Rng rng(9);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> labels;
    std::vector<double> scores;
    for (int i = 0; i < 30; ++i) {
      labels.push_back(static_cast<int>(rng.below(2)));
      scores.push_back(static_cast<double>(rng.below(8)) / 8.0);
    }
    labels[0] = 0;
    labels[1] = 1;
    const auto auc = rank_auc(labels, scores, 1);
    const auto roc = roc_curve(labels, scores, 1);
    worst = std::max(worst, std::abs(*auc - trapezoid_auc(roc)));
  }
  return {"rank AUC equals ROC area", worst <= 1e-9, "max deviation " + fmt("%.1e", worst)};
}

SelftestCheck resample_check() {
  std::vector<float> v(8);
  for (int i = 0; i < 8; ++i) v[static_cast<std::size_t>(i)] = static_cast<float>(i * 10);
  const VoxelVolume vol({2, 2, 2}, {2.0, 2.0, 2.0}, v);
  const auto out = shift_intensities(resample_isotropic(vol));
  const bool ok = out.dims() == Dims3{4, 4, 4} && out.spacing() == Vec3{1.0, 1.0, 1.0} && out.at(0, 0, 0) == 1000.0f;
  return {"isotropic resampling and shift", ok, ""};
}

}  // namespace

std::vector<SelftestCheck> run_selftest_checks() {
  const std::vector<std::function<SelftestCheck()>> checks{gradient_check, softmax_check, coop_check,
                                                           label_check,    schedule_check, folds_check,
                                                           glcm_check,     auc_check,     resample_check};
  std::vector<SelftestCheck> out;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    try {
      out.push_back(checks[i]());
    } catch (const std::exception& e) {
      out.push_back({"check " + std::to_string(i + 1), false, std::string("threw: ") + e.what()});
    }
  }
  return out;
}

}  // namespace autorad
