#include "autorad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "autorad/rng.hpp"

namespace autorad {

HeadProblem random_head_problem(std::uint64_t seed, const HeadProblemDims& d) {
  Rng rng(seed);
  auto fill = [&](Eigen::Index rows, Eigen::Index cols, double sd) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = sd * rng.gaussian();
    return m;
  };
  PromptHeadParams p;
  p.tau = 0.5 + rng.uniform();
  p.tensors.context = fill(d.context_tokens, d.token_dim, 0.5);
  p.tensors.w1 = fill(d.metanet_hidden, d.radiomics_dim, 0.5);
  p.tensors.b1 = fill(d.metanet_hidden, 1, 0.5);
  p.tensors.w2 = fill(d.token_dim, d.metanet_hidden, 0.5);
  p.tensors.b2 = fill(d.token_dim, 1, 0.5);
  Batch b;
  b.images = fill(d.batch, d.embed_dim, 1.0);
  b.radiomics = fill(d.batch, d.radiomics_dim, 1.0);
  for (int i = 0; i < d.batch; ++i) b.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(d.n_classes))));
  const auto encoder_seed = rng.next_u64();
  Matrix class_tokens = fill(d.n_classes, d.token_dim, 1.0);
  return {std::move(p), FrozenTextEncoder(encoder_seed, d.token_dim, d.encoder_hidden, d.embed_dim),
          std::move(class_tokens), std::move(b)};
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckResult check_gradients(const HeadProblem& problem, double step, double floor) {
  const auto analytic = loss_and_grads(problem.params, problem.encoder, problem.class_tokens, problem.batch);
  PromptHeadParams work = problem.params;
  GradCheckResult res;
  for (int g = 0; g < HeadTensors::kGroupCount; ++g) {
    auto values = work.tensors.group(g);
    const auto grads = analytic.grads.group(g);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      const double orig = values(i);
      values(i) = orig + step;
      const double up = batch_loss(work, problem.encoder, problem.class_tokens, problem.batch);
      values(i) = orig - step;
      const double down = batch_loss(work, problem.encoder, problem.class_tokens, problem.batch);
      values(i) = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(grads(i), numeric, floor);
      ++res.coordinates;
      if (err > res.max_rel_error || res.worst_index < 0) {
        res.max_rel_error = err;
        res.worst_group = HeadTensors::group_name(g);
        res.worst_index = static_cast<long>(i);
        res.worst_analytic = grads(i);
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace autorad
