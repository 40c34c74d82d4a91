#pragma once

#include <cstdint>
#include <string>

#include "autorad/prompt_head.hpp"

namespace autorad {

/// A random prompt-head problem: head, frozen encoder, class tokens and one
/// batch, all drawn from `seed`.
struct HeadProblem {
  PromptHeadParams params;
  FrozenTextEncoder encoder;
  Matrix class_tokens;
  Batch batch;
};

struct HeadProblemDims {
  int token_dim = 8;
  int embed_dim = 6;
  int context_tokens = 4;
  int n_classes = 3;
  int radiomics_dim = 10;
  int batch = 5;
  int metanet_hidden = 3;
  int encoder_hidden = 7;
};

/// Parameters are drawn at a larger scale than init_params uses so that every
/// group has gradients well above rounding noise.
HeadProblem random_head_problem(std::uint64_t seed, const HeadProblemDims& dims = {});

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_group;
  long worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  long coordinates = 0;
};

/// Compares loss_and_grads against central differences of batch_loss over
/// every coordinate of every trainable group.
GradCheckResult check_gradients(const HeadProblem& problem, double step = 1e-5, double floor = 1e-8);

}  // namespace autorad
