#pragma once

#include <span>
#include <vector>

#include "gatefuse/tensor.hpp"

namespace gatefuse {

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d(loss)/d(logits), same shape as the logits
};

// Mean over the batch of -log softmax(logits)[label].
// Throws IndexError for a label outside [0, C).
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// Mean over the batch of w_i * KL(softmax(teacher_i / T) || softmax(student_i / T)).
// Only the student receives a gradient. `weights` may be empty (all ones).
// Throws ParameterError for T <= 0.
LossResult kl_divergence_tempered(const Tensor& teacher, const Tensor& student, double temperature,
                                  std::span<const double> weights = {});

// Per-example KL(softmax(teacher/T) || softmax(student/T)) without reduction.
std::vector<double> kl_per_example(const Tensor& teacher, const Tensor& student, double temperature);

}  // namespace gatefuse
