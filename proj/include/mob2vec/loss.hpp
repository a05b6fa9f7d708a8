#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mob2vec {

/// log(1 + exp(x)) without overflow.
template <typename T>
T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// Binary logistic loss of one positive score (index 0) and negative scores:
/// L = -log s(x_0) - sum_k log s(-x_k). Writes dL/dx_k into `coefficients`.
template <typename T>
T logistic_coefficients(std::span<const T> scores, std::span<T> coefficients) {
  T loss = T(0);
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (k == 0) {
      loss += softplus(-scores[k]);
      coefficients[k] = sigmoid(scores[k]) - T(1);
    } else {
      loss += softplus(scores[k]);
      coefficients[k] = sigmoid(scores[k]);
    }
  }
  return loss;
}

/// Negative-sampling loss for an input vector and output rows (row 0 is the
/// positive target). Fills the gradients with respect to the input and to
/// every output row (`outputs` and `output_grad` are row-major, dim columns).
template <typename T>
T negative_sampling_loss(std::span<const T> input, std::span<const T> outputs,
                         std::span<T> input_grad, std::span<T> output_grad) {
  const std::size_t dim = input.size();
  const std::size_t rows = outputs.size() / dim;
  std::vector<T> scores(rows);
  std::vector<T> coeffs(rows);
  for (std::size_t k = 0; k < rows; ++k) {
    T s = T(0);
    for (std::size_t d = 0; d < dim; ++d) s += input[d] * outputs[k * dim + d];
    scores[k] = s;
  }
  const T loss = logistic_coefficients<T>(std::span<const T>(scores), std::span<T>(coeffs));
  for (std::size_t d = 0; d < dim; ++d) input_grad[d] = T(0);
  for (std::size_t k = 0; k < rows; ++k) {
    for (std::size_t d = 0; d < dim; ++d) {
      input_grad[d] += coeffs[k] * outputs[k * dim + d];
      output_grad[k * dim + d] = coeffs[k] * input[d];
    }
  }
  return loss;
}

}  // namespace mob2vec
