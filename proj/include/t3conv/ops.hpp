#pragma once

#include <vector>

#include "t3conv/tape.hpp"
#include "t3conv/tensor.hpp"

namespace t3conv {

// Elementwise max(0, x). Subgradient 0 at x == 0.
Tensor relu(const Tensor& x, Tape* tape = nullptr);

// [N, C, T, W, H] -> [N, C]: mean over all temporal and spatial positions.
Tensor global_avg_pool(const Tensor& x, Tape* tape = nullptr);

// y[n,k] = sum_f w[k,f] x[n,f] + b[k] with x [N, F], w [K, F], b [K].
Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias, Tape* tape = nullptr);

// Mean softmax cross-entropy over the batch, computed with a log-sum-exp
// shift; returns a scalar tensor. labels[n] in [0, K).
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tape* tape = nullptr);

// Row-wise softmax probabilities (no tape; evaluation helper).
Tensor softmax(const Tensor& logits);

// Elementwise a + b for equal shapes.
Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

// c * x.
Tensor scale(const Tensor& x, double c, Tape* tape = nullptr);

}  // namespace t3conv
