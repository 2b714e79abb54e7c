#pragma once

#include <vector>

#include "ganattr/tensor.hpp"

namespace ganattr {

struct BinaryLoss {
    Tensor probs;    // sigmoid(logits), [B,1]
    real loss = 0.0; // mean over the batch
    Tensor dlogits;  // d(mean loss)/d(logits)
};

// Binary cross-entropy on logits [B,1] with labels in {0,1}, computed in the
// log-sum-exp form that stays finite for large magnitudes.
BinaryLoss sigmoid_bce(const Tensor& logits, const Tensor& labels);

struct MulticlassLoss {
    Tensor probs;    // row-wise softmax, [B,K]
    real loss = 0.0; // mean over the batch
    Tensor dlogits;
};

// Cross-entropy on logits [B,K] with integer class labels in [0,K).
MulticlassLoss softmax_ce(const Tensor& logits, const std::vector<int>& labels);

real sigmoid(real z);
Tensor sigmoid(const Tensor& logits);
Tensor softmax_rows(const Tensor& logits);

}  // namespace ganattr
