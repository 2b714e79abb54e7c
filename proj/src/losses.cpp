#include "ganattr/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ganattr/errors.hpp"

namespace ganattr {

real sigmoid(real z) {
    // Evaluate through exp of a non-positive argument only.
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

Tensor sigmoid(const Tensor& logits) {
    Tensor out(logits.shape);
    for (std::size_t i = 0; i < logits.data.size(); ++i) out.data[i] = sigmoid(logits.data[i]);
    return out;
}

BinaryLoss sigmoid_bce(const Tensor& logits, const Tensor& labels) {
    if (logits.ndim() != 2 || logits.dim(1) != 1)
        throw ShapeError("sigmoid_bce: expected logits of shape [B,1]");
    if (labels.numel() != logits.dim(0))
        throw ShapeError("sigmoid_bce: label count does not match the batch");
    const int B = logits.dim(0);
    if (B < 1) throw ValueError("sigmoid_bce: empty batch");
    for (real y : labels.data)
        if (y != 0.0 && y != 1.0)
            throw ValueError("sigmoid_bce: labels must be exactly 0 or 1");

    BinaryLoss out;
    out.probs = sigmoid(logits);
    out.dlogits = Tensor(logits.shape);
    real total = 0.0;
    const real inv_b = 1.0 / static_cast<real>(B);
    for (int b = 0; b < B; ++b) {
        const real z = logits.data[b];
        const real y = labels.data[b];
        // max(z,0) - z*y + log(1+exp(-|z|)) == -y*log(p) - (1-y)*log(1-p)
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        out.dlogits.data[b] = (out.probs.data[b] - y) * inv_b;
    }
    out.loss = total * inv_b;
    if (!std::isfinite(out.loss)) throw ComputeError("sigmoid_bce: non-finite loss");
    return out;
}

Tensor softmax_rows(const Tensor& logits) {
    if (logits.ndim() != 2) throw ShapeError("softmax_rows: expected logits of shape [B,K]");
    const int B = logits.dim(0), K = logits.dim(1);
    Tensor out(logits.shape);
    for (int b = 0; b < B; ++b) {
        const real* z = logits.data.data() + static_cast<std::size_t>(b) * K;
        real* p = out.data.data() + static_cast<std::size_t>(b) * K;
        real zmax = z[0];
        for (int k = 1; k < K; ++k) zmax = std::max(zmax, z[k]);
        real denom = 0.0;
        for (int k = 0; k < K; ++k) {
            p[k] = std::exp(z[k] - zmax);
            denom += p[k];
        }
        for (int k = 0; k < K; ++k) p[k] /= denom;
    }
    return out;
}

MulticlassLoss softmax_ce(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw ShapeError("softmax_ce: expected logits of shape [B,K]");
    const int B = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != B)
        throw ShapeError("softmax_ce: label count does not match the batch");
    if (B < 1) throw ValueError("softmax_ce: empty batch");
    for (int y : labels)
        if (y < 0 || y >= K)
            throw ValueError("softmax_ce: label " + std::to_string(y) + " outside [0," +
                             std::to_string(K) + ")");

    MulticlassLoss out;
    out.probs = softmax_rows(logits);
    out.dlogits = Tensor(logits.shape);
    real total = 0.0;
    const real inv_b = 1.0 / static_cast<real>(B);
    for (int b = 0; b < B; ++b) {
        const real* z = logits.data.data() + static_cast<std::size_t>(b) * K;
        const real* p = out.probs.data.data() + static_cast<std::size_t>(b) * K;
        real* d = out.dlogits.data.data() + static_cast<std::size_t>(b) * K;
        real zmax = z[0];
        for (int k = 1; k < K; ++k) zmax = std::max(zmax, z[k]);
        real lse = 0.0;
        for (int k = 0; k < K; ++k) lse += std::exp(z[k] - zmax);
        total += std::log(lse) + zmax - z[labels[b]];
        for (int k = 0; k < K; ++k) d[k] = (p[k] - (k == labels[b] ? 1.0 : 0.0)) * inv_b;
    }
    out.loss = total * inv_b;
    if (!std::isfinite(out.loss)) throw ComputeError("softmax_ce: non-finite loss");
    return out;
}

}  // namespace ganattr
