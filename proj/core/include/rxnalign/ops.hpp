#pragma once

// Differentiable ops over Tensor.  All tensors are 1-d or 2-d; "rows" means
// axis 0 and "cols" axis 1.  Index arguments are taken by value and baked
// into the tape.

#include <cstdint>
#include <vector>

#include "rxnalign/tensor.hpp"

namespace rxnalign::nd {

using Index = std::vector<std::int64_t>;

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_n(const std::vector<Tensor>& parts);

// x: (n, d), bias: (d) or (1, d); bias is added to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::int64_t start, std::int64_t count);
Tensor slice_cols(const Tensor& a, std::int64_t start, std::int64_t count);

// out[i] = x[idx[i]]; indices may repeat.
Tensor gather_rows(const Tensor& x, Index idx);
// out[idx[i]] = rows[i] into (out_rows, d) zeros; indices must be unique.
Tensor scatter_rows(const Tensor& rows, Index idx, std::int64_t out_rows);
// (1, d) row repeated count times.
Tensor tile_rows(const Tensor& row, std::int64_t count);

// out[i] = sum_t tables[t][codes[i * stride + t]]; every table is (size_t, d).
Tensor embedding_lookup_sum(const std::vector<Tensor>& tables,
                            const std::vector<int>& codes, std::int64_t items);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

// Row-wise softmax over a 2-d tensor, or over the whole of a 1-d tensor.
Tensor softmax(const Tensor& scores);
// allow runs row-major over the same shape; zeros get probability zero.
// A fully masked row throws.
Tensor masked_softmax(const Tensor& scores, std::vector<std::uint8_t> allow);
// Softmax of a 1-d tensor within segments given by seg (sorted not required).
Tensor segment_softmax(const Tensor& logits, Index seg, std::int64_t segments);

// out[s] = sum of rows i with seg[i] == s.
Tensor segment_sum_rows(const Tensor& x, Index seg, std::int64_t segments);
// out[i, :] = x[i, :] * s[i]; s is (n) or (n, 1).
Tensor scale_rows(const Tensor& x, const Tensor& s);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Inverted dropout with a stateless mask drawn from (key, element index).
Tensor dropout(const Tensor& x, double p, bool train, std::uint64_t key);

Tensor sum_all(const Tensor& x);
Tensor mean_rows(const Tensor& x);  // (n, d) -> (1, d)

// Mean token-level cross entropy from logits (n, classes); rows whose target
// equals ignore_index do not contribute.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     int ignore_index = -1);
Tensor mse_loss(const Tensor& pred, const Tensor& target);

}  // namespace rxnalign::nd
