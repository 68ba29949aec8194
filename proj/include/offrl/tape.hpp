#pragma once

#include <functional>
#include <vector>

#include "offrl/kernels.hpp"
#include "offrl/rng.hpp"
#include "offrl/tensor.hpp"

namespace offrl {

// Reverse-mode autodiff over a flat, topologically ordered op record.
// Node handles are plain ints in push order. A tape built with
// recording=false keeps values only (cheap inference path); backward()
// then refuses to run. backward() is single-shot per tape.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  int leaf(Tensor value);      // differentiable input or parameter
  int constant(Tensor value);  // non-differentiable input

  int matmul(int a, int b);  // [m,k] x [k,n] -> [m,n]
  int add(int a, int b);     // same shape
  int sub(int a, int b);
  int mul(int a, int b);  // elementwise
  int bias_add(int a, int bias);  // [n,d] + [d]
  int scale(int a, double s);
  int relu(int a);
  int tanh(int a);

  // Row softmax over the last axis of a rank-2 tensor. `keep` may name a
  // constant 0/1 tensor of the same shape; masked entries get probability
  // exactly 0 and a fully masked row is all zeros.
  int softmax_rows(int a, int keep = -1);

  // Normalisation over the last axis with learned gain/shift vectors.
  int layer_norm_rows(int a, int gain, int shift, double eps = 1e-5);

  // Inverted scaling: kept entries are multiplied by 1/(1-rate) in train
  // mode; eval mode is exactly the identity. Consumes size(a) draws.
  int dropout(int a, double rate, bool train, RngStream& stream);

  int reshape(int a, std::vector<int> shape);
  int transpose2d(int a);
  int slice_rows(int a, int begin, int count);
  int concat_cols(const std::vector<int>& parts);
  int gather_rows(int a, std::vector<int> rows);
  int gather_rows_strided(int a, int offset, int stride);

  // Batched multi-head attention over q,k,v of shape [batch*seq, embed]
  // with optional per-token key visibility (`key_keep`, constant [batch*seq])
  // and causal masking. Masked weights are exactly zero.
  int attention(int q, int k, int v, const kernels::AttentionShape& shape,
                int key_keep = -1, bool causal = true);

  int sum_all(int a);                  // scalar
  int mse_loss(int pred, int target);  // scalar, mean over all elements

  // Mean squared error over kept rows only; row_keep names a constant [n]
  // tensor, nonzero = row contributes. Errors if nothing is kept.
  int masked_mse_loss(int pred, int target, int row_keep);

  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& grad(int id) const { return nodes_[id].grad; }
  Tensor grad_or_zeros(int id) const;

  void backward(int loss);
  bool recording() const { return recording_; }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;
    bool needs_grad = false;
  };

  int push(Tensor value, bool needs_grad);
  bool wants(int id) const { return nodes_[id].needs_grad; }
  Tensor& grad_buf(int id);
  void add_grad(int id, const double* src, int64_t n, double scale = 1.0);
  void check_rank2(int id, const char* op) const;

  std::vector<Node> nodes_;
  bool recording_;
  bool back_done_ = false;
};

}  // namespace offrl
