#pragma once

#include <cstdint>

// Hot numeric kernels. Every kernel ships in two variants: a serial
// reference and an OpenMP one parallelised over independent output rows or
// (batch, head) blocks. Both variants run the identical per-element
// accumulation order, so their results are bit-identical; the unit tests
// assert this and tools/kernel_bench compares their throughput.

namespace offrl::kernels {

enum class Exec { serial, parallel };

// Process-wide default used by the dispatching entry points below.
void set_default_exec(Exec mode);
Exec default_exec();
int thread_count();

struct AttentionShape {
  int batch = 0;
  int seq = 0;
  int heads = 0;
  int head_dim = 0;  // embed = heads * head_dim
};

namespace serial {

// c[m,n] = a[m,k] b[k,n]
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
// c[m,n] = a[m,k] b[n,k]^T
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
// c[k,n] = a[m,k]^T b[m,n]
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);

// Row softmax with an optional elementwise keep mask (nonzero = kept).
// Masked entries get probability exactly 0; a fully masked row is all zero.
void softmax_rows(const double* x, const double* keep, double* y, int rows, int cols);

// y = (x - mean) * rstd * gain + shift per row; mean/rstd captured per row.
void layer_norm_rows(const double* x, const double* gain, const double* shift,
                     double eps, double* y, double* mean, double* rstd,
                     int rows, int cols);

// q,k,v,out: [batch*seq, heads*head_dim]; key_keep: [batch*seq] or null;
// probs: [batch*heads*seq*seq] attention weights captured for backward.
// Masked (causal/pad) weights are exactly 0; a query with no visible keys
// produces a zero output row.
void attention_forward(const double* q, const double* k, const double* v,
                       const double* key_keep, bool causal, const AttentionShape& s,
                       double* out, double* probs);

// dq/dk/dv must be zero-initialised by the caller.
void attention_backward(const double* q, const double* k, const double* v,
                        const double* probs, const double* dout,
                        const AttentionShape& s, double* dq, double* dk, double* dv);

}  // namespace serial

namespace parallel {

void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);
void softmax_rows(const double* x, const double* keep, double* y, int rows, int cols);
void layer_norm_rows(const double* x, const double* gain, const double* shift,
                     double eps, double* y, double* mean, double* rstd,
                     int rows, int cols);
void attention_forward(const double* q, const double* k, const double* v,
                       const double* key_keep, bool causal, const AttentionShape& s,
                       double* out, double* probs);
void attention_backward(const double* q, const double* k, const double* v,
                        const double* probs, const double* dout,
                        const AttentionShape& s, double* dq, double* dk, double* dv);

}  // namespace parallel

// Dispatching wrappers honouring set_default_exec().
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);
void softmax_rows(const double* x, const double* keep, double* y, int rows, int cols);
void layer_norm_rows(const double* x, const double* gain, const double* shift,
                     double eps, double* y, double* mean, double* rstd,
                     int rows, int cols);
void attention_forward(const double* q, const double* k, const double* v,
                       const double* key_keep, bool causal, const AttentionShape& s,
                       double* out, double* probs);
void attention_backward(const double* q, const double* k, const double* v,
                        const double* probs, const double* dout,
                        const AttentionShape& s, double* dq, double* dk, double* dv);

}  // namespace offrl::kernels
