#include "offrl/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

// Both variants of every kernel funnel through the same per-row /
// per-(batch,head) workers, so the arithmetic per output element and its
// accumulation order never depend on the execution mode or thread count.

namespace offrl::kernels {

namespace {

std::atomic<Exec> g_exec{Exec::parallel};

inline void matmul_row(const double* a, const double* b, double* c, int i,
                       int k, int n) {
  const double* ai = a + static_cast<int64_t>(i) * k;
  double* ci = c + static_cast<int64_t>(i) * n;
  for (int j = 0; j < n; ++j) ci[j] = 0.0;
  for (int p = 0; p < k; ++p) {
    const double av = ai[p];
    const double* bp = b + static_cast<int64_t>(p) * n;
    for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
  }
}

inline void matmul_nt_row(const double* a, const double* b, double* c, int i,
                          int k, int n) {
  const double* ai = a + static_cast<int64_t>(i) * k;
  double* ci = c + static_cast<int64_t>(i) * n;
  for (int j = 0; j < n; ++j) {
    const double* bj = b + static_cast<int64_t>(j) * k;
    double acc = 0.0;
    for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
    ci[j] = acc;
  }
}

// c[k,n] = a[m,k]^T b[m,n]; row i of c accumulates over m in order.
inline void matmul_tn_row(const double* a, const double* b, double* c, int i,
                          int m, int k, int n) {
  double* ci = c + static_cast<int64_t>(i) * n;
  for (int j = 0; j < n; ++j) ci[j] = 0.0;
  for (int p = 0; p < m; ++p) {
    const double av = a[static_cast<int64_t>(p) * k + i];
    const double* bp = b + static_cast<int64_t>(p) * n;
    for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
  }
}

inline void softmax_row(const double* x, const double* keep, double* y, int i,
                        int cols) {
  const double* xi = x + static_cast<int64_t>(i) * cols;
  const double* ki = keep ? keep + static_cast<int64_t>(i) * cols : nullptr;
  double* yi = y + static_cast<int64_t>(i) * cols;
  double maxv = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int j = 0; j < cols; ++j) {
    if (ki && ki[j] == 0.0) continue;
    if (!any || xi[j] > maxv) maxv = xi[j];
    any = true;
  }
  if (!any) {
    for (int j = 0; j < cols; ++j) yi[j] = 0.0;
    return;
  }
  double sum = 0.0;
  for (int j = 0; j < cols; ++j) {
    if (ki && ki[j] == 0.0) {
      yi[j] = 0.0;
    } else {
      yi[j] = std::exp(xi[j] - maxv);
      sum += yi[j];
    }
  }
  const double inv = 1.0 / sum;
  for (int j = 0; j < cols; ++j) yi[j] *= inv;
}

inline void layer_norm_row(const double* x, const double* gain,
                           const double* shift, double eps, double* y,
                           double* mean, double* rstd, int i, int cols) {
  const double* xi = x + static_cast<int64_t>(i) * cols;
  double* yi = y + static_cast<int64_t>(i) * cols;
  double mu = 0.0;
  for (int j = 0; j < cols; ++j) mu += xi[j];
  mu /= cols;
  double var = 0.0;
  for (int j = 0; j < cols; ++j) {
    const double d = xi[j] - mu;
    var += d * d;
  }
  var /= cols;
  const double r = 1.0 / std::sqrt(var + eps);
  mean[i] = mu;
  rstd[i] = r;
  for (int j = 0; j < cols; ++j) yi[j] = (xi[j] - mu) * r * gain[j] + shift[j];
}

inline void attention_fwd_bh(const double* q, const double* k, const double* v,
                             const double* key_keep, bool causal, int b, int h,
                             const AttentionShape& s, double* out,
                             double* probs) {
  const int T = s.seq;
  const int hd = s.head_dim;
  const int64_t E = static_cast<int64_t>(s.heads) * hd;
  const int64_t row0 = static_cast<int64_t>(b) * T;
  const int64_t off = static_cast<int64_t>(h) * hd;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  double* P = probs + (static_cast<int64_t>(b) * s.heads + h) * T * T;
  std::vector<double> srow(static_cast<size_t>(T));
  for (int i = 0; i < T; ++i) {
    const double* qi = q + (row0 + i) * E + off;
    const int jmax = causal ? i : T - 1;
    double maxv = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (int j = 0; j <= jmax; ++j) {
      if (key_keep && key_keep[row0 + j] == 0.0) continue;
      const double* kj = k + (row0 + j) * E + off;
      double acc = 0.0;
      for (int d = 0; d < hd; ++d) acc += qi[d] * kj[d];
      acc *= scale;
      srow[static_cast<size_t>(j)] = acc;
      if (!any || acc > maxv) maxv = acc;
      any = true;
    }
    double* Pi = P + static_cast<int64_t>(i) * T;
    for (int j = 0; j < T; ++j) Pi[j] = 0.0;
    double* oi = out + (row0 + i) * E + off;
    for (int d = 0; d < hd; ++d) oi[d] = 0.0;
    if (!any) continue;
    double sum = 0.0;
    for (int j = 0; j <= jmax; ++j) {
      if (key_keep && key_keep[row0 + j] == 0.0) continue;
      const double e = std::exp(srow[static_cast<size_t>(j)] - maxv);
      Pi[j] = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j <= jmax; ++j) Pi[j] *= inv;
    for (int j = 0; j <= jmax; ++j) {
      const double p = Pi[j];
      if (p == 0.0) continue;
      const double* vj = v + (row0 + j) * E + off;
      for (int d = 0; d < hd; ++d) oi[d] += p * vj[d];
    }
  }
}

inline void attention_bwd_bh(const double* q, const double* k, const double* v,
                             const double* probs, const double* dout, int b,
                             int h, const AttentionShape& s, double* dq,
                             double* dk, double* dv) {
  const int T = s.seq;
  const int hd = s.head_dim;
  const int64_t E = static_cast<int64_t>(s.heads) * hd;
  const int64_t row0 = static_cast<int64_t>(b) * T;
  const int64_t off = static_cast<int64_t>(h) * hd;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const double* P = probs + (static_cast<int64_t>(b) * s.heads + h) * T * T;
  std::vector<double> dp(static_cast<size_t>(T));
  for (int i = 0; i < T; ++i) {
    const double* Pi = P + static_cast<int64_t>(i) * T;
    const double* doi = dout + (row0 + i) * E + off;
    double rowdot = 0.0;
    for (int j = 0; j < T; ++j) {
      if (Pi[j] == 0.0) {
        dp[static_cast<size_t>(j)] = 0.0;
        continue;
      }
      const double* vj = v + (row0 + j) * E + off;
      double acc = 0.0;
      for (int d = 0; d < hd; ++d) acc += doi[d] * vj[d];
      dp[static_cast<size_t>(j)] = acc;
      rowdot += acc * Pi[j];
    }
    double* dqi = dq + (row0 + i) * E + off;
    for (int j = 0; j < T; ++j) {
      const double p = Pi[j];
      if (p == 0.0) continue;
      const double ds = p * (dp[static_cast<size_t>(j)] - rowdot) * scale;
      const double* kj = k + (row0 + j) * E + off;
      const double* qi = q + (row0 + i) * E + off;
      double* dkj = dk + (row0 + j) * E + off;
      double* dvj = dv + (row0 + j) * E + off;
      for (int d = 0; d < hd; ++d) {
        dqi[d] += ds * kj[d];
        dkj[d] += ds * qi[d];
        dvj[d] += p * doi[d];
      }
    }
  }
}

}  // namespace

void set_default_exec(Exec mode) { g_exec.store(mode); }
Exec default_exec() { return g_exec.load(); }

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) matmul_nt_row(a, b, c, i, k, n);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < k; ++i) matmul_tn_row(a, b, c, i, m, k, n);
}

void softmax_rows(const double* x, const double* keep, double* y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) softmax_row(x, keep, y, i, cols);
}

void layer_norm_rows(const double* x, const double* gain, const double* shift,
                     double eps, double* y, double* mean, double* rstd,
                     int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    layer_norm_row(x, gain, shift, eps, y, mean, rstd, i, cols);
}

void attention_forward(const double* q, const double* k, const double* v,
                       const double* key_keep, bool causal,
                       const AttentionShape& s, double* out, double* probs) {
  for (int bh = 0; bh < s.batch * s.heads; ++bh)
    attention_fwd_bh(q, k, v, key_keep, causal, bh / s.heads, bh % s.heads, s,
                     out, probs);
}

void attention_backward(const double* q, const double* k, const double* v,
                        const double* probs, const double* dout,
                        const AttentionShape& s, double* dq, double* dk,
                        double* dv) {
  for (int bh = 0; bh < s.batch * s.heads; ++bh)
    attention_bwd_bh(q, k, v, probs, dout, bh / s.heads, bh % s.heads, s, dq,
                     dk, dv);
}

}  // namespace serial

namespace parallel {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) matmul_nt_row(a, b, c, i, k, n);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < k; ++i) matmul_tn_row(a, b, c, i, m, k, n);
}

void softmax_rows(const double* x, const double* keep, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) softmax_row(x, keep, y, i, cols);
}

void layer_norm_rows(const double* x, const double* gain, const double* shift,
                     double eps, double* y, double* mean, double* rstd,
                     int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
    layer_norm_row(x, gain, shift, eps, y, mean, rstd, i, cols);
}

void attention_forward(const double* q, const double* k, const double* v,
                       const double* key_keep, bool causal,
                       const AttentionShape& s, double* out, double* probs) {
#pragma omp parallel for schedule(static)
  for (int bh = 0; bh < s.batch * s.heads; ++bh)
    attention_fwd_bh(q, k, v, key_keep, causal, bh / s.heads, bh % s.heads, s,
                     out, probs);
}

void attention_backward(const double* q, const double* k, const double* v,
                        const double* probs, const double* dout,
                        const AttentionShape& s, double* dq, double* dk,
                        double* dv) {
  // (b,h) blocks touch disjoint slices of dq/dk/dv.
#pragma omp parallel for schedule(static)
  for (int bh = 0; bh < s.batch * s.heads; ++bh)
    attention_bwd_bh(q, k, v, probs, dout, bh / s.heads, bh % s.heads, s, dq,
                     dk, dv);
}

}  // namespace parallel

namespace {
// Small problems stay serial; identical results either way, so the
// threshold is a pure throughput knob.
constexpr int64_t kParallelFlops = 1 << 16;

inline bool go_parallel(int64_t work) {
  return g_exec.load() == Exec::parallel && work >= kParallelFlops && thread_count() > 1;
}
}  // namespace

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  if (go_parallel(static_cast<int64_t>(m) * k * n))
    parallel::matmul(a, b, c, m, k, n);
  else
    serial::matmul(a, b, c, m, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  if (go_parallel(static_cast<int64_t>(m) * k * n))
    parallel::matmul_nt(a, b, c, m, k, n);
  else
    serial::matmul_nt(a, b, c, m, k, n);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  if (go_parallel(static_cast<int64_t>(m) * k * n))
    parallel::matmul_tn(a, b, c, m, k, n);
  else
    serial::matmul_tn(a, b, c, m, k, n);
}

void softmax_rows(const double* x, const double* keep, double* y, int rows, int cols) {
  if (go_parallel(static_cast<int64_t>(rows) * cols * 8))
    parallel::softmax_rows(x, keep, y, rows, cols);
  else
    serial::softmax_rows(x, keep, y, rows, cols);
}

void layer_norm_rows(const double* x, const double* gain, const double* shift,
                     double eps, double* y, double* mean, double* rstd,
                     int rows, int cols) {
  if (go_parallel(static_cast<int64_t>(rows) * cols * 8))
    parallel::layer_norm_rows(x, gain, shift, eps, y, mean, rstd, rows, cols);
  else
    serial::layer_norm_rows(x, gain, shift, eps, y, mean, rstd, rows, cols);
}

void attention_forward(const double* q, const double* k, const double* v,
                       const double* key_keep, bool causal,
                       const AttentionShape& s, double* out, double* probs) {
  const int64_t work = static_cast<int64_t>(s.batch) * s.heads * s.seq * s.seq * s.head_dim;
  if (go_parallel(work))
    parallel::attention_forward(q, k, v, key_keep, causal, s, out, probs);
  else
    serial::attention_forward(q, k, v, key_keep, causal, s, out, probs);
}

void attention_backward(const double* q, const double* k, const double* v,
                        const double* probs, const double* dout,
                        const AttentionShape& s, double* dq, double* dk,
                        double* dv) {
  const int64_t work = static_cast<int64_t>(s.batch) * s.heads * s.seq * s.seq * s.head_dim;
  if (go_parallel(work))
    parallel::attention_backward(q, k, v, probs, dout, s, dq, dk, dv);
  else
    serial::attention_backward(q, k, v, probs, dout, s, dq, dk, dv);
}

}  // namespace offrl::kernels
