#include "offrl/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace offrl {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

int Tape::push(Tensor value, bool needs_grad) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad && recording_;
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buf(int id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor::zeros(node.value.shape());
  return node.grad;
}

void Tape::add_grad(int id, const double* src, int64_t n, double scale) {
  Tensor& g = grad_buf(id);
  require(g.size() == n, "add_grad: size mismatch for node " + std::to_string(id));
  double* dst = g.data();
  if (scale == 1.0) {
    for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
  } else {
    for (int64_t i = 0; i < n; ++i) dst[i] += scale * src[i];
  }
}

void Tape::check_rank2(int id, const char* op) const {
  if (nodes_[id].value.rank() != 2)
    throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got shape " +
                                nodes_[id].value.shape_str());
}

Tensor Tape::grad_or_zeros(int id) const {
  const Node& node = nodes_[id];
  if (node.grad.empty()) return Tensor::zeros(node.value.shape());
  return node.grad;
}

int Tape::leaf(Tensor value) { return push(std::move(value), true); }

int Tape::constant(Tensor value) { return push(std::move(value), false); }

int Tape::matmul(int a, int b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  const int m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  require(bv.dim(0) == k, "matmul: inner dims differ, " + av.shape_str() + " x " + bv.shape_str());
  Tensor out = Tensor::zeros({m, n});
  kernels::matmul(av.data(), bv.data(), out.data(), m, k, n);
  const int id = push(std::move(out), wants(a) || wants(b));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, b, id, m, k, n](Tape& t) {
      const double* go = t.nodes_[id].grad.data();
      if (t.wants(a)) {
        Tensor da = Tensor::zeros({m, k});
        kernels::matmul_nt(go, t.nodes_[b].value.data(), da.data(), m, n, k);
        t.add_grad(a, da.data(), da.size());
      }
      if (t.wants(b)) {
        Tensor db = Tensor::zeros({k, n});
        kernels::matmul_tn(t.nodes_[a].value.data(), go, db.data(), m, k, n);
        t.add_grad(b, db.data(), db.size());
      }
    };
  }
  return id;
}

int Tape::add(int a, int b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  require(av.same_shape(bv), "add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out = av;
  const double* bp = bv.data();
  double* op = out.data();
  for (int64_t i = 0; i < out.size(); ++i) op[i] += bp[i];
  const int id = push(std::move(out), wants(a) || wants(b));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, b, id](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      if (t.wants(a)) t.add_grad(a, go.data(), go.size());
      if (t.wants(b)) t.add_grad(b, go.data(), go.size());
    };
  }
  return id;
}

int Tape::sub(int a, int b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  require(av.same_shape(bv), "sub: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out = av;
  const double* bp = bv.data();
  double* op = out.data();
  for (int64_t i = 0; i < out.size(); ++i) op[i] -= bp[i];
  const int id = push(std::move(out), wants(a) || wants(b));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, b, id](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      if (t.wants(a)) t.add_grad(a, go.data(), go.size());
      if (t.wants(b)) t.add_grad(b, go.data(), go.size(), -1.0);
    };
  }
  return id;
}

int Tape::mul(int a, int b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  require(av.same_shape(bv), "mul: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out = av;
  const double* bp = bv.data();
  double* op = out.data();
  for (int64_t i = 0; i < out.size(); ++i) op[i] *= bp[i];
  const int id = push(std::move(out), wants(a) || wants(b));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, b, id](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      const int64_t n = go.size();
      if (t.wants(a)) {
        Tensor& ga = t.grad_buf(a);
        const double* bvp = t.nodes_[b].value.data();
        for (int64_t i = 0; i < n; ++i) ga.data()[i] += go.data()[i] * bvp[i];
      }
      if (t.wants(b)) {
        Tensor& gb = t.grad_buf(b);
        const double* avp = t.nodes_[a].value.data();
        for (int64_t i = 0; i < n; ++i) gb.data()[i] += go.data()[i] * avp[i];
      }
    };
  }
  return id;
}

int Tape::bias_add(int a, int bias) {
  check_rank2(a, "bias_add");
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[bias].value;
  const int n = av.dim(0), d = av.dim(1);
  require(bv.rank() == 1 && bv.dim(0) == d,
          "bias_add: bias shape " + bv.shape_str() + " does not match columns of " + av.shape_str());
  Tensor out = av;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.at2(i, j) += bv.at(j);
  const int id = push(std::move(out), wants(a) || wants(bias));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, bias, id, n, d](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      if (t.wants(a)) t.add_grad(a, go.data(), go.size());
      if (t.wants(bias)) {
        Tensor& gb = t.grad_buf(bias);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < d; ++j) gb.at(j) += go.at2(i, j);
      }
    };
  }
  return id;
}

int Tape::scale(int a, double s) {
  Tensor out = nodes_[a].value;
  double* op = out.data();
  for (int64_t i = 0; i < out.size(); ++i) op[i] *= s;
  const int id = push(std::move(out), wants(a));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, id, s](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      t.add_grad(a, go.data(), go.size(), s);
    };
  }
  return id;
}

int Tape::relu(int a) {
  Tensor out = nodes_[a].value;
  double* op = out.data();
  for (int64_t i = 0; i < out.size(); ++i)
    if (op[i] < 0.0) op[i] = 0.0;
  const int id = push(std::move(out), wants(a));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, id](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      Tensor& ga = t.grad_buf(a);
      const double* x = t.nodes_[a].value.data();
      for (int64_t i = 0; i < go.size(); ++i)
        if (x[i] > 0.0) ga.data()[i] += go.data()[i];
    };
  }
  return id;
}

int Tape::tanh(int a) {
  Tensor out = nodes_[a].value;
  double* op = out.data();
  for (int64_t i = 0; i < out.size(); ++i) op[i] = std::tanh(op[i]);
  const int id = push(std::move(out), wants(a));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, id](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      Tensor& ga = t.grad_buf(a);
      const double* y = t.nodes_[id].value.data();
      for (int64_t i = 0; i < go.size(); ++i)
        ga.data()[i] += go.data()[i] * (1.0 - y[i] * y[i]);
    };
  }
  return id;
}

int Tape::softmax_rows(int a, int keep) {
  check_rank2(a, "softmax_rows");
  const Tensor& av = nodes_[a].value;
  const int rows = av.dim(0), cols = av.dim(1);
  const double* keep_data = nullptr;
  if (keep >= 0) {
    const Tensor& kv = nodes_[keep].value;
    require(!wants(keep), "softmax_rows: keep mask must be a constant");
    require(kv.same_shape(av), "softmax_rows: keep shape " + kv.shape_str() +
                                   " does not match input " + av.shape_str());
    keep_data = kv.data();
  }
  Tensor out = Tensor::zeros({rows, cols});
  kernels::softmax_rows(av.data(), keep_data, out.data(), rows, cols);
  const int id = push(std::move(out), wants(a));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, id, rows, cols](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      const Tensor& p = t.nodes_[id].value;
      Tensor& ga = t.grad_buf(a);
      for (int i = 0; i < rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < cols; ++j) dot += go.at2(i, j) * p.at2(i, j);
        for (int j = 0; j < cols; ++j)
          ga.at2(i, j) += p.at2(i, j) * (go.at2(i, j) - dot);
      }
    };
  }
  return id;
}

int Tape::layer_norm_rows(int a, int gain, int shift, double eps) {
  check_rank2(a, "layer_norm_rows");
  const Tensor& av = nodes_[a].value;
  const int rows = av.dim(0), cols = av.dim(1);
  const Tensor& gv = nodes_[gain].value;
  const Tensor& sv = nodes_[shift].value;
  require(gv.rank() == 1 && gv.dim(0) == cols,
          "layer_norm_rows: gain shape " + gv.shape_str() + " for input " + av.shape_str());
  require(sv.rank() == 1 && sv.dim(0) == cols,
          "layer_norm_rows: shift shape " + sv.shape_str() + " for input " + av.shape_str());
  Tensor out = Tensor::zeros({rows, cols});
  std::vector<double> mean(static_cast<size_t>(rows));
  std::vector<double> rstd(static_cast<size_t>(rows));
  kernels::layer_norm_rows(av.data(), gv.data(), sv.data(), eps, out.data(),
                           mean.data(), rstd.data(), rows, cols);
  const int id = push(std::move(out), wants(a) || wants(gain) || wants(shift));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, gain, shift, id, rows, cols, mean = std::move(mean),
                       rstd = std::move(rstd)](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      const Tensor& x = t.nodes_[a].value;
      const Tensor& g = t.nodes_[gain].value;
      const bool wa = t.wants(a), wg = t.wants(gain), ws = t.wants(shift);
      std::vector<double> xhat(static_cast<size_t>(cols));
      std::vector<double> h(static_cast<size_t>(cols));
      for (int i = 0; i < rows; ++i) {
        const double r = rstd[static_cast<size_t>(i)];
        const double mu = mean[static_cast<size_t>(i)];
        for (int j = 0; j < cols; ++j)
          xhat[static_cast<size_t>(j)] = (x.at2(i, j) - mu) * r;
        if (wg) {
          Tensor& gg = t.grad_buf(gain);
          for (int j = 0; j < cols; ++j)
            gg.at(j) += go.at2(i, j) * xhat[static_cast<size_t>(j)];
        }
        if (ws) {
          Tensor& gs = t.grad_buf(shift);
          for (int j = 0; j < cols; ++j) gs.at(j) += go.at2(i, j);
        }
        if (wa) {
          double mean_h = 0.0, mean_hx = 0.0;
          for (int j = 0; j < cols; ++j) {
            h[static_cast<size_t>(j)] = go.at2(i, j) * g.at(j);
            mean_h += h[static_cast<size_t>(j)];
            mean_hx += h[static_cast<size_t>(j)] * xhat[static_cast<size_t>(j)];
          }
          mean_h /= cols;
          mean_hx /= cols;
          Tensor& ga = t.grad_buf(a);
          for (int j = 0; j < cols; ++j)
            ga.at2(i, j) += r * (h[static_cast<size_t>(j)] - mean_h -
                                 xhat[static_cast<size_t>(j)] * mean_hx);
        }
      }
    };
  }
  return id;
}

int Tape::dropout(int a, double rate, bool train, RngStream& stream) {
  require(rate >= 0.0 && rate < 1.0,
          "dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!train || rate == 0.0) {
    Tensor out = nodes_[a].value;
    const int id = push(std::move(out), wants(a));
    if (nodes_[id].needs_grad) {
      nodes_[id].back = [a, id](Tape& t) {
        const Tensor& go = t.nodes_[id].grad;
        t.add_grad(a, go.data(), go.size());
      };
    }
    return id;
  }
  const Tensor& av = nodes_[a].value;
  const int64_t n = av.size();
  const double inv = 1.0 / (1.0 - rate);
  // Per-element draws come from fixed counter offsets so the mask does not
  // depend on evaluation order; the stream then advances past all of them.
  std::vector<double> mask(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(stream.peek(i) >> 11) * 0x1.0p-53;
    mask[static_cast<size_t>(i)] = u < rate ? 0.0 : inv;
  }
  stream.skip(n);
  Tensor out = av;
  double* op = out.data();
  for (int64_t i = 0; i < n; ++i) op[i] *= mask[static_cast<size_t>(i)];
  const int id = push(std::move(out), wants(a));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, id, mask = std::move(mask)](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < go.size(); ++i)
        ga.data()[i] += go.data()[i] * mask[static_cast<size_t>(i)];
    };
  }
  return id;
}

int Tape::reshape(int a, std::vector<int> shape) {
  const Tensor& av = nodes_[a].value;
  require(shape_size(shape) == av.size(),
          "reshape: cannot view " + av.shape_str() + " as " + shape_to_string(shape));
  Tensor out = Tensor::from(std::move(shape), av.vec());
  const int id = push(std::move(out), wants(a));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, id](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      t.add_grad(a, go.data(), go.size());
    };
  }
  return id;
}

int Tape::transpose2d(int a) {
  check_rank2(a, "transpose2d");
  const Tensor& av = nodes_[a].value;
  const int m = av.dim(0), n = av.dim(1);
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at2(j, i) = av.at2(i, j);
  const int id = push(std::move(out), wants(a));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, id, m, n](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      Tensor& ga = t.grad_buf(a);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) ga.at2(i, j) += go.at2(j, i);
    };
  }
  return id;
}

int Tape::slice_rows(int a, int begin, int count) {
  check_rank2(a, "slice_rows");
  const Tensor& av = nodes_[a].value;
  const int n = av.dim(0), d = av.dim(1);
  require(begin >= 0 && count >= 0 && begin + count <= n,
          "slice_rows: [" + std::to_string(begin) + "," + std::to_string(begin + count) +
              ") out of range for " + av.shape_str());
  Tensor out = Tensor::zeros({count, d});
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < d; ++j) out.at2(i, j) = av.at2(begin + i, j);
  const int id = push(std::move(out), wants(a));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, id, begin, count, d](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      Tensor& ga = t.grad_buf(a);
      for (int i = 0; i < count; ++i)
        for (int j = 0; j < d; ++j) ga.at2(begin + i, j) += go.at2(i, j);
    };
  }
  return id;
}

int Tape::concat_cols(const std::vector<int>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  int rows = -1, total = 0;
  bool any_grad = false;
  for (int p : parts) {
    check_rank2(p, "concat_cols");
    const Tensor& pv = nodes_[p].value;
    if (rows < 0) rows = pv.dim(0);
    require(pv.dim(0) == rows, "concat_cols: row mismatch, " + pv.shape_str());
    total += pv.dim(1);
    any_grad = any_grad || wants(p);
  }
  Tensor out = Tensor::zeros({rows, total});
  int col = 0;
  for (int p : parts) {
    const Tensor& pv = nodes_[p].value;
    const int d = pv.dim(1);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < d; ++j) out.at2(i, col + j) = pv.at2(i, j);
    col += d;
  }
  const int id = push(std::move(out), any_grad);
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [parts, id, rows](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      int col = 0;
      for (int p : parts) {
        const int d = t.nodes_[p].value.dim(1);
        if (t.wants(p)) {
          Tensor& gp = t.grad_buf(p);
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < d; ++j) gp.at2(i, j) += go.at2(i, col + j);
        }
        col += d;
      }
    };
  }
  return id;
}

int Tape::gather_rows(int a, std::vector<int> rows) {
  check_rank2(a, "gather_rows");
  const Tensor& av = nodes_[a].value;
  const int n = av.dim(0), d = av.dim(1);
  for (int r : rows)
    require(r >= 0 && r < n,
            "gather_rows: row " + std::to_string(r) + " out of range for " + av.shape_str());
  const int m = static_cast<int>(rows.size());
  Tensor out = Tensor::zeros({m, d});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) out.at2(i, j) = av.at2(rows[static_cast<size_t>(i)], j);
  const int id = push(std::move(out), wants(a));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, id, rows = std::move(rows), d](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      Tensor& ga = t.grad_buf(a);
      for (size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < d; ++j)
          ga.at2(rows[i], j) += go.at2(static_cast<int>(i), j);
    };
  }
  return id;
}

int Tape::gather_rows_strided(int a, int offset, int stride) {
  check_rank2(a, "gather_rows_strided");
  const Tensor& av = nodes_[a].value;
  require(stride > 0 && offset >= 0,
          "gather_rows_strided: bad offset/stride " + std::to_string(offset) + "/" +
              std::to_string(stride));
  std::vector<int> rows;
  for (int r = offset; r < av.dim(0); r += stride) rows.push_back(r);
  require(!rows.empty(), "gather_rows_strided: selection is empty for " + av.shape_str());
  return gather_rows(a, std::move(rows));
}

int Tape::attention(int q, int k, int v, const kernels::AttentionShape& shape,
                    int key_keep, bool causal) {
  check_rank2(q, "attention");
  check_rank2(k, "attention");
  check_rank2(v, "attention");
  const Tensor& qv = nodes_[q].value;
  const int rows = shape.batch * shape.seq;
  const int embed = shape.heads * shape.head_dim;
  require(qv.dim(0) == rows && qv.dim(1) == embed,
          "attention: q shape " + qv.shape_str() + " does not match layout");
  require(nodes_[k].value.same_shape(qv) && nodes_[v].value.same_shape(qv),
          "attention: q/k/v shapes differ");
  const double* keep_data = nullptr;
  if (key_keep >= 0) {
    const Tensor& kk = nodes_[key_keep].value;
    require(!wants(key_keep), "attention: key_keep must be a constant");
    require(kk.size() == rows, "attention: key_keep size " + std::to_string(kk.size()) +
                                   " != tokens " + std::to_string(rows));
    keep_data = kk.data();
  }
  Tensor out = Tensor::zeros({rows, embed});
  std::vector<double> probs(static_cast<size_t>(shape.batch) * shape.heads *
                            shape.seq * shape.seq);
  kernels::attention_forward(qv.data(), nodes_[k].value.data(), nodes_[v].value.data(),
                             keep_data, causal, shape, out.data(), probs.data());
  const int id = push(std::move(out), wants(q) || wants(k) || wants(v));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [q, k, v, id, shape, rows, embed,
                       probs = std::move(probs)](Tape& t) {
      const Tensor& go = t.nodes_[id].grad;
      Tensor dq = Tensor::zeros({rows, embed});
      Tensor dk = Tensor::zeros({rows, embed});
      Tensor dv = Tensor::zeros({rows, embed});
      kernels::attention_backward(t.nodes_[q].value.data(), t.nodes_[k].value.data(),
                                  t.nodes_[v].value.data(), probs.data(), go.data(),
                                  shape, dq.data(), dk.data(), dv.data());
      if (t.wants(q)) t.add_grad(q, dq.data(), dq.size());
      if (t.wants(k)) t.add_grad(k, dk.data(), dk.size());
      if (t.wants(v)) t.add_grad(v, dv.data(), dv.size());
    };
  }
  return id;
}

int Tape::sum_all(int a) {
  const Tensor& av = nodes_[a].value;
  double s = 0.0;
  for (int64_t i = 0; i < av.size(); ++i) s += av.at(i);
  const int id = push(Tensor::scalar(s), wants(a));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [a, id](Tape& t) {
      const double go = t.nodes_[id].grad.value();
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < ga.size(); ++i) ga.data()[i] += go;
    };
  }
  return id;
}

int Tape::mse_loss(int pred, int target) {
  const Tensor& pv = nodes_[pred].value;
  const Tensor& tv = nodes_[target].value;
  require(pv.same_shape(tv),
          "mse_loss: shape mismatch " + pv.shape_str() + " vs " + tv.shape_str());
  require(pv.size() > 0, "mse_loss: empty input");
  const int64_t n = pv.size();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = pv.at(i) - tv.at(i);
    s += d * d;
  }
  const int id = push(Tensor::scalar(s / static_cast<double>(n)),
                      wants(pred) || wants(target));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [pred, target, id, n](Tape& t) {
      const double go = t.nodes_[id].grad.value();
      const double c = 2.0 * go / static_cast<double>(n);
      const Tensor& pv = t.nodes_[pred].value;
      const Tensor& tv = t.nodes_[target].value;
      if (t.wants(pred)) {
        Tensor& gp = t.grad_buf(pred);
        for (int64_t i = 0; i < n; ++i) gp.data()[i] += c * (pv.at(i) - tv.at(i));
      }
      if (t.wants(target)) {
        Tensor& gt = t.grad_buf(target);
        for (int64_t i = 0; i < n; ++i) gt.data()[i] -= c * (pv.at(i) - tv.at(i));
      }
    };
  }
  return id;
}

int Tape::masked_mse_loss(int pred, int target, int row_keep) {
  check_rank2(pred, "masked_mse_loss");
  const Tensor& pv = nodes_[pred].value;
  const Tensor& tv = nodes_[target].value;
  require(pv.same_shape(tv),
          "masked_mse_loss: shape mismatch " + pv.shape_str() + " vs " + tv.shape_str());
  const Tensor& kv = nodes_[row_keep].value;
  require(!wants(row_keep), "masked_mse_loss: row_keep must be a constant");
  const int n = pv.dim(0), d = pv.dim(1);
  require(kv.size() == n, "masked_mse_loss: row_keep size " + std::to_string(kv.size()) +
                              " != rows " + std::to_string(n));
  int64_t kept = 0;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    if (kv.at(i) == 0.0) continue;
    ++kept;
    for (int j = 0; j < d; ++j) {
      const double diff = pv.at2(i, j) - tv.at2(i, j);
      s += diff * diff;
    }
  }
  require(kept > 0, "masked_mse_loss: no rows kept");
  const int64_t m = kept * d;
  const int id = push(Tensor::scalar(s / static_cast<double>(m)),
                      wants(pred) || wants(target));
  if (nodes_[id].needs_grad) {
    nodes_[id].back = [pred, target, row_keep, id, n, d, m](Tape& t) {
      const double go = t.nodes_[id].grad.value();
      const double c = 2.0 * go / static_cast<double>(m);
      const Tensor& pv = t.nodes_[pred].value;
      const Tensor& tv = t.nodes_[target].value;
      const Tensor& kv = t.nodes_[row_keep].value;
      if (t.wants(pred)) {
        Tensor& gp = t.grad_buf(pred);
        for (int i = 0; i < n; ++i) {
          if (kv.at(i) == 0.0) continue;
          for (int j = 0; j < d; ++j)
            gp.at2(i, j) += c * (pv.at2(i, j) - tv.at2(i, j));
        }
      }
      if (t.wants(target)) {
        Tensor& gt = t.grad_buf(target);
        for (int i = 0; i < n; ++i) {
          if (kv.at(i) == 0.0) continue;
          for (int j = 0; j < d; ++j)
            gt.at2(i, j) -= c * (pv.at2(i, j) - tv.at2(i, j));
        }
      }
    };
  }
  return id;
}

void Tape::backward(int loss) {
  if (!recording_) throw std::logic_error("backward: tape was built with recording=false");
  if (back_done_) throw std::logic_error("backward: already ran on this tape");
  require(loss >= 0 && loss < size(), "backward: bad node id " + std::to_string(loss));
  Node& top = nodes_[loss];
  require(top.value.size() == 1,
          "backward: loss must be scalar, got shape " + top.value.shape_str());
  if (!top.needs_grad)
    throw std::logic_error("backward: loss does not depend on any differentiable input");
  top.grad = Tensor::full(top.value.shape(), 1.0);
  for (int id = loss; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.back || node.grad.empty()) continue;
    node.back(*this);
  }
  back_done_ = true;
}

}  // namespace offrl
