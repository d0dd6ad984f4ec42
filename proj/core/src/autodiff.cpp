// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/autodiff.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

#include "adacap/kernels.hpp"

namespace adacap::ad {

Var Tape::push(Matrix2D value, std::function<void()> back, Parameter* bound) {
  Entry e;
  e.value = std::move(value);
  if (grad_enabled_) {
    e.grad = Matrix2D(e.value.rows(), e.value.cols());
    e.back = std::move(back);
  }
  e.bound = bound;
  entries_.push_back(std::move(e));
  return Var{int(entries_.size()) - 1};
}

Var Tape::constant(Matrix2D value) { return push(std::move(value)); }

Var Tape::param(Parameter& p) { return push(p.value, nullptr, &p); }

double Tape::scalar(Var v) const {
  const Matrix2D& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw std::logic_error("scalar: not a 1x1 value");
  return m(0, 0);
}

Var Tape::matmul(Var a, Var b) {
  Matrix2D out = adacap::matmul(value(a), value(b));
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, b, v]() {
      const Matrix2D& g = entries_[v.id].grad;
      grad_mut(a.id).add_scaled(adacap::matmul_nt(g, value(b)), 1.0);
      grad_mut(b.id).add_scaled(adacap::matmul_tn(value(a), g), 1.0);
    };
  }
  return v;
}

Var Tape::matmul_nt(Var a, Var b) {
  Matrix2D out = adacap::matmul_nt(value(a), value(b));
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, b, v]() {
      const Matrix2D& g = entries_[v.id].grad;
      grad_mut(a.id).add_scaled(adacap::matmul(g, value(b)), 1.0);
      grad_mut(b.id).add_scaled(adacap::matmul_tn(g, value(a)), 1.0);
    };
  }
  return v;
}

Var Tape::add(Var a, Var b) {
  if (!value(a).same_shape(value(b))) throw std::invalid_argument("ad::add: shape mismatch");
  Matrix2D out = value(a);
  out.add_scaled(value(b), 1.0);
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, b, v]() {
      const Matrix2D& g = entries_[v.id].grad;
      grad_mut(a.id).add_scaled(g, 1.0);
      grad_mut(b.id).add_scaled(g, 1.0);
    };
  }
  return v;
}

Var Tape::add_row_vector(Var a, Var bias) {
  const Matrix2D& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != value(a).cols()) {
    throw std::invalid_argument("ad::add_row_vector: bias shape mismatch");
  }
  Matrix2D out = value(a);
  for (int r = 0; r < out.rows(); ++r) {
    auto row = out.row_span(r);
    for (int c = 0; c < out.cols(); ++c) row[c] += bv(0, c);
  }
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, bias, v]() {
      const Matrix2D& g = entries_[v.id].grad;
      grad_mut(a.id).add_scaled(g, 1.0);
      Matrix2D& gb = grad_mut(bias.id);
      for (int r = 0; r < g.rows(); ++r) {
        auto row = g.row_span(r);
        for (int c = 0; c < g.cols(); ++c) gb(0, c) += row[c];
      }
    };
  }
  return v;
}

Var Tape::scale(Var a, double s) {
  Matrix2D out = value(a);
  for (double& x : out.flat()) x *= s;
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, s, v]() {
      grad_mut(a.id).add_scaled(entries_[v.id].grad, s);
    };
  }
  return v;
}

Var Tape::gelu(Var a) {
  Matrix2D out = value(a);
  for (double& x : out.flat()) x = gelu_scalar(x);
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, v]() {
      const Matrix2D& g = entries_[v.id].grad;
      const Matrix2D& x = value(a);
      Matrix2D& ga = grad_mut(a.id);
      auto xf = x.flat();
      auto gf = g.flat();
      auto gaf = ga.flat();
      for (std::size_t i = 0; i < xf.size(); ++i) gaf[i] += gf[i] * gelu_grad_scalar(xf[i]);
    };
  }
  return v;
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix2D& xv = value(x);
  const Matrix2D& gv = value(gamma);
  const Matrix2D& bv = value(beta);
  if (gv.rows() != 1 || bv.rows() != 1 || gv.cols() != xv.cols() || bv.cols() != xv.cols()) {
    throw std::invalid_argument("ad::layer_norm: parameter shape mismatch");
  }
  int rows = xv.rows(), cols = xv.cols();
  // Cache the normalized activations and inverse stds for backward.
  auto xhat = std::make_shared<Matrix2D>(rows, cols);
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Matrix2D out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    auto row = xv.row_span(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= cols;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= cols;
    double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (int c = 0; c < cols; ++c) {
      double h = (row[c] - mean) * inv;
      (*xhat)(r, c) = h;
      out(r, c) = gv(0, c) * h + bv(0, c);
    }
  }
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, x, gamma, beta, v, xhat, inv_std]() {
      const Matrix2D& g = entries_[v.id].grad;
      const Matrix2D& gv2 = value(gamma);
      Matrix2D& gx = grad_mut(x.id);
      Matrix2D& gg = grad_mut(gamma.id);
      Matrix2D& gb = grad_mut(beta.id);
      int rows = g.rows(), cols = g.cols();
      for (int r = 0; r < rows; ++r) {
        double mean_dy = 0.0, mean_dy_xhat = 0.0;
        for (int c = 0; c < cols; ++c) {
          double dy = gv2(0, c) * g(r, c);
          mean_dy += dy;
          mean_dy_xhat += dy * (*xhat)(r, c);
          gg(0, c) += g(r, c) * (*xhat)(r, c);
          gb(0, c) += g(r, c);
        }
        mean_dy /= cols;
        mean_dy_xhat /= cols;
        double inv = (*inv_std)[r];
        for (int c = 0; c < cols; ++c) {
          double dy = gv2(0, c) * g(r, c);
          gx(r, c) += inv * (dy - mean_dy - (*xhat)(r, c) * mean_dy_xhat);
        }
      }
    };
  }
  return v;
}

Var Tape::masked_softmax(Var logits, const Matrix2D& mask) {
  Matrix2D out = adacap::masked_softmax(value(logits), mask);
  Var v = push(std::move(out));
  if (grad_enabled_) {
    // Backward needs only the output: masked entries are exactly 0 there.
    entries_[v.id].back = [this, logits, v]() {
      const Matrix2D& y = entries_[v.id].value;
      const Matrix2D& g = entries_[v.id].grad;
      Matrix2D& gx = grad_mut(logits.id);
      for (int r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (int c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
        for (int c = 0; c < y.cols(); ++c) gx(r, c) += y(r, c) * (g(r, c) - dot);
      }
    };
  }
  return v;
}

Var Tape::slice_rows(Var a, int r0, int r1) {
  const Matrix2D& av = value(a);
  if (r0 < 0 || r1 > av.rows() || r0 >= r1) throw std::out_of_range("ad::slice_rows: bad range");
  Matrix2D out(r1 - r0, av.cols());
  for (int r = r0; r < r1; ++r) {
    auto src = av.row_span(r);
    auto dst = out.row_span(r - r0);
    for (int c = 0; c < av.cols(); ++c) dst[c] = src[c];
  }
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, r0, v]() {
      const Matrix2D& g = entries_[v.id].grad;
      Matrix2D& ga = grad_mut(a.id);
      for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) ga(r0 + r, c) += g(r, c);
      }
    };
  }
  return v;
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  const Matrix2D& av = value(a);
  if (c0 < 0 || c1 > av.cols() || c0 >= c1) throw std::out_of_range("ad::slice_cols: bad range");
  Matrix2D out(av.rows(), c1 - c0);
  for (int r = 0; r < av.rows(); ++r) {
    for (int c = c0; c < c1; ++c) out(r, c - c0) = av(r, c);
  }
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, c0, v]() {
      const Matrix2D& g = entries_[v.id].grad;
      Matrix2D& ga = grad_mut(a.id);
      for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) ga(r, c0 + c) += g(r, c);
      }
    };
  }
  return v;
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ad::concat_rows: empty");
  int cols = value(parts[0]).cols();
  int rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw std::invalid_argument("ad::concat_rows: column mismatch");
    rows += value(p).rows();
  }
  Matrix2D out(rows, cols);
  int at = 0;
  for (Var p : parts) {
    const Matrix2D& pv = value(p);
    for (int r = 0; r < pv.rows(); ++r, ++at) {
      auto src = pv.row_span(r);
      auto dst = out.row_span(at);
      for (int c = 0; c < cols; ++c) dst[c] = src[c];
    }
  }
  std::vector<Var> own(parts.begin(), parts.end());
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, own, v]() {
      const Matrix2D& g = entries_[v.id].grad;
      int at = 0;
      for (Var p : own) {
        Matrix2D& gp = grad_mut(p.id);
        for (int r = 0; r < gp.rows(); ++r, ++at) {
          for (int c = 0; c < gp.cols(); ++c) gp(r, c) += g(at, c);
        }
      }
    };
  }
  return v;
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ad::concat_cols: empty");
  int rows = value(parts[0]).rows();
  int cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw std::invalid_argument("ad::concat_cols: row mismatch");
    cols += value(p).cols();
  }
  Matrix2D out(rows, cols);
  int at = 0;
  for (Var p : parts) {
    const Matrix2D& pv = value(p);
    for (int c = 0; c < pv.cols(); ++c, ++at) {
      for (int r = 0; r < rows; ++r) out(r, at) = pv(r, c);
    }
  }
  std::vector<Var> own(parts.begin(), parts.end());
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, own, v]() {
      const Matrix2D& g = entries_[v.id].grad;
      int at = 0;
      for (Var p : own) {
        Matrix2D& gp = grad_mut(p.id);
        for (int c = 0; c < gp.cols(); ++c, ++at) {
          for (int r = 0; r < gp.rows(); ++r) gp(r, c) += g(r, at);
        }
      }
    };
  }
  return v;
}

Var Tape::gather_rows(Var table, std::vector<int> ids) {
  const Matrix2D& tv = value(table);
  Matrix2D out(int(ids.size()), tv.cols());
  for (int r = 0; r < out.rows(); ++r) {
    if (ids[r] < 0 || ids[r] >= tv.rows()) throw std::out_of_range("ad::gather_rows: id out of range");
    auto src = tv.row_span(ids[r]);
    auto dst = out.row_span(r);
    for (int c = 0; c < tv.cols(); ++c) dst[c] = src[c];
  }
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, table, ids = std::move(ids), v]() {
      const Matrix2D& g = entries_[v.id].grad;
      Matrix2D& gt = grad_mut(table.id);
      for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) gt(ids[r], c) += g(r, c);
      }
    };
  }
  return v;
}

Var Tape::add_gathered_rows(Var a, Var table, std::vector<int> ids) {
  const Matrix2D& av = value(a);
  const Matrix2D& tv = value(table);
  if (int(ids.size()) != av.rows()) throw std::invalid_argument("ad::add_gathered_rows: id count mismatch");
  Matrix2D out = av;
  for (int r = 0; r < out.rows(); ++r) {
    if (ids[r] < 0 || ids[r] >= tv.rows()) throw std::out_of_range("ad::add_gathered_rows: id out of range");
    auto src = tv.row_span(ids[r]);
    auto dst = out.row_span(r);
    for (int c = 0; c < out.cols(); ++c) dst[c] += src[c];
  }
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, table, ids = std::move(ids), v]() {
      const Matrix2D& g = entries_[v.id].grad;
      grad_mut(a.id).add_scaled(g, 1.0);
      Matrix2D& gt = grad_mut(table.id);
      for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) gt(ids[r], c) += g(r, c);
      }
    };
  }
  return v;
}

Var Tape::add_block(Var a, Var block, int r0, int c0) {
  const Matrix2D& av = value(a);
  const Matrix2D& bv = value(block);
  if (r0 < 0 || c0 < 0 || r0 + bv.rows() > av.rows() || c0 + bv.cols() > av.cols()) {
    throw std::out_of_range("ad::add_block: block out of range");
  }
  Matrix2D out = av;
  for (int r = 0; r < bv.rows(); ++r) {
    for (int c = 0; c < bv.cols(); ++c) out(r0 + r, c0 + c) += bv(r, c);
  }
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, block, r0, c0, v]() {
      const Matrix2D& g = entries_[v.id].grad;
      grad_mut(a.id).add_scaled(g, 1.0);
      Matrix2D& gb = grad_mut(block.id);
      for (int r = 0; r < gb.rows(); ++r) {
        for (int c = 0; c < gb.cols(); ++c) gb(r, c) += g(r0 + r, c0 + c);
      }
    };
  }
  return v;
}

Var Tape::gather_submatrix(Var a, std::vector<int> rows, std::vector<int> cols) {
  const Matrix2D& av = value(a);
  Matrix2D out(int(rows.size()), int(cols.size()));
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      if (rows[r] < 0 || rows[r] >= av.rows() || cols[c] < 0 || cols[c] >= av.cols()) {
        throw std::out_of_range("ad::gather_submatrix: index out of range");
      }
      out(r, c) = av(rows[r], cols[c]);
    }
  }
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, rows = std::move(rows), cols = std::move(cols), v]() {
      const Matrix2D& g = entries_[v.id].grad;
      Matrix2D& ga = grad_mut(a.id);
      for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) ga(rows[r], cols[c]) += g(r, c);
      }
    };
  }
  return v;
}

Var Tape::log_sigmoid_eps(Var a, double eps) {
  const Matrix2D& av = value(a);
  Matrix2D out(av.rows(), av.cols());
  for (int r = 0; r < av.rows(); ++r) {
    for (int c = 0; c < av.cols(); ++c) {
      double s = 1.0 / (1.0 + std::exp(-av(r, c)));
      out(r, c) = std::log(s + eps);
    }
  }
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, a, eps, v]() {
      const Matrix2D& g = entries_[v.id].grad;
      const Matrix2D& x = value(a);
      Matrix2D& ga = grad_mut(a.id);
      for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) {
          double s = 1.0 / (1.0 + std::exp(-x(r, c)));
          ga(r, c) += g(r, c) * s * (1.0 - s) / (s + eps);
        }
      }
    };
  }
  return v;
}

Var Tape::cross_entropy(Var logits, std::vector<int> targets, std::vector<double> weights) {
  const Matrix2D& lv = value(logits);
  if (int(targets.size()) != lv.rows() || int(weights.size()) != lv.rows()) {
    throw std::invalid_argument("ad::cross_entropy: target length mismatch");
  }
  // Keep the softmax for backward.
  auto probs = std::make_shared<Matrix2D>(softmax_rows(lv));
  double total_weight = 0.0;
  double loss = 0.0;
  for (int r = 0; r < lv.rows(); ++r) {
    if (weights[r] == 0.0) continue;
    int y = targets[r];
    if (y < 0 || y >= lv.cols()) throw std::out_of_range("ad::cross_entropy: target out of range");
    auto row = lv.row_span(r);
    double maxv = row[0];
    for (double x : row) maxv = std::max(maxv, x);
    double sum = 0.0;
    for (double x : row) sum += std::exp(x - maxv);
    loss += weights[r] * (std::log(sum) + maxv - row[y]);
    total_weight += weights[r];
  }
  if (total_weight == 0.0) throw std::invalid_argument("ad::cross_entropy: all weights zero");
  Matrix2D out(1, 1);
  out(0, 0) = loss / total_weight;
  Var v = push(std::move(out));
  if (grad_enabled_) {
    entries_[v.id].back = [this, logits, targets = std::move(targets), weights = std::move(weights),
                           probs, total_weight, v]() {
      double go = entries_[v.id].grad(0, 0);
      Matrix2D& gl = grad_mut(logits.id);
      for (int r = 0; r < gl.rows(); ++r) {
        if (weights[r] == 0.0) continue;
        double scale = go * weights[r] / total_weight;
        for (int c = 0; c < gl.cols(); ++c) {
          double indicator = (c == targets[r]) ? 1.0 : 0.0;
          gl(r, c) += scale * ((*probs)(r, c) - indicator);
        }
      }
    };
  }
  return v;
}

void Tape::backward(Var loss) {
  if (!grad_enabled_) throw std::logic_error("backward on a grad-disabled tape");
  const Matrix2D& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw std::logic_error("backward: loss must be 1x1");
  entries_[loss.id].grad(0, 0) = 1.0;
  for (int i = int(entries_.size()) - 1; i >= 0; --i) {
    if (entries_[i].back) entries_[i].back();
    if (entries_[i].bound != nullptr) {
      entries_[i].bound->grad.add_scaled(entries_[i].grad, 1.0);
    }
  }
}

}  // namespace adacap::ad
