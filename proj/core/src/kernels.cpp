// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/kernels.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace adacap {

namespace {

using EigenMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using EigenMapMut = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

EigenMap map(const Matrix2D& m) { return EigenMap(m.data(), m.rows(), m.cols()); }
EigenMapMut map(Matrix2D& m) { return EigenMapMut(m.data(), m.rows(), m.cols()); }

}  // namespace

Matrix2D matmul(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Matrix2D out(a.rows(), b.cols());
  map(out).noalias() = map(a) * map(b);
  return out;
}

Matrix2D matmul_nt(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimensions differ");
  Matrix2D out(a.rows(), b.rows());
  map(out).noalias() = map(a) * map(b).transpose();
  return out;
}

Matrix2D matmul_tn(const Matrix2D& a, const Matrix2D& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: inner dimensions differ");
  Matrix2D out(a.cols(), b.cols());
  map(out).noalias() = map(a).transpose() * map(b);
  return out;
}

Matrix2D transpose(const Matrix2D& a) {
  Matrix2D out(a.cols(), a.rows());
  map(out).noalias() = map(a).transpose();
  return out;
}

Matrix2D masked_softmax(const Matrix2D& logits, const Matrix2D& mask) {
  if (!logits.same_shape(mask)) throw std::invalid_argument("masked_softmax: shape mismatch");
  Matrix2D out(logits.rows(), logits.cols());
  for (int r = 0; r < logits.rows(); ++r) {
    auto lrow = logits.row_span(r);
    auto mrow = mask.row_span(r);
    double maxv = kMaskedLogit;
    bool any = false;
    for (int c = 0; c < logits.cols(); ++c) {
      if (mrow[c] != 0.0) {
        any = true;
        if (lrow[c] > maxv) maxv = lrow[c];
      }
    }
    if (!any) throw std::invalid_argument("degenerate mask row");
    double sum = 0.0;
    auto orow = out.row_span(r);
    for (int c = 0; c < logits.cols(); ++c) {
      double shifted = (mrow[c] != 0.0 ? lrow[c] : kMaskedLogit) - maxv;
      double e = std::exp(shifted);
      orow[c] = e;
      sum += e;
    }
    for (int c = 0; c < logits.cols(); ++c) {
      orow[c] = mrow[c] != 0.0 ? orow[c] / sum : 0.0;
    }
  }
  return out;
}

Matrix2D softmax_rows(const Matrix2D& logits) {
  Matrix2D ones(logits.rows(), logits.cols(), 1.0);
  return masked_softmax(logits, ones);
}

Matrix2D layer_norm(const Matrix2D& x, std::span<const double> gamma,
                    std::span<const double> beta, double eps) {
  if (int(gamma.size()) != x.cols() || int(beta.size()) != x.cols()) {
    throw std::invalid_argument("layer_norm: parameter length mismatch");
  }
  Matrix2D out(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    auto xrow = x.row_span(r);
    double mean = 0.0;
    for (double v : xrow) mean += v;
    mean /= x.cols();
    double var = 0.0;
    for (double v : xrow) var += (v - mean) * (v - mean);
    var /= x.cols();
    double inv = 1.0 / std::sqrt(var + eps);
    auto orow = out.row_span(r);
    for (int c = 0; c < x.cols(); ++c) {
      orow[c] = gamma[c] * (xrow[c] - mean) * inv + beta[c];
    }
  }
  return out;
}

Matrix2D embedding_lookup(const Matrix2D& table, std::span<const int> ids) {
  Matrix2D out(int(ids.size()), table.cols());
  for (int r = 0; r < out.rows(); ++r) {
    int id = ids[r];
    if (id < 0 || id >= table.rows()) throw std::out_of_range("embedding_lookup: id out of range");
    auto src = table.row_span(id);
    auto dst = out.row_span(r);
    for (int c = 0; c < out.cols(); ++c) dst[c] = src[c];
  }
  return out;
}

double cross_entropy(const Matrix2D& logits, std::span<const int> targets,
                     std::span<const double> weights) {
  if (int(targets.size()) != logits.rows() || int(weights.size()) != logits.rows()) {
    throw std::invalid_argument("cross_entropy: target length mismatch");
  }
  double total_weight = 0.0;
  double loss = 0.0;
  for (int r = 0; r < logits.rows(); ++r) {
    double w = weights[r];
    if (w == 0.0) continue;
    int y = targets[r];
    if (y < 0 || y >= logits.cols()) throw std::out_of_range("cross_entropy: target id out of range");
    auto row = logits.row_span(r);
    double maxv = row[0];
    for (double v : row) maxv = std::max(maxv, v);
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - maxv);
    loss += w * (std::log(sum) + maxv - row[y]);
    total_weight += w;
  }
  if (total_weight == 0.0) throw std::invalid_argument("cross_entropy: all weights zero");
  return loss / total_weight;
}

double gelu_scalar(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

double gelu_grad_scalar(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

}  // namespace adacap
