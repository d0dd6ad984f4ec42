// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "adacap/autodiff.hpp"
#include "adacap/grad_check.hpp"
#include "adacap/kernels.hpp"
#include "adacap/rng.hpp"

using namespace adacap;

namespace {

// Reduces a matrix Var to a scalar through fixed random projections so every
// entry carries a distinct weight in the loss. Takes the rng by value: each
// call replays the same stream, so repeated graph builds project identically.
ad::Var project_to_scalar(ad::Tape& tape, ad::Var m, RngState rng) {
  const Matrix2D& v = tape.value(m);
  Matrix2D left(1, v.rows()), right(v.cols(), 1);
  for (double& x : left.flat()) x = rng.uniform_open01() + 0.25;
  for (double& x : right.flat()) x = rng.uniform_open01() + 0.25;
  return tape.matmul(tape.matmul(tape.constant(left), m), tape.constant(right));
}

// Checks d(scalar graph)/d(param) against central differences for a graph
// builder that consumes one parameter matrix.
double check_param_gradient(Parameter& p,
                            const std::function<ad::Var(ad::Tape&, ad::Var)>& graph) {
  std::vector<double> x(p.value.flat().begin(), p.value.flat().end());

  auto eval = [&](std::span<const double> probe) {
    Parameter local = p;
    std::copy(probe.begin(), probe.end(), local.value.flat().begin());
    ad::Tape tape;
    ad::Var out = graph(tape, tape.param(local));
    return tape.scalar(out);
  };

  Parameter work = p;
  ad::Tape tape;
  ad::Var out = graph(tape, tape.param(work));
  work.zero_grad();
  tape.backward(out);
  std::vector<double> analytic(work.grad.flat().begin(), work.grad.flat().end());
  return grad_check(eval, analytic, x, 1e-5);
}

Parameter random_param(const char* name, int rows, int cols, RngState& rng, double scale = 1.0) {
  Matrix2D v(rows, cols);
  for (double& x : v.flat()) x = scale * (rng.uniform_open01() - 0.5);
  return Parameter(name, std::move(v));
}

}  // namespace

TEST_CASE("autodiff op gradients match central differences") {
  RngState rng(21);

  SUBCASE("matmul left and right") {
    Parameter a = random_param("a", 3, 4, rng);
    Matrix2D b(4, 2);
    for (double& x : b.flat()) x = rng.uniform_open01();
    RngState proj(1);
    double err = check_param_gradient(a, [&](ad::Tape& t, ad::Var v) {
      return project_to_scalar(t, t.matmul(v, t.constant(b)), proj);
    });
    CHECK(err < 1e-6);

    Parameter c = random_param("c", 4, 2, rng);
    Matrix2D a2(3, 4);
    for (double& x : a2.flat()) x = rng.uniform_open01();
    RngState proj2(2);
    err = check_param_gradient(c, [&](ad::Tape& t, ad::Var v) {
      return project_to_scalar(t, t.matmul(t.constant(a2), v), proj2);
    });
    CHECK(err < 1e-6);
  }

  SUBCASE("matmul_nt") {
    Parameter a = random_param("a", 3, 5, rng);
    Matrix2D b(4, 5);
    for (double& x : b.flat()) x = rng.uniform_open01();
    RngState proj(3);
    double err = check_param_gradient(a, [&](ad::Tape& t, ad::Var v) {
      return project_to_scalar(t, t.matmul_nt(v, t.constant(b)), proj);
    });
    CHECK(err < 1e-6);
  }

  SUBCASE("add_row_vector bias") {
    Parameter bias = random_param("b", 1, 4, rng);
    Matrix2D x(3, 4);
    for (double& v : x.flat()) v = rng.uniform_open01();
    RngState proj(4);
    double err = check_param_gradient(bias, [&](ad::Tape& t, ad::Var v) {
      return project_to_scalar(t, t.add_row_vector(t.constant(x), v), proj);
    });
    CHECK(err < 1e-6);
  }

  SUBCASE("gelu") {
    Parameter a = random_param("a", 2, 5, rng, 2.0);
    RngState proj(5);
    double err = check_param_gradient(
        a, [&](ad::Tape& t, ad::Var v) { return project_to_scalar(t, t.gelu(v), proj); });
    CHECK(err < 1e-6);
  }

  SUBCASE("layer_norm input gamma and beta") {
    Parameter x = random_param("x", 3, 6, rng, 2.0);
    Parameter gamma = random_param("g", 1, 6, rng);
    Parameter beta = random_param("bt", 1, 6, rng);
    RngState proj(6);
    double err = check_param_gradient(x, [&](ad::Tape& t, ad::Var v) {
      return project_to_scalar(
          t, t.layer_norm(v, t.param(gamma), t.param(beta), 1e-5), proj);
    });
    CHECK(err < 1e-6);
    RngState proj2(7);
    err = check_param_gradient(gamma, [&](ad::Tape& t, ad::Var v) {
      return project_to_scalar(t, t.layer_norm(t.param(x), v, t.param(beta), 1e-5), proj2);
    });
    CHECK(err < 1e-6);
    RngState proj3(8);
    err = check_param_gradient(beta, [&](ad::Tape& t, ad::Var v) {
      return project_to_scalar(t, t.layer_norm(t.param(x), t.param(gamma), v, 1e-5), proj3);
    });
    CHECK(err < 1e-6);
  }

  SUBCASE("masked softmax") {
    Parameter a = random_param("a", 3, 4, rng, 3.0);
    Matrix2D mask = Matrix2D::from_rows(
        {{1.0, 1.0, 0.0, 1.0}, {1.0, 1.0, 1.0, 1.0}, {0.0, 1.0, 1.0, 0.0}});
    RngState proj(9);
    double err = check_param_gradient(a, [&](ad::Tape& t, ad::Var v) {
      return project_to_scalar(t, t.masked_softmax(v, mask), proj);
    });
    CHECK(err < 1e-6);
  }

  SUBCASE("slices and concats") {
    Parameter a = random_param("a", 4, 6, rng);
    RngState proj(10);
    double err = check_param_gradient(a, [&](ad::Tape& t, ad::Var v) {
      ad::Var s1 = t.slice_rows(v, 0, 2);
      ad::Var s2 = t.slice_rows(v, 2, 4);
      std::vector<ad::Var> rows{s2, s1};
      ad::Var rejoined = t.concat_rows(rows);
      ad::Var c1 = t.slice_cols(rejoined, 0, 3);
      ad::Var c2 = t.slice_cols(rejoined, 3, 6);
      std::vector<ad::Var> cols{c2, c1};
      return project_to_scalar(t, t.concat_cols(cols), proj);
    });
    CHECK(err < 1e-6);
  }

  SUBCASE("gather and scatter ops") {
    Parameter table = random_param("tbl", 5, 3, rng);
    RngState proj(11);
    double err = check_param_gradient(table, [&](ad::Tape& t, ad::Var v) {
      return project_to_scalar(t, t.gather_rows(v, {4, 0, 0, 2}), proj);
    });
    CHECK(err < 1e-6);

    Parameter table2 = random_param("tbl2", 4, 3, rng);
    Matrix2D base(3, 3);
    for (double& x : base.flat()) x = rng.uniform_open01();
    RngState proj2(12);
    err = check_param_gradient(table2, [&](ad::Tape& t, ad::Var v) {
      return project_to_scalar(t, t.add_gathered_rows(t.constant(base), v, {1, 1, 3}), proj2);
    });
    CHECK(err < 1e-6);

    Parameter sub = random_param("sub", 5, 5, rng);
    RngState proj3(13);
    err = check_param_gradient(sub, [&](ad::Tape& t, ad::Var v) {
      return project_to_scalar(t, t.gather_submatrix(v, {0, 2, 2}, {1, 4}), proj3);
    });
    CHECK(err < 1e-6);
  }

  SUBCASE("add_block and log_sigmoid_eps") {
    Parameter blk = random_param("blk", 2, 2, rng);
    Matrix2D base(4, 4);
    for (double& x : base.flat()) x = rng.uniform_open01();
    RngState proj(14);
    double err = check_param_gradient(blk, [&](ad::Tape& t, ad::Var v) {
      ad::Var biased = t.add_block(t.constant(base), t.log_sigmoid_eps(v, 1e-6), 1, 2);
      return project_to_scalar(t, biased, proj);
    });
    CHECK(err < 1e-6);
  }

  SUBCASE("cross entropy") {
    Parameter logits = random_param("lg", 4, 6, rng, 2.0);
    double err = check_param_gradient(logits, [&](ad::Tape& t, ad::Var v) {
      return t.cross_entropy(v, {1, 3, 0, 5}, {1.0, 1.0, 0.0, 1.0});
    });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("toy attention layer gradient vs central differences") {
  // A miniature q/k/v attention with masked softmax; all three projection
  // matrices are checked at eps = 1e-5.
  RngState rng(77);
  const int s = 5, d = 4;
  Matrix2D x(s, d);
  for (double& v : x.flat()) v = rng.uniform_open01() - 0.5;
  Matrix2D mask(s, s, 1.0);
  mask(0, 3) = 0.0;
  mask(2, 1) = 0.0;

  for (const char* which : {"wq", "wk", "wv"}) {
    Parameter wq = random_param("wq", d, d, rng);
    Parameter wk = random_param("wk", d, d, rng);
    Parameter wv = random_param("wv", d, d, rng);
    Parameter& target = *(std::string(which) == "wq" ? &wq
                          : std::string(which) == "wk" ? &wk
                                                       : &wv);
    RngState proj(99);
    double err = check_param_gradient(target, [&](ad::Tape& t, ad::Var v) {
      ad::Var xin = t.constant(x);
      ad::Var q = t.matmul(xin, std::string(which) == "wq" ? v : t.param(wq));
      ad::Var k = t.matmul(xin, std::string(which) == "wk" ? v : t.param(wk));
      ad::Var vv = t.matmul(xin, std::string(which) == "wv" ? v : t.param(wv));
      ad::Var attn = t.masked_softmax(t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(double(d))), mask);
      return project_to_scalar(t, t.matmul(attn, vv), proj);
    });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("backward accumulates into bound parameters") {
  RngState rng(31);
  Parameter p = random_param("p", 2, 2, rng);
  p.zero_grad();
  ad::Tape tape;
  ad::Var v = tape.param(p);
  std::vector<ad::Var> both{v, v};
  ad::Var doubled = tape.add(v, v);
  RngState proj(15);
  ad::Var out = project_to_scalar(tape, doubled, proj);
  tape.backward(out);
  // Same parameter bound once; gradient of v + v flows twice into it.
  CHECK(p.grad.all_finite());
  CHECK(p.grad(0, 0) != 0.0);
}

TEST_CASE("grad-disabled tape rejects backward") {
  ad::Tape tape(false);
  ad::Var c = tape.constant(Matrix2D(1, 1, 2.0));
  CHECK_THROWS(tape.backward(c));
}
