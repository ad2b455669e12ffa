#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support/gradcheck.hpp"
#include "vc/nn/gru.hpp"
#include "vc/nn/random.hpp"
#include "vc/nn/store.hpp"
#include "vc/nn/tape.hpp"

using namespace vc::nn;
using vc::testsupport::gradcheck;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (2.0 * rng.uniform01() - 1.0) * scale;
  return t;
}

double laplace_cdf(double x) {
  return x < 0.0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x);
}

}  // namespace

TEST_CASE("rng is deterministic and serializable") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  auto s = a.state();
  double x1 = a.normal();
  Rng c(0);
  c.set_state(s);
  CHECK(c.normal() == x1);
}

TEST_CASE("gaussian sampler moments and shape") {
  Rng rng(7);
  Tensor t = sample_gaussian({100000}, rng);
  double mean = std::accumulate(t.values().begin(), t.values().end(), 0.0) / t.size();
  double var = 0.0;
  for (double v : t.values()) var += (v - mean) * (v - mean);
  var /= t.size();
  CHECK(std::fabs(mean) < 0.02);
  CHECK(var > 0.97);
  CHECK(var < 1.03);

  Tensor small = sample_gaussian({2, 3}, rng);
  CHECK(small.size() == 6);
  CHECK(small.shape() == std::vector<std::size_t>{2, 3});

  Rng r1(42), r2(42);
  Tensor a = sample_gaussian({16}, r1), b = sample_gaussian({16}, r2);
  for (std::size_t i = 0; i < 16; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("laplace transform pointwise") {
  CHECK(laplace_from_uniform(0.0) == 0.0);
  CHECK(laplace_from_uniform(0.25) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(laplace_from_uniform(-0.25) == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
  // tail clamp keeps the draw finite
  CHECK(std::isfinite(laplace_from_uniform(0.5)));
}

TEST_CASE("laplace sampler moments") {
  Rng rng(11);
  Tensor t = sample_laplace({100000}, rng);
  double mean = std::accumulate(t.values().begin(), t.values().end(), 0.0) / t.size();
  double var = 0.0;
  for (double v : t.values()) var += (v - mean) * (v - mean);
  var /= t.size();
  CHECK(std::fabs(mean) < 0.02);
  CHECK(var > 1.9);
  CHECK(var < 2.1);
}

TEST_CASE("laplace sampler passes KS test at alpha 0.01") {
  Rng rng(5);
  const std::size_t n = 10000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = rng.laplace();
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double f = laplace_cdf(xs[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
  }
  double critical = 1.62762 / std::sqrt(static_cast<double>(n));  // alpha = 0.01
  CHECK(d < critical);
}

TEST_CASE("backward on simple sums") {
  ParameterStore ps;
  ps.create("p", Tensor({2}, {1.0, 2.0}));

  Tape tp;
  Var p = tp.param(ps, "p");
  tp.backward(tp.sum(p));
  CHECK(ps.entry("p").grad[0] == 1.0);
  CHECK(ps.entry("p").grad[1] == 1.0);

  ps.zero_grads();
  Tape tp2;
  Var q = tp2.param(ps, "p");
  tp2.backward(tp2.sum(tp2.square(q)));
  CHECK(ps.entry("p").grad[0] == doctest::Approx(2.0));
  CHECK(ps.entry("p").grad[1] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar loss") {
  ParameterStore ps;
  ps.create("p", Tensor({3}, {1.0, 2.0, 3.0}));
  Tape tp;
  Var p = tp.param(ps, "p");
  CHECK_THROWS(tp.backward(p));
}

TEST_CASE("unreachable parameters keep zero gradient") {
  ParameterStore ps;
  ps.create("used", Tensor({2}, {1.0, 2.0}));
  ps.create("unused", Tensor({2}, {3.0, 4.0}));
  Tape tp;
  Var p = tp.param(ps, "used");
  tp.backward(tp.sum(p));
  CHECK(ps.entry("unused").grad[0] == 0.0);
  CHECK(ps.entry("unused").grad[1] == 0.0);
}

TEST_CASE("elementwise chain matches finite differences") {
  Rng rng(3);
  ParameterStore ps;
  ps.create("a", random_tensor({4, 3}, rng, 0.8));
  ps.create("b", random_tensor({4, 3}, rng, 0.5));

  auto loss = [&](bool acc) {
    Tape tp;
    Var a = tp.param(ps, "a");
    Var b = tp.param(ps, "b");
    Var s = tp.exp(tp.mul_scalar(b, 0.5));
    Var t = tp.div(tp.abs(a), s);
    Var u = tp.mul(s, tp.exp(tp.neg(t)));
    Var v = tp.add(tp.abs(a), u);
    Var w = tp.sub(v, tp.mul_scalar(b, 0.5));
    Var l = tp.mean(tp.add_scalar(tp.sqrt(tp.add_scalar(tp.square(w), 1e-8)), -1.0));
    if (acc) tp.backward(l);
    return tp.val(l)[0];
  };
  auto res = gradcheck(ps, loss);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("conv1d identity and constant kernels") {
  Rng rng(9);
  Tape tp;
  Tensor x = random_tensor({5, 3}, rng);
  Var xv = tp.constant(x);

  Tensor ident({1, 3, 3});
  for (int i = 0; i < 3; ++i) ident[i * 3 + i] = 1.0;
  Var w = tp.constant(ident);
  Var b = tp.constant(Tensor::zeros({3}));
  Var y = tp.conv1d(xv, w, b, 1, false);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(tp.val(y)[i] == doctest::Approx(x[i]));

  Var wz = tp.constant(Tensor::zeros({3, 2, 3}));
  Var bz = tp.constant(Tensor({2}, {0.7, -0.3}));
  Var yz = tp.conv1d(xv, wz, bz, 1, false);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(tp.val(yz).at(r, 0) == doctest::Approx(0.7));
    CHECK(tp.val(yz).at(r, 1) == doctest::Approx(-0.3));
  }
}

TEST_CASE("conv1d width-3 kernel matches hand-unrolled oracle") {
  // single channel ramp, symmetric padding
  Tape tp;
  Tensor x({5, 1}, {1, 2, 3, 4, 5});
  Tensor w({3, 1, 1}, {0.5, -1.0, 2.0});
  Tensor b({1}, {0.25});
  Var y = tp.conv1d(tp.constant(x), tp.constant(w), tp.constant(b), 1, false);
  // y[t] = 0.5*x[t-1] - 1.0*x[t] + 2.0*x[t+1] + 0.25, zeros outside
  std::vector<double> expect = {
      0.25 + 0.5 * 0 - 1.0 * 1 + 2.0 * 2,  // 3.25
      0.25 + 0.5 * 1 - 1.0 * 2 + 2.0 * 3,
      0.25 + 0.5 * 2 - 1.0 * 3 + 2.0 * 4,
      0.25 + 0.5 * 3 - 1.0 * 4 + 2.0 * 5,
      0.25 + 0.5 * 4 - 1.0 * 5 + 2.0 * 0,
  };
  for (std::size_t t = 0; t < 5; ++t) CHECK(tp.val(y)[t] == doctest::Approx(expect[t]));

  // causal variant only looks backwards
  Tape tp2;
  Var yc = tp2.conv1d(tp2.constant(x), tp2.constant(w), tp2.constant(b), 1, true);
  CHECK(tp2.val(yc)[0] == doctest::Approx(0.25 + 2.0 * 1));
  CHECK(tp2.val(yc)[2] == doctest::Approx(0.25 + 0.5 * 1 - 1.0 * 2 + 2.0 * 3));
}

TEST_CASE("conv1d rejects channel mismatch") {
  Tape tp;
  Var x = tp.constant(Tensor::zeros({4, 3}));
  Var w = tp.constant(Tensor::zeros({3, 2, 5}));
  Var b = tp.constant(Tensor::zeros({2}));
  CHECK_THROWS(tp.conv1d(x, w, b, 1, false));
}

TEST_CASE("conv1d gradients match finite differences") {
  Rng rng(21);
  for (bool causal : {false, true}) {
    for (std::size_t dil : {1u, 2u}) {
      ParameterStore ps;
      ps.create("x", random_tensor({6, 2}, rng));
      ps.create("w", random_tensor({3, 4, 2}, rng, 0.7));
      ps.create("b", random_tensor({4}, rng, 0.2));
      auto loss = [&](bool acc) {
        Tape tp;
        Var y = tp.conv1d(tp.param(ps, "x"), tp.param(ps, "w"), tp.param(ps, "b"), dil, causal);
        Var l = tp.mean(tp.square(y));
        if (acc) tp.backward(l);
        return tp.val(l)[0];
      };
      auto res = gradcheck(ps, loss);
      INFO("causal=" << causal << " dil=" << dil << " worst=" << res.worst);
      CHECK(res.max_rel_err < 1e-4);
    }
  }
}

TEST_CASE("linear gradients match finite differences") {
  Rng rng(33);
  ParameterStore ps;
  ps.create("x", random_tensor({5, 3}, rng));
  ps.create("w", random_tensor({4, 3}, rng, 0.6));
  ps.create("b", random_tensor({4}, rng, 0.3));
  auto loss = [&](bool acc) {
    Tape tp;
    Var y = tp.linear(tp.param(ps, "x"), tp.param(ps, "w"), tp.param(ps, "b"));
    Var l = tp.mean(tp.square(tp.tanh(y)));
    if (acc) tp.backward(l);
    return tp.val(l)[0];
  };
  auto res = gradcheck(ps, loss);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("gru_step analytic zero-parameter behaviour") {
  std::size_t h = 4, din = 3;
  Tensor w_ih = Tensor::zeros({3 * h, din});
  Tensor w_hh = Tensor::zeros({3 * h, h});
  Tensor b_ih = Tensor::zeros({3 * h});
  Tensor b_hh = Tensor::zeros({3 * h});
  GruWeights w{&w_ih, &w_hh, &b_ih, &b_hh};

  Tensor x({din}, {0.3, -0.2, 0.9});
  Tensor hp({h}, {1.0, -2.0, 0.5, 4.0});
  Tensor out = gru_step(x, hp, w);
  // all gates sit at sigmoid(0)=0.5 and the candidate at tanh(0)=0
  for (std::size_t i = 0; i < h; ++i) CHECK(out[i] == doctest::Approx(0.5 * hp[i]));

  Tensor hz = Tensor::zeros({h});
  Tensor out2 = gru_step(x, hz, w);
  for (std::size_t i = 0; i < h; ++i) CHECK(out2[i] == 0.0);

  Tensor bad({din + 1});
  CHECK_THROWS(gru_step(bad, hp, w));
}

TEST_CASE("gru_step matches scalar reference implementation") {
  Rng rng(17);
  std::size_t h = 3, din = 2;
  Tensor w_ih = random_tensor({3 * h, din}, rng, 0.8);
  Tensor w_hh = random_tensor({3 * h, h}, rng, 0.8);
  Tensor b_ih = random_tensor({3 * h}, rng, 0.3);
  Tensor b_hh = random_tensor({3 * h}, rng, 0.3);
  GruWeights w{&w_ih, &w_hh, &b_ih, &b_hh};
  Tensor x = random_tensor({din}, rng);
  Tensor hp = random_tensor({h}, rng);

  Tensor got = gru_step(x, hp, w);

  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t i = 0; i < h; ++i) {
    double ar = b_ih[i] + b_hh[i];
    double az = b_ih[h + i] + b_hh[h + i];
    double an = b_ih[2 * h + i];
    double m = b_hh[2 * h + i];
    for (std::size_t c = 0; c < din; ++c) {
      ar += w_ih.at(i, c) * x[c];
      az += w_ih.at(h + i, c) * x[c];
      an += w_ih.at(2 * h + i, c) * x[c];
    }
    for (std::size_t c = 0; c < h; ++c) {
      ar += w_hh.at(i, c) * hp[c];
      az += w_hh.at(h + i, c) * hp[c];
      m += w_hh.at(2 * h + i, c) * hp[c];
    }
    double r = sig(ar), z = sig(az);
    double n = std::tanh(an + r * m);
    double expect = (1.0 - z) * n + z * hp[i];
    CHECK(got[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

namespace {

// Builds a small recurrent stack over the store and returns the loss.
double recurrent_loss(ParameterStore& ps, const Tensor& x, bool feedback, bool acc) {
  Tape tp;
  Var xv = tp.constant(x);
  Recurrence rec = tp.recurrent(xv, tp.param(ps, "w_ih"), tp.param(ps, "w_hh"),
                                tp.param(ps, "b_ih"), tp.param(ps, "b_hh"),
                                tp.param(ps, "w_out"), tp.param(ps, "b_out"), feedback);
  Var l = tp.mean(tp.square(rec.out));
  if (acc) tp.backward(l);
  return tp.val(l)[0];
}

}  // namespace

TEST_CASE("recurrent driver gradients match finite differences") {
  for (bool feedback : {false, true}) {
    Rng rng(55);
    std::size_t h = 3, din = 2, dout = 2, t = 5;
    std::size_t du = din + (feedback ? dout : 0);
    ParameterStore ps;
    ps.create("w_ih", random_tensor({3 * h, du}, rng, 0.7));
    ps.create("w_hh", random_tensor({3 * h, h}, rng, 0.7));
    ps.create("b_ih", random_tensor({3 * h}, rng, 0.2));
    ps.create("b_hh", random_tensor({3 * h}, rng, 0.2));
    ps.create("w_out", random_tensor({dout, h}, rng, 0.7));
    ps.create("b_out", random_tensor({dout}, rng, 0.2));
    Tensor x = random_tensor({t, din}, rng);
    auto loss = [&](bool acc) { return recurrent_loss(ps, x, feedback, acc); };
    auto res = gradcheck(ps, loss);
    INFO("feedback=" << feedback << " worst=" << res.worst);
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("recurrent driver agrees with per-step composition") {
  Rng rng(66);
  std::size_t h = 4, din = 3, dout = 2, t = 6;
  bool feedback = true;
  std::size_t du = din + dout;
  Tensor w_ih = random_tensor({3 * h, du}, rng, 0.6);
  Tensor w_hh = random_tensor({3 * h, h}, rng, 0.6);
  Tensor b_ih = random_tensor({3 * h}, rng, 0.2);
  Tensor b_hh = random_tensor({3 * h}, rng, 0.2);
  Tensor w_out = random_tensor({dout, h}, rng, 0.6);
  Tensor b_out = random_tensor({dout}, rng, 0.2);
  Tensor x = random_tensor({t, din}, rng);

  ParameterStore ps;
  ps.create("w_ih", w_ih);
  ps.create("w_hh", w_hh);
  ps.create("b_ih", b_ih);
  ps.create("b_hh", b_hh);
  ps.create("w_out", w_out);
  ps.create("b_out", b_out);
  Tape tp;
  Recurrence rec =
      tp.recurrent(tp.constant(x), tp.param(ps, "w_ih"), tp.param(ps, "w_hh"),
                   tp.param(ps, "b_ih"), tp.param(ps, "b_hh"), tp.param(ps, "w_out"),
                   tp.param(ps, "b_out"), feedback);

  GruWeights w{&w_ih, &w_hh, &b_ih, &b_hh};
  Tensor hprev = Tensor::zeros({h});
  Tensor oprev = Tensor::zeros({dout});
  for (std::size_t r = 0; r < t; ++r) {
    Tensor u({du});
    for (std::size_t c = 0; c < din; ++c) u[c] = x.at(r, c);
    for (std::size_t c = 0; c < dout; ++c) u[din + c] = oprev[c];
    hprev = gru_step(u, hprev, w);
    for (std::size_t o = 0; o < dout; ++o) {
      double acc = b_out[o];
      for (std::size_t c = 0; c < h; ++c) acc += w_out.at(o, c) * hprev[c];
      oprev[o] = acc;
      CHECK(tp.val(rec.out).at(r, o) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
  for (std::size_t c = 0; c < h; ++c)
    CHECK(rec.h_last[c] == doctest::Approx(hprev[c]).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy gradients and values") {
  Rng rng(77);
  ParameterStore ps;
  ps.create("l", random_tensor({4, 3}, rng));
  auto loss = [&](bool acc) {
    Tape tp;
    Var l = tp.softmax_cross_entropy(tp.param(ps, "l"), 1);
    if (acc) tp.backward(l);
    return tp.val(l)[0];
  };
  auto res = gradcheck(ps, loss);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-4);

  // uniform logits: loss = log(S)
  Tape tp;
  Var l = tp.softmax_cross_entropy(tp.constant(Tensor::zeros({2, 5})), 3);
  CHECK(tp.val(l)[0] == doctest::Approx(std::log(5.0)));
}

TEST_CASE("adam zero gradient is identity from fresh state") {
  ParameterStore ps;
  ps.create("p", Tensor({3}, {1.0, -2.0, 0.5}));
  std::uint64_t step = 0;
  AdamConfig cfg;
  adam_step(ps, cfg, step);
  CHECK(ps.entry("p").value[0] == 1.0);
  CHECK(ps.entry("p").value[1] == -2.0);
  CHECK(ps.entry("p").value[2] == 0.5);
  CHECK(step == 1);
}

TEST_CASE("adam single step with unit gradient moves by lr") {
  ParameterStore ps;
  ps.create("p", Tensor({1}, {0.4}));
  ps.entry("p").grad[0] = 1.0;
  std::uint64_t step = 0;
  AdamConfig cfg;
  cfg.lr = 1e-3;
  adam_step(ps, cfg, step);
  // bias-corrected mhat = 1, vhat = 1 -> delta = -lr/(1+eps)
  CHECK(ps.entry("p").value[0] == doctest::Approx(0.4 - 1e-3).epsilon(1e-6));
  CHECK(ps.entry("p").grad[0] == 0.0);
}

TEST_CASE("adam constant gradient approaches step size lr against the sign") {
  ParameterStore ps;
  ps.create("p", Tensor({1}, {0.0}));
  std::uint64_t step = 0;
  AdamConfig cfg;
  cfg.lr = 1e-3;
  double prev = 0.0;
  for (int i = 0; i < 500; ++i) {
    ps.entry("p").grad[0] = 0.5;
    prev = ps.entry("p").value[0];
    adam_step(ps, cfg, step);
  }
  double delta = ps.entry("p").value[0] - prev;
  CHECK(delta < 0.0);
  CHECK(std::fabs(std::fabs(delta) - cfg.lr) < 0.05 * cfg.lr);
}

TEST_CASE("gradient clipping caps the global norm") {
  ParameterStore ps;
  ps.create("a", Tensor({2}, {0.0, 0.0}));
  ps.create("b", Tensor({1}, {0.0}));
  ps.entry("a").grad = Tensor({2}, {30.0, 40.0});
  ps.entry("b").grad = Tensor({1}, {0.0});
  ps.clip_grad_norm(10.0);
  CHECK(ps.grad_norm() == doctest::Approx(10.0));
  CHECK(ps.entry("a").grad[0] == doctest::Approx(6.0));
  CHECK(ps.entry("a").grad[1] == doctest::Approx(8.0));
}

TEST_CASE("shared parameter nodes accumulate gradients once per use") {
  ParameterStore ps;
  ps.create("p", Tensor({2}, {1.0, 2.0}));
  Tape tp;
  Var a = tp.param(ps, "p");
  Var b = tp.param(ps, "p");
  CHECK(a.id == b.id);
  Var l = tp.sum(tp.add(a, b));  // d/dp = 2
  tp.backward(l);
  CHECK(ps.entry("p").grad[0] == doctest::Approx(2.0));
  CHECK(ps.entry("p").grad[1] == doctest::Approx(2.0));
}
