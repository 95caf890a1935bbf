#include <cmath>

#include "doctest.h"
#include "leaffm/numerics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace leaffm;
using leaffm::test::rel_err;

TEST_CASE("layer norm forward matches hand values") {
  LayerNormParams p;
  p.gain = {1.0, 1.0};
  p.bias = {0.0, 0.0};
  const Vec h = layer_norm_forward({1.0, 3.0}, p);
  CHECK(h[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(h[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("layer norm of a constant vector is the bias") {
  LayerNormParams p;
  p.gain = {2.0, 3.0, -1.0};
  p.bias = {0.5, -0.25, 4.0};
  const Vec h = layer_norm_forward({7.0, 7.0, 7.0}, p);
  CHECK(h[0] == 0.5);
  CHECK(h[1] == -0.25);
  CHECK(h[2] == 4.0);
}

TEST_CASE("layer norm forward matches a scripted recomputation") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const size_t h = 10;
    LayerNormParams p;
    Vec x(h);
    p.gain.resize(h);
    p.bias.resize(h);
    for (size_t i = 0; i < h; ++i) {
      x[i] = rng.uniform(-2.0, 2.0);
      p.gain[i] = rng.uniform(-1.5, 1.5);
      p.bias[i] = rng.uniform(-1.0, 1.0);
    }
    const Vec got = layer_norm_forward(x, p);
    const Vec want = leaffm::test::naive_layer_norm(x, p.gain, p.bias, p.epsilon);
    for (size_t i = 0; i < h; ++i) CHECK(std::fabs(got[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("layer norm normalizes mean and variance under unit gain") {
  Rng rng(5);
  const size_t h = 16;
  LayerNormParams p;
  p.gain.assign(h, 1.0);
  p.bias.assign(h, 0.0);
  Vec x(h);
  for (double& v : x) v = rng.uniform(-3.0, 3.0);
  const Vec out = layer_norm_forward(x, p);
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(h);
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  var /= static_cast<double>(h);
  CHECK(std::fabs(mean) < 1e-10);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("layer norm shape errors") {
  LayerNormParams p;
  p.gain = {1.0, 1.0};
  p.bias = {0.0};
  CHECK_THROWS_AS(layer_norm_forward({1.0, 2.0}, p), ShapeError);
}

TEST_CASE("layer norm backward matches finite differences") {
  Rng rng(21);
  const size_t h = 7;
  for (int rep = 0; rep < 10; ++rep) {
    LayerNormParams p;
    Vec x(h);
    p.gain.resize(h);
    p.bias.resize(h);
    Vec grad_out(h);
    for (size_t i = 0; i < h; ++i) {
      x[i] = rng.uniform(-1.0, 1.0);
      p.gain[i] = rng.uniform(-1.0, 1.0);
      p.bias[i] = rng.uniform(-1.0, 1.0);
      grad_out[i] = rng.uniform(-1.0, 1.0);
    }
    LayerNormCache cache;
    layer_norm_forward(x, p, &cache);
    const LayerNormGrads grads = layer_norm_backward(grad_out, cache, p);

    const double step = 1e-6;
    const auto objective = [&](const Vec& xx, const LayerNormParams& pp) {
      const Vec out = layer_norm_forward(xx, pp);
      double s = 0.0;
      for (size_t i = 0; i < h; ++i) s += out[i] * grad_out[i];
      return s;
    };
    for (size_t i = 0; i < h; ++i) {
      Vec xp = x, xm = x;
      xp[i] += step;
      xm[i] -= step;
      const double fd = (objective(xp, p) - objective(xm, p)) / (2 * step);
      CHECK(rel_err(grads.input[i], fd, 1e-5) < 1e-5);

      LayerNormParams pp = p, pm = p;
      pp.gain[i] += step;
      pm.gain[i] -= step;
      const double fd_g = (objective(x, pp) - objective(x, pm)) / (2 * step);
      CHECK(rel_err(grads.gain[i], fd_g, 1e-5) < 1e-5);

      pp = p;
      pm = p;
      pp.bias[i] += step;
      pm.bias[i] -= step;
      const double fd_b = (objective(x, pp) - objective(x, pm)) / (2 * step);
      CHECK(rel_err(grads.bias[i], fd_b, 1e-5) < 1e-5);
    }
  }
}

TEST_CASE("layer norm backward edge cases") {
  LayerNormParams p;
  p.gain = {1.5};
  p.bias = {0.25};
  LayerNormCache cache;
  layer_norm_forward({3.0}, p, &cache);
  // Single-element normalization: output is the bias whatever the input.
  const LayerNormGrads g = layer_norm_backward({1.0}, cache, p);
  CHECK(g.input[0] == doctest::Approx(0.0).epsilon(1e-12));

  LayerNormParams p2;
  p2.gain = {1.0, 1.0};
  p2.bias = {0.0, 0.0};
  LayerNormCache c2;
  layer_norm_forward({1.0, 2.0}, p2, &c2);
  const LayerNormGrads zero = layer_norm_backward({0.0, 0.0}, c2, p2);
  for (double v : zero.input) CHECK(v == 0.0);
  for (double v : zero.gain) CHECK(v == 0.0);
  for (double v : zero.bias) CHECK(v == 0.0);

  // Stale cache: gradient length no longer matches.
  CHECK_THROWS_AS(layer_norm_backward({1.0, 2.0, 3.0}, c2, p2), ContractError);
}

TEST_CASE("activations and masks") {
  const Vec relu = activate({-2.0, 0.0, 3.0}, Activation::relu);
  CHECK(relu == Vec{0.0, 0.0, 3.0});
  const Vec mask = activation_mask({-2.0, 0.0, 3.0}, Activation::relu);
  CHECK(mask == Vec{0.0, 0.0, 1.0});

  const Vec id = activate({-2.0, 0.5}, Activation::identity);
  CHECK(id == Vec{-2.0, 0.5});
  CHECK(activation_mask({-2.0, 0.5}, Activation::identity) == Vec{1.0, 1.0});

  // Finite differences away from the kink agree with the mask.
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    double z = rng.uniform(-2.0, 2.0);
    if (std::fabs(z) < 1e-3) continue;
    const double fd =
        (apply_activation(z + 1e-6, Activation::relu) - apply_activation(z - 1e-6, Activation::relu)) /
        2e-6;
    CHECK(rel_err(activation_grad(z, Activation::relu), fd, 1e-6) < 1e-6);
  }
}

TEST_CASE("initializers") {
  const Vec z = init_vector(5, InitScheme::zeros, 1);
  CHECK(z == Vec{0.0, 0.0, 0.0, 0.0, 0.0});

  const Matrix g = init_matrix(10, 10, InitScheme::glorot_uniform, 42);
  const double bound = 0.5477225575051661;
  for (double v : g.data) {
    CHECK(std::fabs(v) <= bound);
  }
  double max_abs = 0.0;
  for (double v : g.data) max_abs = std::max(max_abs, std::fabs(v));
  CHECK(max_abs > 0.3 * bound);  // actually fills the range

  const Matrix a = init_matrix(4, 6, InitScheme::normal, 7, 0.5);
  const Matrix b = init_matrix(4, 6, InitScheme::normal, 7, 0.5);
  CHECK(a.data == b.data);
  const Matrix c = init_matrix(4, 6, InitScheme::normal, 8, 0.5);
  CHECK(a.data != c.data);
}

TEST_CASE("rng determinism and ranges") {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng n(9);
  double mean = 0.0, var = 0.0;
  const int count = 20000;
  std::vector<double> xs(static_cast<size_t>(count));
  for (double& x : xs) x = n.normal();
  for (double x : xs) mean += x;
  mean /= count;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= count;
  CHECK(std::fabs(mean) < 0.05);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("stable sigmoid") {
  CHECK(stable_sigmoid(0.0) == 0.5);
  CHECK(stable_sigmoid(0.5) == doctest::Approx(0.6224593312018546).epsilon(1e-12));
  CHECK(stable_sigmoid(800.0) <= 1.0);
  CHECK(stable_sigmoid(-800.0) >= 0.0);
  CHECK(std::isfinite(stable_sigmoid(800.0)));
  CHECK(std::isfinite(stable_sigmoid(-800.0)));
}
