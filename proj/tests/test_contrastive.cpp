#include <doctest.h>

#include <cmath>
#include <vector>

#include "trajcl/contrastive.hpp"
#include "trajcl/errors.hpp"
#include "trajcl/nn/grad_check.hpp"

using namespace trajcl;
using namespace trajcl::contrastive;

namespace {

PosteriorGaussian random_gaussian(std::size_t d, Rng& rng, double spread = 1.0) {
  PosteriorGaussian g;
  for (std::size_t j = 0; j < d; ++j) {
    g.mean.push_back(uniform(rng, -spread, spread));
    g.std.push_back(uniform(rng, 0.1, 1.5));
  }
  return g;
}

QueryKeyBatch random_batch(std::size_t n, std::size_t d, Rng& rng) {
  QueryKeyBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    b.queries.push_back(random_gaussian(d, rng));
    b.keys.push_back(random_gaussian(d, rng));
  }
  return b;
}

// Direct InfoNCE: -log softmax of the diagonal, no shift, no temperature.
double direct_infonce(const QueryKeyBatch& b) {
  double total = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    double denom = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      double dist = 0;
      for (std::size_t k = 0; k < b.queries[i].dim(); ++k) {
        dist += std::pow(b.queries[i].mean[k] - b.keys[j].mean[k], 2) +
                std::pow(b.queries[i].std[k] - b.keys[j].std[k], 2);
      }
      denom += std::exp(-dist);
      if (i == j) total += dist;
    }
    total += std::log(denom);
  }
  return total / static_cast<double>(b.size());
}

std::vector<double> flatten_queries(const QueryKeyBatch& b) {
  std::vector<double> v;
  for (const auto& q : b.queries) {
    v.insert(v.end(), q.mean.begin(), q.mean.end());
    v.insert(v.end(), q.std.begin(), q.std.end());
  }
  return v;
}

QueryKeyBatch with_queries(QueryKeyBatch b, std::span<const double> v) {
  std::size_t k = 0;
  for (auto& q : b.queries) {
    for (auto& x : q.mean) x = v[k++];
    for (auto& x : q.std) x = v[k++];
  }
  return b;
}

std::vector<double> flatten_grads(const TclGradients& g) {
  std::vector<double> v;
  for (std::size_t i = 0; i < g.query_mean.size(); ++i) {
    v.insert(v.end(), g.query_mean[i].begin(), g.query_mean[i].end());
    v.insert(v.end(), g.query_std[i].begin(), g.query_std[i].end());
  }
  return v;
}

}  // namespace

TEST_CASE("pairwise squared distances") {
  Matrix eye(2, 2);
  eye(0, 0) = 1;
  eye(1, 1) = 1;
  const auto d = pairwise_sq_l2(eye, eye);
  CHECK(d(0, 0) == 0.0);
  CHECK(d(1, 1) == 0.0);
  CHECK(d(0, 1) == 2.0);
  CHECK(d(1, 0) == 2.0);

  Rng rng(1);
  Matrix a(3, 2), b(4, 2);
  for (auto& x : a.data) x = uniform(rng, -3, 3);
  for (auto& x : b.data) x = uniform(rng, -3, 3);
  const auto ab = pairwise_sq_l2(a, b);
  REQUIRE(ab.rows == 3);
  REQUIRE(ab.cols == 4);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 2; ++k) s += (a(i, k) - b(j, k)) * (a(i, k) - b(j, k));
      CHECK(std::abs(ab(i, j) - s) < 1e-12);
    }
  }
  CHECK_THROWS_AS(pairwise_sq_l2(a, Matrix(2, 3)), ConfigError);
}

TEST_CASE("similarity") {
  const PosteriorGaussian a{{1, 0}, {1, 1}}, b{{0, 0}, {1, 1}}, c{{0, 0}, {2, 1}};
  CHECK(similarity(a, a) == 0.0);
  CHECK(similarity(a, b) == -1.0);
  CHECK(similarity(b, c) == -1.0);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_gaussian(4, rng), q = random_gaussian(4, rng);
    CHECK(similarity(p, q) == similarity(q, p));
    CHECK(similarity(p, q) < 0.0);
  }
}

TEST_CASE("loss closed forms") {
  Rng rng(3);
  QueryKeyBatch one{{random_gaussian(3, rng)}, {random_gaussian(3, rng)}};
  const auto r1 = tcl_loss(one, 1.0);
  CHECK(r1.loss == 0.0);
  CHECK(r1.accuracy == 1.0);

  const auto g = random_gaussian(3, rng);
  QueryKeyBatch same{{g, g, g}, {g, g, g}};
  CHECK(tcl_loss(same, 1.0).loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));

  // Orthonormal means with equal stds put every negative at distance 2.
  QueryKeyBatch ortho;
  for (std::size_t i = 0; i < 3; ++i) {
    PosteriorGaussian p{{0, 0, 0}, {0.5, 0.5, 0.5}};
    p.mean[i] = 1.0;
    ortho.queries.push_back(p);
    ortho.keys.push_back(p);
  }
  const auto r = tcl_loss(ortho, 1.0);
  CHECK(r.loss == doctest::Approx(std::log(1 + 2 * std::exp(-2.0))).epsilon(1e-14));
  CHECK(r.accuracy == 1.0);
  REQUIRE(r.logits.rows == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.logits(i, i) == 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) CHECK(r.logits(i, j) == doctest::Approx(-2.0));
    }
  }
  // Temperature divides scores.
  CHECK(tcl_loss(ortho, 2.0).loss == doctest::Approx(std::log(1 + 2 * std::exp(-1.0))));

  CHECK_THROWS_AS(tcl_loss(ortho, 0.0), ConfigError);
  CHECK_THROWS_AS(tcl_loss(ortho, -1.0), ConfigError);
  CHECK_THROWS_AS(tcl_loss(QueryKeyBatch{}, 1.0), ConfigError);
  auto ragged = ortho;
  ragged.keys.pop_back();
  CHECK_THROWS_AS(tcl_loss(ragged, 1.0), ConfigError);
}

TEST_CASE("loss properties on random batches") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = random_batch(2 + uniform_index(rng, 10), 5, rng);
    const auto shifted = tcl_loss(b, 1.0);
    const auto raw = tcl_loss(b, 1.0, LogitShift::none);
    CHECK(std::abs(shifted.loss - raw.loss) < 1e-12);
    CHECK(std::abs(shifted.loss - direct_infonce(b)) < 1e-12);
    CHECK(shifted.loss >= 0.0);
    CHECK(shifted.accuracy >= 0.0);
    CHECK(shifted.accuracy <= 1.0);
    for (std::size_t i = 0; i < b.size(); ++i) {
      double row_max = -INFINITY;
      for (std::size_t j = 0; j < b.size(); ++j) row_max = std::max(row_max, shifted.logits(i, j));
      CHECK(row_max == 0.0);
    }

    // Consistent permutation of positives leaves the loss unchanged.
    auto perm = b;
    std::reverse(perm.queries.begin(), perm.queries.end());
    std::reverse(perm.keys.begin(), perm.keys.end());
    CHECK(std::abs(tcl_loss(perm, 0.7).loss - tcl_loss(b, 0.7).loss) < 1e-12);
  }
}

TEST_CASE("accuracy counts diagonal argmax rows") {
  QueryKeyBatch b;
  b.queries = {{{0.0}, {1.0}}, {{1.0}, {1.0}}};
  b.keys = {{{0.1}, {1.0}}, {{0.2}, {1.0}}};
  // Row 0 prefers key 0, row 1 prefers key 1: both correct.
  CHECK(tcl_loss(b, 1.0).accuracy == 1.0);
  b.keys[1].mean[0] = 5.0;
  // Row 1 now prefers key 0.
  CHECK(tcl_loss(b, 1.0).accuracy == 0.5);
}

TEST_CASE("loss approaches zero with separated embeddings") {
  QueryKeyBatch b;
  for (int i = 0; i < 4; ++i) {
    PosteriorGaussian p{{10.0 * i, 0}, {1, 1}};
    b.queries.push_back(p);
    b.keys.push_back(p);
  }
  CHECK(tcl_loss(b, 1.0).loss < 1e-40);
}

TEST_CASE("backward matches finite differences") {
  Rng rng(5);
  for (double temperature : {1.0, 2.0, 0.5}) {
    for (std::size_t n : {1u, 2u, 5u, 9u}) {
      CAPTURE(temperature);
      CAPTURE(n);
      const auto b = random_batch(n, 3, rng);
      const double upstream = 1.7;
      const auto g = tcl_loss_backward(b, temperature, upstream);
      const auto analytic = flatten_grads(g);
      auto f = [&](std::span<const double> v) {
        return upstream * tcl_loss(with_queries(b, v), temperature).loss;
      };
      const auto num = nn::numeric_gradient(f, flatten_queries(b), 1e-6);
      for (std::size_t i = 0; i < num.size(); ++i) {
        CHECK(nn::relative_error(analytic[i], num[i], 1e-6) < 1e-4);
      }
      if (n == 1) {
        for (double v : analytic) CHECK(v == 0.0);
      }
    }
  }
}

TEST_CASE("backward in the symmetric case") {
  const PosteriorGaussian g{{0.2, -0.1}, {0.8, 1.1}};
  QueryKeyBatch b{{g, g, g, g}, {g, g, g, g}};
  const auto grads = tcl_loss_backward(b, 1.0);
  for (const auto& row : grads.query_mean) {
    for (double v : row) CHECK(std::abs(v) < 1e-15);
  }
  // Perturbing one query mean: the loss change matches the gradient.
  auto f = [&](std::span<const double> v) { return tcl_loss(with_queries(b, v), 1.0).loss; };
  const auto num = nn::numeric_gradient(f, flatten_queries(b), 1e-6);
  const auto analytic = flatten_grads(grads);
  for (std::size_t i = 0; i < num.size(); ++i) CHECK(std::abs(analytic[i] - num[i]) < 1e-8);
}
