#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "trajcl/analysis.hpp"
#include "trajcl/errors.hpp"

using namespace trajcl;
using namespace trajcl::analysis;

namespace {

EmbeddingSet random_set(std::size_t n, std::size_t d, int labels, Rng& rng) {
  EmbeddingSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const int l = static_cast<int>(i % static_cast<std::size_t>(labels));
    std::vector<double> p(d);
    for (std::size_t j = 0; j < d; ++j) p[j] = uniform(rng, -1, 1) + 2.0 * l * (j == 0);
    s.points.push_back(p);
    s.labels.push_back(l);
  }
  return s;
}

// Double-loop reference: per-label centroid, then plain averages.
std::pair<double, double> naive_metrics(const EmbeddingSet& s) {
  std::map<int, std::vector<double>> sum;
  std::map<int, int> count;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto& c = sum[s.labels[i]];
    c.resize(s.dim(), 0.0);
    for (std::size_t j = 0; j < s.dim(); ++j) c[j] += s.points[i][j];
    ++count[s.labels[i]];
  }
  for (auto& [l, c] : sum) {
    for (auto& v : c) v /= count[l];
  }
  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double x = 0;
    for (std::size_t j = 0; j < a.size(); ++j) x += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(x);
  };
  double within = 0;
  for (std::size_t i = 0; i < s.size(); ++i) within += dist(s.points[i], sum[s.labels[i]]);
  double between = 0;
  int pairs = 0;
  for (const auto& [la, ca] : sum) {
    for (const auto& [lb, cb] : sum) {
      if (la < lb) {
        between += dist(ca, cb);
        ++pairs;
      }
    }
  }
  return {within / static_cast<double>(s.size()), between / pairs};
}

}  // namespace

TEST_CASE("cluster metrics by hand") {
  EmbeddingSet s;
  s.points = {{0, 0}, {0, 2}, {4, 0}, {4, 2}};
  s.labels = {0, 0, 1, 1};
  const auto m = cluster_metrics(s);
  CHECK(m.avg_dist_to_centroid == doctest::Approx(1.0));
  CHECK(m.avg_dist_between_centroids == doctest::Approx(4.0));
  CHECK(m.ratio() == doctest::Approx(0.25));
  CHECK(m.n_labels == 2);
  CHECK(m.n_points == 4);

  EmbeddingSet same;
  same.points = {{1, 1}, {1, 1}, {1, 1}};
  same.labels = {0, 1, 2};
  const auto z = cluster_metrics(same);
  CHECK(z.avg_dist_to_centroid == 0.0);
  CHECK(z.avg_dist_between_centroids == 0.0);
}

TEST_CASE("cluster metrics errors") {
  EmbeddingSet one;
  one.points = {{0, 0}, {1, 1}};
  one.labels = {3, 3};
  CHECK_THROWS_AS(cluster_metrics(one), ConfigError);
  CHECK_THROWS_AS(cluster_metrics(EmbeddingSet{}), ConfigError);
  EmbeddingSet ragged;
  ragged.points = {{0, 0}, {1}};
  ragged.labels = {0, 1};
  CHECK_THROWS_AS(cluster_metrics(ragged), ConfigError);
}

TEST_CASE("cluster metrics match a naive reference") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = random_set(30 + uniform_index(rng, 20), 4, 3, rng);
    const auto m = cluster_metrics(s);
    const auto [w, b] = naive_metrics(s);
    CHECK(std::abs(m.avg_dist_to_centroid - w) < 1e-12);
    CHECK(std::abs(m.avg_dist_between_centroids - b) < 1e-12);
  }
}

TEST_CASE("cluster metrics under translation and scaling") {
  Rng rng(2);
  const auto s = random_set(40, 3, 4, rng);
  const auto base = cluster_metrics(s);
  auto moved = s;
  for (auto& p : moved.points) {
    p[0] += 7.0;
    p[2] -= 3.0;
  }
  const auto t = cluster_metrics(moved);
  CHECK(t.avg_dist_to_centroid == doctest::Approx(base.avg_dist_to_centroid).epsilon(1e-12));
  CHECK(t.avg_dist_between_centroids ==
        doctest::Approx(base.avg_dist_between_centroids).epsilon(1e-12));
  auto scaled = s;
  for (auto& p : scaled.points) {
    for (auto& v : p) v *= 2.5;
  }
  const auto sc = cluster_metrics(scaled);
  CHECK(sc.avg_dist_to_centroid == doctest::Approx(2.5 * base.avg_dist_to_centroid));
  CHECK(sc.avg_dist_between_centroids == doctest::Approx(2.5 * base.avg_dist_between_centroids));
}

TEST_CASE("pca of centered 2-D data is a rotation") {
  Rng rng(3);
  EmbeddingSet s;
  for (int i = 0; i < 50; ++i) {
    const double a = uniform(rng, -3, 3), b = uniform(rng, -0.5, 0.5);
    s.points.push_back({a + b, a - b});
    s.labels.push_back(i % 2);
  }
  const auto proj = project_2d(s);
  REQUIRE(proj.size() == 50);
  // Pairwise distances survive exactly.
  for (std::size_t i = 0; i < 50; i += 7) {
    for (std::size_t j = i + 1; j < 50; j += 5) {
      const double orig = std::hypot(s.points[i][0] - s.points[j][0], s.points[i][1] - s.points[j][1]);
      const double flat = std::hypot(proj[i].x - proj[j].x, proj[i].y - proj[j].y);
      CHECK(std::abs(orig - flat) < 1e-12);
    }
    CHECK(proj[i].label == s.labels[i]);
  }
  // Projected coordinates are uncorrelated and ordered by variance.
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& p : proj) {
    sxx += p.x * p.x;
    syy += p.y * p.y;
    sxy += p.x * p.y;
  }
  CHECK(std::abs(sxy) < 1e-9 * sxx);
  CHECK(sxx >= syy);
}

TEST_CASE("pca of collinear points") {
  EmbeddingSet s;
  for (int i = 0; i < 10; ++i) {
    const double t = i - 4.5;
    s.points.push_back({1 + t, 2 - 2 * t, 0.5 * t});
    s.labels.push_back(0);
  }
  for (const auto& p : project_2d(s)) CHECK(std::abs(p.y) < 1e-10);
}

TEST_CASE("pca eigen identities") {
  Rng rng(4);
  auto s = random_set(60, 5, 3, rng);
  for (auto& p : s.points) p[3] = 0.3 * p[0] - p[1];  // rank-deficient direction
  const auto pca = principal_components(s);
  const std::size_t n = s.size(), d = s.dim();
  REQUIRE(pca.directions.size() == d);
  REQUIRE(pca.eigenvalues.size() == d);

  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (const auto& p : s.points) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        cov[a][b] += (p[a] - pca.mean[a]) * (p[b] - pca.mean[b]) / static_cast<double>(n - 1);
      }
    }
  }
  double total_var = 0;
  for (std::size_t a = 0; a < d; ++a) total_var += cov[a][a];
  double eig_sum = 0;
  for (std::size_t k = 0; k < d; ++k) {
    const auto& v = pca.directions[k];
    if (k > 0) CHECK(pca.eigenvalues[k] <= pca.eigenvalues[k - 1]);
    eig_sum += pca.eigenvalues[k];
    double norm = 0, largest = 0;
    for (std::size_t a = 0; a < d; ++a) {
      norm += v[a] * v[a];
      if (std::abs(v[a]) > std::abs(largest)) largest = v[a];
      double cv = 0;
      for (std::size_t b = 0; b < d; ++b) cv += cov[a][b] * v[b];
      CHECK(std::abs(cv - pca.eigenvalues[k] * v[a]) < 1e-10);
    }
    CHECK(norm == doctest::Approx(1.0));
    CHECK(largest > 0.0);
  }
  CHECK(eig_sum == doctest::Approx(total_var));

  // Mean squared residual off the top-2 plane equals the trailing eigenvalues.
  const auto proj = project_2d(s);
  double resid = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double rebuilt =
          pca.mean[a] + proj[i].x * pca.directions[0][a] + proj[i].y * pca.directions[1][a];
      resid += std::pow(s.points[i][a] - rebuilt, 2);
    }
  }
  double trailing = 0;
  for (std::size_t k = 2; k < d; ++k) trailing += pca.eigenvalues[k];
  CHECK(resid / static_cast<double>(n - 1) == doctest::Approx(trailing).epsilon(1e-10));
}

TEST_CASE("projection of one-dimensional embeddings") {
  EmbeddingSet s;
  s.points = {{1.0}, {3.0}, {2.0}};
  s.labels = {0, 1, 2};
  const auto proj = project_2d(s);
  CHECK(proj[0].x == doctest::Approx(-1.0));
  CHECK(proj[1].x == doctest::Approx(1.0));
  for (const auto& p : proj) CHECK(p.y == 0.0);
  EmbeddingSet single;
  single.points = {{1.0, 2.0}};
  single.labels = {0};
  CHECK_THROWS_AS(project_2d(single), ConfigError);
}

TEST_CASE("csv round trip preserves metrics") {
  Rng rng(5);
  const auto s = random_set(25, 5, 4, rng);
  std::stringstream buf;
  write_embeddings_csv(s, buf);
  const auto back = read_embeddings_csv(buf);
  CHECK(back.points == s.points);
  CHECK(back.labels == s.labels);
  const auto a = cluster_metrics(s), b = cluster_metrics(back);
  CHECK(a.avg_dist_to_centroid == b.avg_dist_to_centroid);

  std::stringstream proj;
  write_projection_csv(project_2d(s), proj);
  std::string line;
  std::getline(proj, line);
  CHECK(line == "x,y,label");
  int rows = 0;
  while (std::getline(proj, line)) ++rows;
  CHECK(rows == 25);

  std::stringstream bad("x,y\n1,2\n");
  CHECK_THROWS_AS(read_embeddings_csv(bad), ConfigError);
  const auto report = nlohmann::json::parse(metrics_report_json(a));
  CHECK(report["ratio"].get<double>() == doctest::Approx(a.ratio()));
}

TEST_CASE("embedding collection counts and determinism") {
  auto cfg = trainer::preset("smoke");
  Rng init(1);
  const auto agent = trainer::Agent::create(cfg, init);
  const auto split = env::sample_task_split(cfg.family, 8, 1, 2, cfg.horizon);
  Rng a(9), b(9);
  const auto one = collect_embeddings(agent, {split.train_tasks[0]}, 1, 1, cfg.window, a);
  CHECK(one.size() == 1);
  CHECK(one.dim() == cfg.context_dim);

  Rng c(9);
  const auto big = collect_embeddings(agent, split.train_tasks, 20, 4, cfg.window, b);
  const auto again = collect_embeddings(agent, split.train_tasks, 20, 4, cfg.window, c);
  CHECK(big.size() == 640);
  CHECK(big.points == again.points);
  CHECK(big.labels == again.labels);
  for (int l = 0; l < 8; ++l) CHECK(std::count(big.labels.begin(), big.labels.end(), l) == 80);

  for (const auto& p : big.points) {
    for (double v : p) CHECK(std::isfinite(v));
  }
  Rng d(1);
  CHECK_THROWS_AS(collect_embeddings(agent, split.train_tasks, 0, 1, cfg.window, d), ConfigError);
  CHECK_THROWS_AS(collect_embeddings(agent, split.train_tasks, 1, 1, 100, d), ConfigError);
}
