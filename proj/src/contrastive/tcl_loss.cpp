#include "trajcl/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trajcl/errors.hpp"
#include "trajcl/kernels.hpp"

namespace trajcl::contrastive {

Matrix pairwise_sq_l2(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) {
    throw ConfigError("pairwise_sq_l2: column dimensions differ (" + std::to_string(a.cols) +
                      " vs " + std::to_string(b.cols) + ")");
  }
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) out(i, j) = kernels::sq_dist(a.row(i), b.row(j));
  }
  return out;
}

double similarity(const PosteriorGaussian& q, const PosteriorGaussian& k) {
  if (q.dim() != k.dim()) throw ConfigError("similarity: dimension mismatch");
  return -(kernels::sq_dist(q.mean, k.mean) + kernels::sq_dist(q.std, k.std));
}

namespace {

struct Stacked {
  Matrix mean;
  Matrix std;
};

Stacked stack(const std::vector<PosteriorGaussian>& gs, std::size_t d) {
  Stacked s{Matrix(gs.size(), d), Matrix(gs.size(), d)};
  for (std::size_t i = 0; i < gs.size(); ++i) {
    if (gs[i].mean.size() != d || gs[i].std.size() != d) {
      throw ConfigError("query/key batch has inconsistent dimensions");
    }
    std::copy(gs[i].mean.begin(), gs[i].mean.end(), s.mean.data.begin() + i * d);
    std::copy(gs[i].std.begin(), gs[i].std.end(), s.std.data.begin() + i * d);
  }
  return s;
}

void check_batch(const QueryKeyBatch& batch, double temperature) {
  if (!(temperature > 0.0)) {
    throw ConfigError("contrastive temperature must be positive");
  }
  if (batch.queries.empty() || batch.queries.size() != batch.keys.size()) {
    throw ConfigError("query/key batch must be non-empty with equal lengths");
  }
}

// Scores (before any shift) and their row-wise softmax.
struct Forward {
  Matrix scores;
  Matrix probs;
};

Forward scores_and_probs(const QueryKeyBatch& batch, double temperature) {
  const std::size_t d = batch.queries.front().dim();
  const Stacked q = stack(batch.queries, d);
  const Stacked k = stack(batch.keys, d);
  const Matrix d_mu = pairwise_sq_l2(q.mean, k.mean);
  const Matrix d_sigma = pairwise_sq_l2(q.std, k.std);
  const std::size_t n = batch.size();
  Forward f{Matrix(n, n), Matrix(n, n)};
  for (std::size_t i = 0; i < n * n; ++i) {
    f.scores.data[i] = -(d_mu.data[i] + d_sigma.data[i]) / temperature;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = f.scores.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      f.probs(i, j) = std::exp(row[j] - mx);
      z += f.probs(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) f.probs(i, j) /= z;
  }
  return f;
}

}  // namespace

TclLossReport tcl_loss(const QueryKeyBatch& batch, double temperature, LogitShift shift) {
  check_batch(batch, temperature);
  const std::size_t n = batch.size();
  Forward f = scores_and_probs(batch, temperature);

  TclLossReport report;
  report.logits = f.scores;
  if (shift == LogitShift::row_max) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = f.scores.row(i);
      const double mx = *std::max_element(row.begin(), row.end());
      for (std::size_t j = 0; j < n; ++j) report.logits(i, j) = f.scores(i, j) - mx;
    }
  }

  double total = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = report.logits.row(i);
    double z = 0.0;
    for (const double v : row) z += std::exp(v);
    total += std::log(z) - row[i];
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == i) ++correct;
  }
  report.loss = total / static_cast<double>(n);
  report.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return report;
}

TclGradients tcl_loss_backward(const QueryKeyBatch& batch, double temperature,
                               double upstream) {
  check_batch(batch, temperature);
  const std::size_t n = batch.size();
  const std::size_t d = batch.queries.front().dim();
  const Forward f = scores_and_probs(batch, temperature);

  // dL/dscore_ij = (p_ij - [i == j]) / N;
  // dscore_ij/dq_i = -2 (q_i - k_j) / T for both the mean and std blocks.
  TclGradients g;
  g.query_mean.assign(n, std::vector<double>(d, 0.0));
  g.query_std.assign(n, std::vector<double>(d, 0.0));
  const double c = -2.0 * upstream / (temperature * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& q = batch.queries[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double w = c * (f.probs(i, j) - (i == j ? 1.0 : 0.0));
      if (w == 0.0) continue;
      const auto& k = batch.keys[j];
      for (std::size_t t = 0; t < d; ++t) {
        g.query_mean[i][t] += w * (q.mean[t] - k.mean[t]);
        g.query_std[i][t] += w * (q.std[t] - k.std[t]);
      }
    }
  }
  return g;
}

}  // namespace trajcl::contrastive
