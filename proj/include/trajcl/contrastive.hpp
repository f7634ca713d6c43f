#pragma once

// Trajectory contrastive loss: InfoNCE over a negative 2-Wasserstein
// similarity between diagonal Gaussians. Row i of the score matrix compares
// query i against every key; key i is the positive.

#include <cstddef>
#include <span>
#include <vector>

#include "trajcl/encoder.hpp"

namespace trajcl::contrastive {

using encoder::PosteriorGaussian;

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * cols, cols);
  }
};

/// Entry (i, j) = ||a_i - b_j||^2. Throws ConfigError on column mismatch.
Matrix pairwise_sq_l2(const Matrix& a, const Matrix& b);

/// -(||q.mean - k.mean||^2 + ||q.std - k.std||^2).
double similarity(const PosteriorGaussian& q, const PosteriorGaussian& k);

/// Index-aligned positives: (queries[i], keys[i]).
struct QueryKeyBatch {
  std::vector<PosteriorGaussian> queries;
  std::vector<PosteriorGaussian> keys;
  std::size_t size() const { return queries.size(); }
};

struct TclLossReport {
  double loss = 0.0;
  Matrix logits;
  double accuracy = 0.0;  // fraction of rows whose argmax is the diagonal
};

enum class LogitShift {
  row_max,  // logits = scores - max(scores, axis=1)
  none,     // raw scores; reference path for the shift-invariance check
};

/// scores = similarity / temperature; loss = mean_i CE(logits_i, label i).
/// Throws ConfigError on non-positive temperature, empty or ragged batch.
TclLossReport tcl_loss(const QueryKeyBatch& batch, double temperature,
                       LogitShift shift = LogitShift::row_max);

struct TclGradients {
  std::vector<std::vector<double>> query_mean;
  std::vector<std::vector<double>> query_std;
};

/// Exact gradient of upstream * tcl_loss w.r.t. query means and stds. Keys
/// are detached and receive nothing.
TclGradients tcl_loss_backward(const QueryKeyBatch& batch, double temperature,
                               double upstream = 1.0);

}  // namespace trajcl::contrastive
