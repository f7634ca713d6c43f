#pragma once

// Embedding-space study: posterior means of trajectory windows labelled by
// task, centroid distances, and a PCA projection to the plane.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "trajcl/trainer.hpp"

namespace trajcl::analysis {

struct EmbeddingSet {
  std::vector<std::vector<double>> points;
  std::vector<int> labels;  // labels[i] belongs to points[i]
  std::string source;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
};

/// Per task: `rollouts_per_task` prior-mode rollouts of the agent's policy,
/// `windows_per_trajectory` windows cropped at uniform starts from each, and
/// the query-encoder posterior mean of every window.
EmbeddingSet collect_embeddings(const trainer::Agent& agent,
                                const std::vector<env::TaskSpec>& tasks, int rollouts_per_task,
                                int windows_per_trajectory, std::size_t window, Rng& rng);

struct ClusterMetrics {
  double avg_dist_to_centroid = 0.0;        // mean over all points
  double avg_dist_between_centroids = 0.0;  // mean over unordered label pairs
  std::size_t n_labels = 0;
  std::size_t n_points = 0;

  double ratio() const { return avg_dist_to_centroid / avg_dist_between_centroids; }
};

/// Throws ConfigError with fewer than two labels, an empty set, or ragged
/// point dimensions.
ClusterMetrics cluster_metrics(const EmbeddingSet& set);

struct ProjectedPoint {
  double x = 0.0;
  double y = 0.0;
  int label = 0;
};

struct Pca {
  std::vector<double> mean;
  std::vector<std::vector<double>> directions;  // unit vectors, descending variance
  std::vector<double> eigenvalues;              // all d, descending; covariance uses 1/(n-1)
};

/// Principal directions of the sample covariance. Each direction's
/// largest-magnitude component is made positive.
Pca principal_components(const EmbeddingSet& set);

/// Centered points on the top two principal directions; the second
/// coordinate is 0 when the embedding is one-dimensional. Needs >= 2 points.
std::vector<ProjectedPoint> project_2d(const EmbeddingSet& set);

/// label,e0,...,e{d-1}
void write_embeddings_csv(const EmbeddingSet& set, std::ostream& out);
EmbeddingSet read_embeddings_csv(std::istream& in);
/// x,y,label
void write_projection_csv(const std::vector<ProjectedPoint>& points, std::ostream& out);
std::string metrics_report_json(const ClusterMetrics& m);

}  // namespace trajcl::analysis
