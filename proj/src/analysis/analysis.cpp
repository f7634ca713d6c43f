#include "trajcl/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "trajcl/errors.hpp"

namespace trajcl::analysis {

EmbeddingSet collect_embeddings(const trainer::Agent& agent,
                                const std::vector<env::TaskSpec>& tasks, int rollouts_per_task,
                                int windows_per_trajectory, std::size_t window, Rng& rng) {
  if (rollouts_per_task < 1 || windows_per_trajectory < 1) {
    throw ConfigError("collect_embeddings needs at least one rollout and one window");
  }
  EmbeddingSet set;
  std::int64_t next_id = 0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (window < 1 || window > static_cast<std::size_t>(tasks[t].horizon)) {
      throw ConfigError("window must lie in [1, horizon]");
    }
    const auto rollouts =
        trainer::collect_rollouts(tasks[t], static_cast<int>(t), trainer::RolloutMode::prior,
                                  rollouts_per_task, agent, nullptr, window, next_id, rng);
    next_id += rollouts_per_task;
    for (const auto& r : rollouts) {
      const auto& traj = r.trajectory;
      for (int w = 0; w < windows_per_trajectory; ++w) {
        const std::size_t start = uniform_index(rng, traj.size() - window + 1);
        const auto crop = replay::crop_window(traj, start, window);
        set.points.push_back(encoder::infer_posterior(agent.encoder, crop.transitions).mean);
        set.labels.push_back(static_cast<int>(t));
      }
    }
  }
  return set;
}

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

void check_set(const EmbeddingSet& set) {
  if (set.points.empty()) throw ConfigError("embedding set is empty");
  if (set.labels.size() != set.points.size()) throw ConfigError("one label per point required");
  for (const auto& p : set.points) {
    if (p.size() != set.dim()) throw ConfigError("embedding points have differing dimensions");
  }
}

}  // namespace

ClusterMetrics cluster_metrics(const EmbeddingSet& set) {
  check_set(set);
  const std::size_t d = set.dim();
  std::map<int, std::pair<std::vector<double>, std::size_t>> sums;
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto& [sum, count] = sums[set.labels[i]];
    sum.resize(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) sum[j] += set.points[i][j];
    ++count;
  }
  if (sums.size() < 2) {
    throw ConfigError("distance between centroids needs at least two labels");
  }
  std::map<int, std::vector<double>> centroids;
  for (auto& [label, sc] : sums) {
    for (auto& v : sc.first) v /= static_cast<double>(sc.second);
    centroids[label] = sc.first;
  }

  ClusterMetrics m;
  m.n_labels = centroids.size();
  m.n_points = set.size();
  double within = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    within += distance(set.points[i], centroids[set.labels[i]]);
  }
  m.avg_dist_to_centroid = within / static_cast<double>(set.size());

  double between = 0.0;
  std::size_t pairs = 0;
  for (auto a = centroids.begin(); a != centroids.end(); ++a) {
    for (auto b = std::next(a); b != centroids.end(); ++b) {
      between += distance(a->second, b->second);
      ++pairs;
    }
  }
  m.avg_dist_between_centroids = between / static_cast<double>(pairs);
  return m;
}

Pca principal_components(const EmbeddingSet& set) {
  check_set(set);
  if (set.size() < 2) throw ConfigError("PCA needs at least two points");
  const auto n = static_cast<Eigen::Index>(set.size());
  const auto d = static_cast<Eigen::Index>(set.dim());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = set.points[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  // Ascending eigenvalues; read back to front.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("PCA eigendecomposition failed");

  Pca pca;
  pca.mean.assign(mean.data(), mean.data() + d);
  for (Eigen::Index k = d - 1; k >= 0; --k) {
    Eigen::VectorXd v = solver.eigenvectors().col(k);
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < d; ++j) {
      if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
    }
    if (v(arg) < 0.0) v = -v;
    pca.directions.emplace_back(v.data(), v.data() + d);
    pca.eigenvalues.push_back(solver.eigenvalues()(k));
  }
  return pca;
}

std::vector<ProjectedPoint> project_2d(const EmbeddingSet& set) {
  const Pca pca = principal_components(set);
  const std::size_t d = set.dim();
  std::vector<ProjectedPoint> out;
  out.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    double c[2] = {0.0, 0.0};
    for (std::size_t k = 0; k < std::min<std::size_t>(2, d); ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        c[k] += (set.points[i][j] - pca.mean[j]) * pca.directions[k][j];
      }
    }
    out.push_back({c[0], c[1], set.labels[i]});
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_embeddings_csv(const EmbeddingSet& set, std::ostream& out) {
  out << "label";
  for (std::size_t j = 0; j < set.dim(); ++j) out << ",e" << j;
  out << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.labels[i];
    for (const double v : set.points[i]) out << ',' << fmt(v);
    out << '\n';
  }
}

EmbeddingSet read_embeddings_csv(std::istream& in) {
  EmbeddingSet set;
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) {
    throw ConfigError("embedding CSV must start with a label header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    set.labels.push_back(std::stoi(cell));
    std::vector<double> p;
    while (std::getline(ss, cell, ',')) p.push_back(std::stod(cell));
    set.points.push_back(std::move(p));
  }
  return set;
}

void write_projection_csv(const std::vector<ProjectedPoint>& points, std::ostream& out) {
  out << "x,y,label\n";
  for (const auto& p : points) out << fmt(p.x) << ',' << fmt(p.y) << ',' << p.label << '\n';
}

std::string metrics_report_json(const ClusterMetrics& m) {
  return nlohmann::json{{"avg_dist_to_centroid", m.avg_dist_to_centroid},
                        {"avg_dist_between_centroids", m.avg_dist_between_centroids},
                        {"ratio", m.ratio()},
                        {"n_labels", m.n_labels},
                        {"n_points", m.n_points}}
      .dump(2);
}

}  // namespace trajcl::analysis
