#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mob2vec {

/// One point per row.
using PointMatrix = Eigen::MatrixXd;

/// Centre-and-project onto the leading principal directions.
class PcaReducer {
 public:
  PcaReducer() = default;

  /// Throws DataError when there are fewer points than `out_dim` or the
  /// requested width exceeds the input width.
  static std::pair<PcaReducer, PointMatrix> fit_transform(const PointMatrix& points, std::size_t out_dim = 2);

  PointMatrix transform(const PointMatrix& points) const;
  bool fitted() const { return components_.size() > 0; }

  const Eigen::VectorXd& mean() const { return mean_; }
  /// Orthonormal columns ordered by decreasing explained variance.
  const Eigen::MatrixXd& components() const { return components_; }
  const Eigen::VectorXd& explained_variance() const { return variance_; }

  static PcaReducer from_state(Eigen::VectorXd mean, Eigen::MatrixXd components, Eigen::VectorXd variance);

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd components_;
  Eigen::VectorXd variance_;
};

enum class UmapInit {
  kPca,     ///< leading principal components, scaled
  kRandom,  ///< uniform box
};

struct UmapParams {
  std::size_t n_neighbors = 15;
  double min_dist = 0.1;
  double spread = 1.0;
  int epochs = 200;
  /// 0 selects epochs / 3.
  int transform_epochs = 0;
  int negative_sample_rate = 5;
  double learning_rate = 1.0;
  std::size_t out_dim = 2;
  std::uint64_t seed = 42;
  UmapInit init = UmapInit::kPca;
  /// Workers for the neighbour search; the layout itself is serial.
  int threads = 1;

  void validate() const;
};

struct Neighbours {
  std::vector<std::vector<std::size_t>> index;
  std::vector<std::vector<double>> distance;
};

/// Exact Euclidean k nearest neighbours of each query row among `reference`
/// rows, ascending by distance (ties by index). With `exclude_self`, row i of
/// the query is never its own neighbour (query must equal reference).
Neighbours exact_knn(const PointMatrix& query, const PointMatrix& reference, std::size_t k, bool exclude_self,
                     int threads = 1);

/// Weighted sparse edge (head, tail, weight).
struct Edge {
  std::size_t head;
  std::size_t tail;
  double weight;
};

/// Fuzzy membership strengths of each point's neighbours: exp(-(d - rho)/sigma)
/// with per-point rho (nearest non-zero distance) and sigma calibrated so the
/// strengths sum to log2(k).
std::vector<std::vector<double>> fuzzy_memberships(const Neighbours& knn, std::vector<double>* sigmas = nullptr,
                                                   std::vector<double>* rhos = nullptr);

/// Fuzzy union W + W^T - W o W^T, both directions of every pair listed.
std::vector<Edge> symmetrize(const Neighbours& knn, const std::vector<std::vector<double>>& memberships,
                             std::size_t n);

/// Low-dimensional curve 1 / (1 + a d^(2b)) fitted to the min_dist/spread profile.
std::pair<double, double> fit_curve_params(double spread, double min_dist);

class UmapReducer {
 public:
  UmapReducer() = default;

  /// Throws DataError when n_neighbors >= number of points.
  static std::pair<UmapReducer, PointMatrix> fit(const PointMatrix& points, const UmapParams& params = {});

  /// Places new points against the frozen training layout. Throws DataError
  /// when the reducer is not fitted.
  PointMatrix transform(const PointMatrix& points) const;

  bool fitted() const { return layout_.rows() > 0; }
  const UmapParams& params() const { return params_; }
  const PointMatrix& training_data() const { return data_; }
  const PointMatrix& layout() const { return layout_; }
  const std::vector<Edge>& graph() const { return graph_; }
  double curve_a() const { return a_; }
  double curve_b() const { return b_; }

  static UmapReducer from_state(UmapParams params, PointMatrix data, PointMatrix layout, std::vector<Edge> graph);

 private:
  UmapParams params_;
  PointMatrix data_;
  PointMatrix layout_;
  std::vector<Edge> graph_;
  double a_ = 0.0;
  double b_ = 0.0;
};

}  // namespace mob2vec
