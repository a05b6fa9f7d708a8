#include <Eigen/SVD>

#include "mob2vec/errors.hpp"
#include "mob2vec/reduction.hpp"

namespace mob2vec {

std::pair<PcaReducer, PointMatrix> PcaReducer::fit_transform(const PointMatrix& points, std::size_t out_dim) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  if (out_dim < 1) throw ConfigError("pca: out_dim must be >= 1");
  if (n < out_dim) throw DataError("pca: fewer points than output dimensions");
  if (d < out_dim) throw DataError("pca: output wider than input");

  PcaReducer r;
  r.mean_ = points.colwise().mean().transpose();
  const Eigen::MatrixXd centered = points.rowwise() - r.mean_.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto k = static_cast<Eigen::Index>(out_dim);
  r.components_ = svd.matrixV().leftCols(k);
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  r.variance_ = svd.singularValues().head(k).array().square() / denom;

  // Fix the sign so the largest-magnitude loading of each axis is positive.
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    r.components_.col(c).cwiseAbs().maxCoeff(&arg);
    if (r.components_(arg, c) < 0) r.components_.col(c) *= -1.0;
  }
  PointMatrix projected = centered * r.components_;
  return {std::move(r), std::move(projected)};
}

PointMatrix PcaReducer::transform(const PointMatrix& points) const {
  if (!fitted()) throw DataError("pca: transform before fit");
  if (points.cols() != mean_.size()) throw DataError("pca: input width differs from fitted width");
  return (points.rowwise() - mean_.transpose()) * components_;
}

PcaReducer PcaReducer::from_state(Eigen::VectorXd mean, Eigen::MatrixXd components, Eigen::VectorXd variance) {
  PcaReducer r;
  r.mean_ = std::move(mean);
  r.components_ = std::move(components);
  r.variance_ = std::move(variance);
  return r;
}

}  // namespace mob2vec
