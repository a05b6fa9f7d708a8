#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "mob2vec/errors.hpp"
#include "mob2vec/reduction.hpp"

using namespace mob2vec;

namespace {

PointMatrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  PointMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  }
  return m;
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; eigenvectors in columns.
std::pair<std::vector<double>, std::vector<std::vector<double>>> jacobi(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a[i][i];
  return {values, v};
}

/// Projection onto the top `k` covariance eigenvectors, computed without Eigen.
std::vector<std::vector<double>> oracle_projection(const PointMatrix& x, std::size_t k) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) - mean[a];
      for (std::size_t b = 0; b < d; ++b) {
        cov[a][b] += xa * (x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) - mean[b]);
      }
    }
  }
  for (auto& row : cov) {
    for (auto& c : row) c /= static_cast<double>(n - 1);
  }
  auto [values, vectors] = jacobi(cov);
  std::vector<std::size_t> order(d);
  for (std::size_t i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<std::vector<double>> out(n, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) {
        out[i][c] += (x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - mean[j]) * vectors[j][order[c]];
      }
    }
  }
  return out;
}

struct Blobs {
  PointMatrix points;
  std::vector<int> labels;
};

Blobs blobs(std::uint64_t seed, int count = 3, Eigen::Index per_blob = 60, Eigen::Index dim = 128) {
  std::mt19937_64 rng(seed);
  const PointMatrix centres = gaussian(rng, count, dim, 4.0);
  Blobs b;
  b.points = gaussian(rng, count * per_blob, dim);
  for (int c = 0; c < count; ++c) {
    for (Eigen::Index i = 0; i < per_blob; ++i) {
      b.points.row(c * per_blob + i) += centres.row(c);
      b.labels.push_back(c);
    }
  }
  return b;
}

double diameter(const PointMatrix& layout) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < layout.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < layout.rows(); ++j) best = std::max(best, (layout.row(i) - layout.row(j)).norm());
  }
  return best;
}

bool all_finite(const PointMatrix& m) { return m.allFinite(); }

}  // namespace

TEST_CASE("PCA projection equals the covariance eigendecomposition up to sign") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    PointMatrix x = gaussian(rng, 100, 16);
    for (Eigen::Index j = 0; j < 16; ++j) x.col(j) *= 0.5 + static_cast<double>(j);
    const auto [pca, projected] = PcaReducer::fit_transform(x, 2);
    const auto oracle = oracle_projection(x, 2);
    for (Eigen::Index c = 0; c < 2; ++c) {
      const double sign = projected(0, c) * oracle[0][static_cast<std::size_t>(c)] >= 0 ? 1.0 : -1.0;
      double worst = 0.0;
      for (Eigen::Index i = 0; i < 100; ++i) {
        const double expected = oracle[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        worst = std::max(worst, std::abs(projected(i, c) - sign * expected));
      }
      CHECK(worst <= 1e-6);
    }
    CHECK(pca.transform(x).isApprox(projected, 1e-12));
  }
}

TEST_CASE("PCA components are orthonormal with non-increasing variance") {
  std::mt19937_64 rng(7);
  PointMatrix x = gaussian(rng, 80, 12);
  for (Eigen::Index j = 0; j < 12; ++j) x.col(j) *= 1.0 + static_cast<double>(j % 5);
  const auto [pca, projected] = PcaReducer::fit_transform(x, 5);
  const Eigen::MatrixXd gram = pca.components().transpose() * pca.components();
  CHECK((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-8);
  for (Eigen::Index c = 1; c < 5; ++c) {
    CHECK(pca.explained_variance()(c) <= pca.explained_variance()(c - 1));
    const double var_prev = (projected.col(c - 1).array() - projected.col(c - 1).mean()).square().sum();
    const double var = (projected.col(c).array() - projected.col(c).mean()).square().sum();
    CHECK(var <= var_prev + 1e-9);
  }
}

TEST_CASE("points on a plane reconstruct exactly") {
  std::mt19937_64 rng(3);
  const PointMatrix basis = gaussian(rng, 2, 128);
  const PointMatrix coeffs = gaussian(rng, 50, 2);
  PointMatrix x = coeffs * basis;
  x.rowwise() += gaussian(rng, 1, 128).row(0);
  const auto [pca, projected] = PcaReducer::fit_transform(x, 2);
  PointMatrix back = projected * pca.components().transpose();
  back.rowwise() += pca.mean().transpose();
  CHECK((back - x).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("PCA maps duplicates together and rejects tiny inputs") {
  std::mt19937_64 rng(4);
  PointMatrix x = gaussian(rng, 10, 6);
  x.row(7) = x.row(2);
  const auto [pca, projected] = PcaReducer::fit_transform(x, 2);
  CHECK(projected.row(7) == projected.row(2));
  CHECK_THROWS_AS(PcaReducer::fit_transform(gaussian(rng, 1, 6), 2), DataError);
  CHECK_THROWS_AS(PcaReducer::fit_transform(gaussian(rng, 10, 3), 4), DataError);
  const auto restored = PcaReducer::from_state(pca.mean(), pca.components(), pca.explained_variance());
  CHECK(restored.transform(x) == pca.transform(x));
}

TEST_CASE("exact kNN") {
  PointMatrix x(4, 1);
  x << 0.0, 1.0, 3.0, 7.0;
  const auto knn = exact_knn(x, x, 2, true);
  CHECK(knn.index[0] == std::vector<std::size_t>{1, 2});
  CHECK(knn.index[3] == std::vector<std::size_t>{2, 1});
  CHECK(knn.distance[2] == std::vector<double>{2.0, 3.0});
  const auto with_self = exact_knn(x, x, 1, false);
  CHECK(with_self.index[2] == std::vector<std::size_t>{2});

  std::mt19937_64 rng(5);
  const PointMatrix y = gaussian(rng, 40, 5);
  const auto serial = exact_knn(y, y, 6, true, 1);
  const auto parallel = exact_knn(y, y, 6, true, 3);
  CHECK(serial.index == parallel.index);
  CHECK(serial.distance == parallel.distance);
}

TEST_CASE("fuzzy graph weights") {
  const auto b = blobs(8, 2, 30, 16);
  const auto knn = exact_knn(b.points, b.points, 10, true);
  std::vector<double> sigmas, rhos;
  const auto w = fuzzy_memberships(knn, &sigmas, &rhos);
  for (std::size_t i = 0; i < w.size(); ++i) {
    double sum = 0.0;
    for (const double x : w[i]) {
      CHECK(x > 0.0);
      CHECK(x <= 1.0);
      sum += x;
    }
    CHECK(sum == doctest::Approx(std::log2(10.0)).epsilon(1e-3));
    CHECK(w[i][0] == doctest::Approx(1.0));
  }
  const auto edges = symmetrize(knn, w, 60);
  std::map<std::pair<std::size_t, std::size_t>, double> weights;
  for (const auto& e : edges) {
    CHECK(e.weight > 0.0);
    CHECK(e.weight <= 1.0);
    weights[{e.head, e.tail}] = e.weight;
  }
  for (const auto& [key, value] : weights) CHECK(weights.at({key.second, key.first}) == value);
}

TEST_CASE("curve parameters") {
  const auto [a, b] = fit_curve_params(1.0, 0.1);
  CHECK(a == doctest::Approx(1.577).epsilon(0.02));
  CHECK(b == doctest::Approx(0.895).epsilon(0.02));
}

TEST_CASE("UMAP separates Gaussian blobs") {
  const auto b = blobs(42);
  const auto [umap, layout] = UmapReducer::fit(b.points, UmapParams{});
  REQUIRE(layout.rows() == 180);
  REQUIRE(layout.cols() == 2);
  CHECK(all_finite(layout));

  const auto low = exact_knn(layout, layout, 15, true);
  const auto high = exact_knn(b.points, b.points, 15, true);
  double purity = 0.0, overlap = 0.0;
  for (std::size_t i = 0; i < 180; ++i) {
    int same = 0;
    for (std::size_t k = 0; k < 10; ++k) same += b.labels[low.index[i][k]] == b.labels[i];
    purity += same / 10.0;
    const std::set<std::size_t> h(high.index[i].begin(), high.index[i].end());
    int shared = 0;
    for (const auto j : low.index[i]) shared += static_cast<int>(h.count(j));
    overlap += shared / 15.0;
  }
  purity /= 180.0;
  overlap /= 180.0;
  MESSAGE("purity " << purity << ", neighbour overlap " << overlap);
  CHECK(purity >= 0.9);
  CHECK(overlap >= 0.6);
}

TEST_CASE("UMAP keeps neighbours of blobs with planar spread") {
  std::mt19937_64 rng(43);
  const PointMatrix centres = gaussian(rng, 3, 128, 4.0);
  PointMatrix points(180, 128);
  for (Eigen::Index c = 0; c < 3; ++c) {
    const PointMatrix plane = gaussian(rng, 2, 128);
    const PointMatrix coords = gaussian(rng, 60, 2);
    points.middleRows(c * 60, 60) = coords * plane + 0.05 * gaussian(rng, 60, 128);
    points.middleRows(c * 60, 60).rowwise() += centres.row(c);
  }
  const auto [umap, layout] = UmapReducer::fit(points, UmapParams{});
  const auto low = exact_knn(layout, layout, 15, true);
  const auto high = exact_knn(points, points, 15, true);
  double overlap = 0.0;
  for (std::size_t i = 0; i < 180; ++i) {
    const std::set<std::size_t> h(high.index[i].begin(), high.index[i].end());
    int shared = 0;
    for (const auto j : low.index[i]) shared += static_cast<int>(h.count(j));
    overlap += shared / 15.0;
  }
  overlap /= 180.0;
  MESSAGE("planar blob neighbour overlap " << overlap);
  CHECK(overlap >= 0.6);
}

TEST_CASE("UMAP is deterministic and handles a single blob") {
  const auto b = blobs(5, 1, 50, 32);
  UmapParams p;
  p.epochs = 100;
  const auto first = UmapReducer::fit(b.points, p);
  const auto second = UmapReducer::fit(b.points, p);
  CHECK(first.second == second.second);
  CHECK(all_finite(first.second));
  p.init = UmapInit::kRandom;
  CHECK(all_finite(UmapReducer::fit(b.points, p).second));
  p.n_neighbors = 50;
  CHECK_THROWS_AS(UmapReducer::fit(b.points, p), DataError);
}

TEST_CASE("UMAP transform") {
  const auto b = blobs(11);
  const auto [umap, layout] = UmapReducer::fit(b.points, UmapParams{});
  const double diam = diameter(layout);

  const auto self = umap.transform(b.points);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < layout.rows(); ++i) worst = std::max(worst, (self.row(i) - layout.row(i)).norm());
  MESSAGE("worst self-transform shift " << worst << " of diameter " << diam);
  CHECK(worst <= 0.1 * diam);
  CHECK(umap.transform(b.points) == self);
  CHECK(umap.transform(b.points.topRows(5)) == self.topRows(5));

  const auto knn = exact_knn(b.points, b.points, 1, true);
  int between = 0;
  for (Eigen::Index i = 0; i < 30; ++i) {
    const auto j = static_cast<Eigen::Index>(knn.index[static_cast<std::size_t>(i)][0]);
    const PointMatrix mid = (b.points.row(i) + b.points.row(j)) / 2.0;
    const auto image = umap.transform(mid);
    const Eigen::RowVectorXd centre = (layout.row(i) + layout.row(j)) / 2.0;
    const double spread = (layout.row(i) - layout.row(j)).norm();
    between += (image.row(0) - centre).norm() <= std::max(spread, 0.1 * diam);
  }
  CHECK(between == 30);

  CHECK_THROWS_AS(UmapReducer{}.transform(b.points), DataError);
  const auto restored = UmapReducer::from_state(umap.params(), umap.training_data(), umap.layout(), umap.graph());
  CHECK(restored.transform(b.points.topRows(3)) == self.topRows(3));
}
