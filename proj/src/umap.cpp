#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string_view>
#include <thread>

#include "mob2vec/errors.hpp"
#include "mob2vec/hash.hpp"
#include "mob2vec/reduction.hpp"
#include "mob2vec/rng.hpp"

namespace mob2vec {

void UmapParams::validate() const {
  if (n_neighbors < 2) throw ConfigError("umap: n_neighbors must be >= 2");
  if (min_dist < 0.0 || spread <= 0.0 || min_dist > spread) throw ConfigError("umap: need 0 <= min_dist <= spread");
  if (epochs < 1) throw ConfigError("umap: epochs must be >= 1");
  if (transform_epochs < 0) throw ConfigError("umap: transform_epochs must be >= 0");
  if (negative_sample_rate < 0) throw ConfigError("umap: negative_sample_rate must be >= 0");
  if (out_dim < 1) throw ConfigError("umap: out_dim must be >= 1");
  if (threads < 1) throw ConfigError("umap: threads must be >= 1");
}

Neighbours exact_knn(const PointMatrix& query, const PointMatrix& reference, std::size_t k, bool exclude_self,
                     int threads) {
  const auto nq = static_cast<std::size_t>(query.rows());
  const auto nr = static_cast<std::size_t>(reference.rows());
  const std::size_t available = exclude_self ? nr - 1 : nr;
  if (k > available) throw DataError("knn: not enough reference points");
  Neighbours out;
  out.index.resize(nq);
  out.distance.resize(nq);

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, std::size_t>> cand(nr);
    for (std::size_t i = begin; i < end; ++i) {
      std::size_t m = 0;
      for (std::size_t j = 0; j < nr; ++j) {
        if (exclude_self && i == j) continue;
        cand[m++] = {(query.row(static_cast<Eigen::Index>(i)) - reference.row(static_cast<Eigen::Index>(j)))
                         .squaredNorm(),
                     j};
      }
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k),
                        cand.begin() + static_cast<std::ptrdiff_t>(m));
      out.index[i].resize(k);
      out.distance[i].resize(k);
      for (std::size_t t = 0; t < k; ++t) {
        out.index[i][t] = cand[t].second;
        out.distance[i][t] = std::sqrt(cand[t].first);
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(threads), nq));
  if (workers == 1) {
    work(0, nq);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (nq + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(nq, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

std::vector<std::vector<double>> fuzzy_memberships(const Neighbours& knn, std::vector<double>* sigmas,
                                                   std::vector<double>* rhos) {
  constexpr int kIterations = 64;
  constexpr double kTolerance = 1e-5;
  constexpr double kMinScale = 1e-3;

  const std::size_t n = knn.index.size();
  double global_mean = 0.0;
  std::size_t entries = 0;
  for (const auto& row : knn.distance) {
    for (const auto d : row) global_mean += d;
    entries += row.size();
  }
  global_mean = entries ? global_mean / static_cast<double>(entries) : 0.0;

  std::vector<std::vector<double>> weights(n);
  if (sigmas) sigmas->assign(n, 0.0);
  if (rhos) rhos->assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& dist = knn.distance[i];
    const double target = std::log2(static_cast<double>(dist.size()));
    double rho = 0.0;
    for (const auto d : dist) {
      if (d > 0.0) {
        rho = d;
        break;
      }
    }

    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
    for (int it = 0; it < kIterations; ++it) {
      double psum = 0.0;
      for (const auto d : dist) {
        const double gap = d - rho;
        psum += gap > 0.0 ? std::exp(-gap / mid) : 1.0;
      }
      if (std::abs(psum - target) < kTolerance) break;
      if (psum > target) {
        hi = mid;
        mid = (lo + hi) / 2.0;
      } else {
        lo = mid;
        mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
      }
    }
    double local_mean = 0.0;
    for (const auto d : dist) local_mean += d;
    local_mean /= static_cast<double>(dist.size());
    const double floor = kMinScale * (rho > 0.0 ? local_mean : global_mean);
    mid = std::max(mid, floor);
    if (mid <= 0.0) mid = kMinScale;

    weights[i].resize(dist.size());
    for (std::size_t t = 0; t < dist.size(); ++t) {
      const double gap = dist[t] - rho;
      weights[i][t] = gap > 0.0 ? std::exp(-gap / mid) : 1.0;
    }
    if (sigmas) (*sigmas)[i] = mid;
    if (rhos) (*rhos)[i] = rho;
  }
  return weights;
}

std::vector<Edge> symmetrize(const Neighbours& knn, const std::vector<std::vector<double>>& memberships,
                             std::size_t n) {
  std::map<std::pair<std::size_t, std::size_t>, double> w;
  for (std::size_t i = 0; i < knn.index.size(); ++i) {
    for (std::size_t t = 0; t < knn.index[i].size(); ++t) {
      const std::size_t j = knn.index[i][t];
      if (i == j || j >= n) continue;
      w[{i, j}] = memberships[i][t];
    }
  }
  std::vector<Edge> edges;
  edges.reserve(w.size() * 2);
  std::map<std::pair<std::size_t, std::size_t>, double> sym;
  for (const auto& [key, a] : w) {
    const auto rev = w.find({key.second, key.first});
    const double b = rev == w.end() ? 0.0 : rev->second;
    const double v = a + b - a * b;
    sym[key] = v;
    sym[{key.second, key.first}] = v;
  }
  for (const auto& [key, v] : sym) {
    if (v > 0.0) edges.push_back({key.first, key.second, v});
  }
  return edges;
}

std::pair<double, double> fit_curve_params(double spread, double min_dist) {
  constexpr int kSamples = 300;
  std::vector<double> xs(kSamples), ys(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    xs[i] = 3.0 * spread * i / (kSamples - 1);
    ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
  }
  auto residuals = [&](double a, double b, std::vector<double>& r) {
    double sse = 0.0;
    for (int i = 0; i < kSamples; ++i) {
      const double f = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b));
      r[i] = f - ys[i];
      sse += r[i] * r[i];
    }
    return sse;
  };

  // Levenberg-Marquardt on (a, b).
  double a = 1.5, b = 0.9, lambda = 1e-3;
  std::vector<double> r(kSamples), r_try(kSamples);
  double sse = residuals(a, b, r);
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (int i = 0; i < kSamples; ++i) {
      const double x = xs[i];
      if (x <= 0.0) continue;
      const double p = std::pow(x, 2.0 * b);
      const double den = 1.0 + a * p;
      const double da = -p / (den * den);
      const double db = -a * p * 2.0 * std::log(x) / (den * den);
      const Eigen::Vector2d g(da, db);
      jtj += g * g.transpose();
      jtr += g * r[i];
    }
    bool improved = false;
    for (int attempt = 0; attempt < 20 && !improved; ++attempt) {
      Eigen::Matrix2d m = jtj;
      m.diagonal() *= (1.0 + lambda);
      const Eigen::Vector2d step = m.ldlt().solve(-jtr);
      const double na = a + step(0), nb = b + step(1);
      if (na > 0.0 && nb > 0.0) {
        const double s = residuals(na, nb, r_try);
        if (s < sse) {
          const double gain = sse - s;
          a = na;
          b = nb;
          sse = s;
          r.swap(r_try);
          lambda = std::max(lambda / 10.0, 1e-12);
          improved = true;
          if (gain < 1e-14) return {a, b};
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return {a, b};
}

namespace {

constexpr double kGradientClip = 4.0;

double clip(double v) { return std::clamp(v, -kGradientClip, kGradientClip); }

// Negative-sampling SGD on the fuzzy cross-entropy. Head rows of `edges`
// index `moving`; tails index `anchors` (which may alias `moving`).
void optimize_layout(PointMatrix& moving, const PointMatrix* anchors, const std::vector<Edge>& edges, double a,
                     double b, int epochs, int negative_rate, double initial_alpha, bool move_other, Rng& rng) {
  if (edges.empty()) return;
  const PointMatrix& tails = anchors ? *anchors : moving;
  const auto n_tails = static_cast<std::uint64_t>(tails.rows());
  const auto dim = moving.cols();

  double max_w = 0.0;
  for (const auto& e : edges) max_w = std::max(max_w, e.weight);
  std::vector<double> per_sample(edges.size()), next_sample(edges.size()), per_negative(edges.size()),
      next_negative(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double scaled = epochs * edges[i].weight / max_w;
    per_sample[i] = scaled > 0.0 ? epochs / scaled : -1.0;
    next_sample[i] = per_sample[i];
    per_negative[i] = negative_rate > 0 ? per_sample[i] / negative_rate : -1.0;
    next_negative[i] = per_negative[i];
  }

  Eigen::VectorXd cur(dim), oth(dim);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double alpha = initial_alpha * (1.0 - static_cast<double>(epoch) / epochs);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (per_sample[i] <= 0.0 || next_sample[i] > epoch) continue;
      const auto j = static_cast<Eigen::Index>(edges[i].head);
      const auto k = static_cast<Eigen::Index>(edges[i].tail);

      double d2 = (moving.row(j) - tails.row(k)).squaredNorm();
      if (d2 > 0.0) {
        const double coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
        for (Eigen::Index d = 0; d < dim; ++d) {
          const double g = clip(coeff * (moving(j, d) - tails(k, d)));
          moving(j, d) += g * alpha;
          if (move_other) moving(k, d) -= g * alpha;
        }
      }
      next_sample[i] += per_sample[i];

      if (per_negative[i] > 0.0) {
        const int n_neg = static_cast<int>((epoch - next_negative[i]) / per_negative[i]);
        for (int p = 0; p < n_neg; ++p) {
          const auto s = static_cast<Eigen::Index>(uniform_index(rng, n_tails));
          if (!anchors && s == j) continue;
          d2 = (moving.row(j) - tails.row(s)).squaredNorm();
          if (d2 > 0.0) {
            const double coeff = 2.0 * b / ((0.001 + d2) * (a * std::pow(d2, b) + 1.0));
            for (Eigen::Index d = 0; d < dim; ++d) {
              moving(j, d) += clip(coeff * (moving(j, d) - tails(s, d))) * alpha;
            }
          } else {
            for (Eigen::Index d = 0; d < dim; ++d) moving(j, d) += kGradientClip * alpha;
          }
        }
        next_negative[i] += n_neg * per_negative[i];
      }
    }
  }
}

PointMatrix initial_layout(const PointMatrix& points, const UmapParams& params, Rng& rng) {
  const auto n = points.rows();
  const auto width = static_cast<Eigen::Index>(params.out_dim);
  PointMatrix layout(n, width);
  if (params.init == UmapInit::kPca && points.cols() >= width && n >= width) {
    layout = PcaReducer::fit_transform(points, params.out_dim).second;
    const double extent = layout.cwiseAbs().maxCoeff();
    if (extent > 0.0) layout *= 10.0 / extent;
    // Tiny jitter separates duplicates.
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index d = 0; d < width; ++d) {
        const double u1 = std::max(uniform01(rng), 1e-300);
        const double u2 = uniform01(rng);
        layout(i, d) += 1e-4 * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      }
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index d = 0; d < width; ++d) layout(i, d) = uniform01(rng) * 20.0 - 10.0;
    }
  }
  // Every axis to [0, 10] before optimising.
  for (Eigen::Index d = 0; d < width; ++d) {
    const double lo = layout.col(d).minCoeff(), hi = layout.col(d).maxCoeff();
    if (hi > lo) layout.col(d) = (layout.col(d).array() - lo) * (10.0 / (hi - lo));
  }
  return layout;
}

// Keeps edges that will be sampled at least once in `epochs` epochs.
std::vector<Edge> prune(std::vector<Edge> edges, int epochs) {
  double max_w = 0.0;
  for (const auto& e : edges) max_w = std::max(max_w, e.weight);
  const double cutoff = max_w / epochs;
  edges.erase(std::remove_if(edges.begin(), edges.end(), [&](const Edge& e) { return e.weight < cutoff; }),
              edges.end());
  return edges;
}

}  // namespace

std::pair<UmapReducer, PointMatrix> UmapReducer::fit(const PointMatrix& points, const UmapParams& params) {
  params.validate();
  const auto n = static_cast<std::size_t>(points.rows());
  if (params.n_neighbors >= n) throw DataError("umap: n_neighbors must be smaller than the number of points");

  UmapReducer r;
  r.params_ = params;
  r.data_ = points;
  std::tie(r.a_, r.b_) = fit_curve_params(params.spread, params.min_dist);

  const auto knn = exact_knn(points, points, params.n_neighbors, true, params.threads);
  const auto memberships = fuzzy_memberships(knn);
  r.graph_ = symmetrize(knn, memberships, n);

  Rng rng(params.seed);
  PointMatrix layout = initial_layout(points, params, rng);
  optimize_layout(layout, nullptr, prune(r.graph_, params.epochs), r.a_, r.b_, params.epochs,
                  params.negative_sample_rate, params.learning_rate, true, rng);
  r.layout_ = layout;
  return {std::move(r), std::move(layout)};
}

PointMatrix UmapReducer::transform(const PointMatrix& points) const {
  if (!fitted()) throw DataError("umap: transform before fit");
  if (points.cols() != data_.cols()) throw DataError("umap: input width differs from fitted width");
  const std::size_t k = params_.n_neighbors;
  const auto knn = exact_knn(points, data_, k, false, params_.threads);
  const auto memberships = fuzzy_memberships(knn);

  const int epochs = params_.transform_epochs > 0 ? params_.transform_epochs : std::max(1, params_.epochs / 3);
  PointMatrix embedded = PointMatrix::Zero(points.rows(), layout_.cols());
  for (std::size_t i = 0; i < knn.index.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    PointMatrix placed = PointMatrix::Zero(1, layout_.cols());
    std::vector<Edge> edges;
    const double total = std::accumulate(memberships[i].begin(), memberships[i].end(), 0.0);
    for (std::size_t t = 0; t < k; ++t) {
      const double w = total > 0.0 ? memberships[i][t] / total : 1.0 / static_cast<double>(k);
      placed.row(0) += w * layout_.row(static_cast<Eigen::Index>(knn.index[i][t]));
      edges.push_back({0, knn.index[i][t], memberships[i][t]});
    }
    // Seeded by the input coordinates: a point's image does not depend on its batch.
    const Eigen::VectorXd coords = points.row(row).transpose();
    const std::string_view bytes(reinterpret_cast<const char*>(coords.data()),
                                 static_cast<std::size_t>(coords.size()) * sizeof(double));
    Rng rng(derive_seed(params_.seed, fnv1a(bytes)));
    optimize_layout(placed, &layout_, prune(std::move(edges), epochs), a_, b_, epochs, params_.negative_sample_rate,
                    params_.learning_rate / 4.0, false, rng);
    embedded.row(row) = placed.row(0);
  }
  return embedded;
}

UmapReducer UmapReducer::from_state(UmapParams params, PointMatrix data, PointMatrix layout, std::vector<Edge> graph) {
  params.validate();
  UmapReducer r;
  r.params_ = params;
  r.data_ = std::move(data);
  r.layout_ = std::move(layout);
  r.graph_ = std::move(graph);
  std::tie(r.a_, r.b_) = fit_curve_params(params.spread, params.min_dist);
  return r;
}

}  // namespace mob2vec
