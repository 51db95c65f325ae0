#include <algorithm>
#include <limits>
#include <string>

#include "muse/errors.hpp"
#include "muse/evaluation.hpp"
#include "muse/random.hpp"

namespace muse {
namespace {

double squared_distance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    const double diff = a[c] - b[c];
    s += diff * diff;
  }
  return s;
}

// k-means++ seeding: first centre uniform, then proportional to squared
// distance from the nearest chosen centre.
std::vector<double> seed_centroids(const double* x, std::size_t n, std::size_t d, std::size_t k, Rng& rng) {
  std::vector<double> centroids(k * d);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.index(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : nearest) total += v;
      if (total > 0.0) {
        double target = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          target -= nearest[i];
          if (target < 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = rng.index(n);
      }
    }
    std::copy_n(x + pick * d, d, centroids.begin() + static_cast<std::ptrdiff_t>(c * d));
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(x + i * d, centroids.data() + c * d, d));
    }
  }
  return centroids;
}

KMeansResult lloyd(const double* x, std::size_t n, std::size_t d, std::size_t k, std::size_t max_iter, Rng& rng) {
  KMeansResult r;
  r.centroids = seed_centroids(x, n, d, k, rng);
  r.assignment.assign(n, -1);
  std::vector<double> dist(n);
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);

  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = squared_distance(x + i * d, r.centroids.data() + c * d, d);
        if (dd < best_d) {
          best_d = dd;
          best = static_cast<int>(c);
        }
      }
      changed |= r.assignment[i] != best;
      r.assignment[i] = best;
      dist[i] = best_d;
      wcss += best_d;
    }
    r.wcss_history.push_back(wcss);
    r.iterations = it + 1;
    if (!changed) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(r.assignment[i]);
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += x[i * d + j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < d; ++j) r.centroids[c * d + j] = sums[c * d + j] / static_cast<double>(counts[c]);
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      // Re-seed at the point farthest from its centroid.
      const std::size_t far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      std::copy_n(x + far * d, d, r.centroids.begin() + static_cast<std::ptrdiff_t>(c * d));
      dist[far] = 0.0;
    }
  }
  r.wcss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.wcss += squared_distance(x + i * d, r.centroids.data() + static_cast<std::size_t>(r.assignment[i]) * d, d);
  }
  return r;
}

}  // namespace

KMeansResult kmeans(const Tensor& points, std::size_t k, std::uint64_t seed, std::size_t restarts,
                    std::size_t max_iter) {
  const std::size_t n = points.rows(), d = points.cols();
  if (k < 1 || k > n) {
    throw ContractError("kmeans: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  }
  if (restarts < 1) throw ContractError("kmeans: restarts must be at least 1");
  Rng rng(seed);
  const double* x = points.data().data();
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    KMeansResult candidate = lloyd(x, n, d, k, max_iter, rng);
    if (candidate.wcss < best.wcss) best = std::move(candidate);
  }
  return best;
}

}  // namespace muse
