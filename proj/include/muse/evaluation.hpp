#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "muse/graph.hpp"
#include "muse/tensor.hpp"

namespace muse {

// ---------------------------------------------------------------------------
// Linear probe

struct ProbeConfig {
  std::size_t epochs = 300;
  double lr = 0.01;
  double weight_decay = 0.0;
};

struct LinearProbe {
  Tensor weight;  // F' x C
  Tensor bias;    // 1 x C
};

// Multinomial logistic regression fit on the training rows with Adam,
// returning the parameters of the epoch with the best validation accuracy.
// Only train and validation labels are visible here.
LinearProbe fit_linear_probe(const Tensor& embeddings, std::span<const std::size_t> train_idx,
                             std::span<const int> train_labels, std::span<const std::size_t> val_idx,
                             std::span<const int> val_labels, std::size_t n_classes, const ProbeConfig& cfg = {});

std::vector<int> predict(const LinearProbe& probe, const Tensor& embeddings, std::span<const std::size_t> idx);
double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct ClassificationResult {
  std::vector<double> accuracies;  // one per split
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

ClassificationResult linear_probe(const Tensor& embeddings, std::span<const int> labels, std::size_t n_classes,
                                  std::span<const Split> splits, const ProbeConfig& cfg = {});

// ---------------------------------------------------------------------------
// Clustering

struct KMeansResult {
  std::vector<int> assignment;
  std::vector<double> centroids;  // k x dim, row-major
  double wcss = 0.0;
  std::size_t iterations = 0;
  // Within-cluster sum of squares after each assignment step of the winning restart.
  std::vector<double> wcss_history;
};

// Lloyd's algorithm with k-means++ seeding; best of `restarts` by WCSS.
// An empty cluster is re-seeded at the point farthest from its centroid.
KMeansResult kmeans(const Tensor& points, std::size_t k, std::uint64_t seed, std::size_t restarts = 10,
                    std::size_t max_iter = 300);

// Best agreement over one-to-one cluster -> class mappings (Hungarian), / N.
double clustering_accuracy(std::span<const int> pred, std::span<const int> truth);
// I(P;T) / sqrt(H(P) H(T)), natural logs.
double nmi(std::span<const int> pred, std::span<const int> truth);
double ari(std::span<const int> pred, std::span<const int> truth);

struct ClusteringResult {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  std::vector<int> assignment;
};

// k-means with k = number of classes over all nodes, scored against labels.
ClusteringResult evaluate_clustering(const Tensor& embeddings, std::span<const int> labels, std::size_t n_classes,
                                     std::uint64_t seed);

// Minimum-cost perfect assignment on a square cost matrix; returns the
// column chosen for each row.
std::vector<std::size_t> hungarian_min_cost(const std::vector<std::vector<double>>& cost);

// Mean and population standard deviation.
void mean_std(std::span<const double> values, double& mean, double& std);

}  // namespace muse
