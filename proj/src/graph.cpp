#include "muse/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "muse/errors.hpp"
#include "muse/random.hpp"

namespace muse {

// ---------------------------------------------------------------------------
// Graph

Graph Graph::build(std::string name, std::size_t n_nodes,
                   std::span<const std::pair<std::size_t, std::size_t>> edges, Tensor features,
                   std::optional<std::vector<int>> labels, std::size_t n_classes, EdgeCleanup* cleanup) {
  if (features.rows() != n_nodes) {
    throw FormatError("feature matrix has " + std::to_string(features.rows()) + " rows for " +
                      std::to_string(n_nodes) + " nodes");
  }
  if (n_nodes > UINT32_MAX) throw FormatError("graph too large");
  EdgeCleanup local;
  std::vector<Edge> canon;
  canon.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    if (a >= n_nodes || b >= n_nodes) {
      throw FormatError("edge (" + std::to_string(a) + ", " + std::to_string(b) + ") references a node >= " +
                        std::to_string(n_nodes));
    }
    if (a == b) {
      ++local.self_loops;
      continue;
    }
    canon.push_back({static_cast<std::uint32_t>(std::min(a, b)), static_cast<std::uint32_t>(std::max(a, b))});
  }
  std::sort(canon.begin(), canon.end());
  const auto last = std::unique(canon.begin(), canon.end());
  local.duplicates = static_cast<std::size_t>(canon.end() - last);
  canon.erase(last, canon.end());

  auto impl = std::make_shared<Impl>();
  impl->name = std::move(name);
  impl->n_nodes = n_nodes;
  impl->n_classes = n_classes;
  impl->edges = std::move(canon);
  impl->features = features.detach();
  if (labels) {
    if (labels->size() != n_nodes) {
      throw FormatError("label count " + std::to_string(labels->size()) + " does not match " +
                        std::to_string(n_nodes) + " nodes");
    }
    for (int y : *labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
        throw FormatError("label " + std::to_string(y) + " outside [0, " + std::to_string(n_classes) + ")");
      }
    }
    impl->labels = std::make_shared<const std::vector<int>>(std::move(*labels));
  }
  if (cleanup) *cleanup = local;
  Graph g;
  g.impl_ = finish(std::move(impl));
  return g;
}

std::shared_ptr<Graph::Impl> Graph::finish(std::shared_ptr<Impl> impl) {
  const std::size_t n = impl->n_nodes;
  impl->degree.assign(n, 0);
  for (const auto& e : impl->edges) {
    ++impl->degree[e.u];
    ++impl->degree[e.v];
  }
  impl->nbr_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) impl->nbr_ptr[i + 1] = impl->nbr_ptr[i] + impl->degree[i];
  impl->nbr_idx.resize(impl->nbr_ptr[n]);
  std::vector<std::size_t> cursor(impl->nbr_ptr.begin(), impl->nbr_ptr.end() - 1);
  for (const auto& e : impl->edges) {
    impl->nbr_idx[cursor[e.u]++] = e.v;
    impl->nbr_idx[cursor[e.v]++] = e.u;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(impl->nbr_idx.begin() + static_cast<std::ptrdiff_t>(impl->nbr_ptr[i]),
              impl->nbr_idx.begin() + static_cast<std::ptrdiff_t>(impl->nbr_ptr[i + 1]));
  }
  return impl;
}

Graph Graph::with_edges(std::vector<Edge> edges) const {
  auto impl = std::make_shared<Impl>();
  impl->name = impl_->name;
  impl->n_nodes = impl_->n_nodes;
  impl->n_classes = impl_->n_classes;
  impl->features = impl_->features;
  impl->labels = impl_->labels;
  impl->edges = std::move(edges);
  Graph g;
  g.impl_ = finish(std::move(impl));
  return g;
}

std::span<const int> Graph::labels() const {
  if (!impl_->labels) throw ContractError("graph '" + impl_->name + "' has no labels");
  return *impl_->labels;
}

std::span<const std::uint32_t> Graph::neighbors(std::size_t node) const {
  return {impl_->nbr_idx.data() + impl_->nbr_ptr[node], impl_->nbr_ptr[node + 1] - impl_->nbr_ptr[node]};
}

// ---------------------------------------------------------------------------
// Dataset directory I/O

namespace {

std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw LoadError("cannot open " + p.string());
  return in;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view token, const std::filesystem::path& file, std::size_t line) {
  token = trim(token);
  T value{};
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError(file.filename().string() + ":" + std::to_string(line) + ": cannot parse '" +
                      std::string(token) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

LoadedGraph load_graph_with_report(const std::filesystem::path& dir) {
  for (const char* required : {"meta.json", "edges.tsv", "features.csv"}) {
    if (!std::filesystem::exists(dir / required)) throw LoadError("missing " + (dir / required).string());
  }
  nlohmann::json meta;
  try {
    auto in = open_input(dir / "meta.json");
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("meta.json: " + std::string(e.what()));
  }
  std::size_t n_nodes = 0, n_features = 0, n_classes = 0;
  std::string name;
  try {
    name = meta.at("name").get<std::string>();
    n_nodes = meta.at("n_nodes").get<std::size_t>();
    n_features = meta.at("n_features").get<std::size_t>();
    n_classes = meta.at("n_classes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("meta.json: " + std::string(e.what()));
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  {
    const auto path = dir / "edges.tsv";
    auto in = open_input(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view sv = trim(line);
      if (sv.empty()) continue;
      const auto sep = sv.find_first_of("\t ");
      if (sep == std::string_view::npos) {
        throw FormatError("edges.tsv:" + std::to_string(lineno) + ": expected two node indices");
      }
      const auto a = parse_number<std::size_t>(sv.substr(0, sep), path, lineno);
      const auto b = parse_number<std::size_t>(sv.substr(sep + 1), path, lineno);
      edges.emplace_back(a, b);
    }
  }

  std::vector<double> feats;
  feats.reserve(n_nodes * n_features);
  {
    const auto path = dir / "features.csv";
    auto in = open_input(path);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      std::string_view sv = trim(line);
      if (sv.empty()) continue;
      ++rows;
      if (rows > n_nodes) {
        throw FormatError("features.csv has more than " + std::to_string(n_nodes) + " rows");
      }
      std::size_t count = 0;
      while (true) {
        const auto comma = sv.find(',');
        feats.push_back(parse_number<double>(sv.substr(0, comma), path, rows));
        ++count;
        if (comma == std::string_view::npos) break;
        sv.remove_prefix(comma + 1);
      }
      if (count != n_features) {
        throw FormatError("features.csv:" + std::to_string(rows) + ": " + std::to_string(count) +
                          " values, expected " + std::to_string(n_features));
      }
    }
    if (rows != n_nodes) {
      throw FormatError("features.csv has " + std::to_string(rows) + " rows, expected " + std::to_string(n_nodes));
    }
  }

  std::optional<std::vector<int>> labels;
  if (std::filesystem::exists(dir / "labels.txt")) {
    const auto path = dir / "labels.txt";
    auto in = open_input(path);
    std::string line;
    std::size_t lineno = 0;
    labels.emplace();
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view sv = trim(line);
      if (sv.empty()) continue;
      labels->push_back(parse_number<int>(sv, path, lineno));
    }
  }

  LoadedGraph out;
  out.graph = Graph::build(std::move(name), n_nodes, edges, Tensor::from(n_nodes, n_features, std::move(feats)),
                           std::move(labels), n_classes, &out.cleanup);
  return out;
}

Graph load_graph(const std::filesystem::path& dir) {
  auto loaded = load_graph_with_report(dir);
  if (loaded.cleanup.self_loops > 0 || loaded.cleanup.duplicates > 0) {
    std::cerr << "warning: " << dir.string() << ": dropped " << loaded.cleanup.self_loops << " self-loop and "
              << loaded.cleanup.duplicates << " duplicate edge records\n";
  }
  return loaded.graph;
}

void write_graph(const Graph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    nlohmann::json meta = {{"name", g.name()},
                           {"n_nodes", g.n_nodes()},
                           {"n_features", g.n_features()},
                           {"n_classes", g.n_classes()}};
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "edges.tsv");
    for (const auto& e : g.edges()) out << e.u << '\t' << e.v << '\n';
  }
  {
    std::ofstream out(dir / "features.csv");
    const auto x = g.features().data();
    const std::size_t f = g.n_features();
    for (std::size_t i = 0; i < g.n_nodes(); ++i) {
      for (std::size_t j = 0; j < f; ++j) {
        if (j) out << ',';
        out << format_double(x[i * f + j]);
      }
      out << '\n';
    }
  }
  if (g.has_labels()) {
    std::ofstream out(dir / "labels.txt");
    for (int y : g.labels()) out << y << '\n';
  } else {
    std::filesystem::remove(dir / "labels.txt");
  }
}

// ---------------------------------------------------------------------------
// Normalised adjacency

SparseMatrix normalized_adjacency_sparse(const Graph& g, bool add_self_loops) {
  const std::size_t n = g.n_nodes();
  const std::size_t loop = add_self_loops ? 1 : 0;
  // 1 / sqrt(d_i d_j) in one rounding, so entries like 1/2 come out exact.
  auto weight = [&](std::size_t i, std::size_t j) {
    const double di = static_cast<double>(g.degree()[i] + loop);
    const double dj = static_cast<double>(g.degree()[j] + loop);
    return 1.0 / std::sqrt(di * dj);
  };
  kernels::CsrMatrix m;
  m.rows = m.cols = n;
  m.row_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) m.row_ptr[i + 1] = m.row_ptr[i] + g.degree()[i] + loop;
  m.col_idx.reserve(m.row_ptr[n]);
  m.values.reserve(m.row_ptr[n]);
  for (std::size_t i = 0; i < n; ++i) {
    bool loop_written = !add_self_loops;
    for (std::uint32_t j : g.neighbors(i)) {
      if (!loop_written && j > i) {
        m.col_idx.push_back(static_cast<std::uint32_t>(i));
        m.values.push_back(weight(i, i));
        loop_written = true;
      }
      m.col_idx.push_back(j);
      m.values.push_back(weight(i, j));
    }
    if (!loop_written) {
      m.col_idx.push_back(static_cast<std::uint32_t>(i));
      m.values.push_back(weight(i, i));
    }
  }
  return SparseMatrix(std::move(m));
}

Tensor normalized_adjacency(const Graph& g, bool add_self_loops) {
  return normalized_adjacency_sparse(g, add_self_loops).to_dense();
}

// ---------------------------------------------------------------------------
// Splits

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatio& ratio) {
  const std::array<double, 3> r{ratio.train, ratio.val, ratio.test};
  for (double x : r) {
    if (!(x >= 0.0)) throw ContractError("split ratios must be non-negative");
  }
  if (std::fabs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ContractError("split ratios must sum to 1");
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = r[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[k] = exact - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

std::vector<Split> make_splits(const Graph& g, const SplitRatio& ratio, std::size_t n_splits, std::uint64_t seed) {
  if (!g.has_labels()) throw ContractError("make_splits: graph '" + g.name() + "' has no labels");
  const auto labels = g.labels();
  const std::size_t n = g.n_nodes();
  const auto sizes = split_sizes(n, ratio);
  const std::set<int> classes(labels.begin(), labels.end());

  std::vector<Split> splits;
  splits.reserve(n_splits);
  for (std::size_t s = 0; s < n_splits; ++s) {
    const std::uint64_t split_seed = seed + s;
    Rng rng(split_seed);
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);

      std::set<int> seen;
      for (std::size_t i = 0; i < sizes[0]; ++i) seen.insert(labels[perm[i]]);
      if (seen != classes) continue;

      Split split;
      split.seed = split_seed;
      const auto b0 = perm.begin();
      const auto b1 = b0 + static_cast<std::ptrdiff_t>(sizes[0]);
      const auto b2 = b1 + static_cast<std::ptrdiff_t>(sizes[1]);
      split.train.assign(b0, b1);
      split.val.assign(b1, b2);
      split.test.assign(b2, perm.end());
      std::sort(split.train.begin(), split.train.end());
      std::sort(split.val.begin(), split.val.end());
      std::sort(split.test.begin(), split.test.end());
      splits.push_back(std::move(split));
      ok = true;
    }
    if (!ok) {
      throw SplitError("could not draw a split with every class in train after 100 attempts (split " +
                       std::to_string(s) + ")");
    }
  }
  return splits;
}

// ---------------------------------------------------------------------------

NeighborhoodSimilarity neighborhood_similarity(const Graph& g) {
  const std::size_t n = g.n_nodes(), f = g.n_features();
  const auto x = g.features().data();
  NeighborhoodSimilarity out;
  out.values.assign(n, 0.0);
  out.isolated.assign(n, false);
  std::vector<double> mean(f);
  for (std::size_t i = 0; i < n; ++i) {
    const auto nbrs = g.neighbors(i);
    if (nbrs.empty()) {
      out.isolated[i] = true;
      continue;
    }
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::uint32_t j : nbrs) {
      for (std::size_t c = 0; c < f; ++c) mean[c] += x[j * f + c];
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t c = 0; c < f; ++c) {
      mean[c] /= static_cast<double>(nbrs.size());
      dot += x[i * f + c] * mean[c];
      na += x[i * f + c] * x[i * f + c];
      nb += mean[c] * mean[c];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    out.values[i] = (na < kCosineEps || nb < kCosineEps) ? 0.0 : dot / (na * nb);
  }
  return out;
}

}  // namespace muse
