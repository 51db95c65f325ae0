#include <doctest.h>

#include <set>

#include "muse/augment.hpp"
#include "muse/errors.hpp"
#include "support.hpp"

using namespace muse;

TEST_SUITE("augment") {
  TEST_CASE("p_s = 0 leaves features untouched") {
    Rng data(1), rng(2);
    const Tensor x = testing::random_tensor(data, 6, 5);
    CHECK(bitwise_equal(mask_features(x, 0.0, rng), x));
  }

  TEST_CASE("one mask is shared by every row and unmasked columns are untouched") {
    Rng data(1), rng(3);
    const Tensor x = testing::random_tensor(data, 8, 40);
    const Tensor y = mask_features(x, 0.5, rng);
    CHECK_FALSE(y.requires_grad());
    for (std::size_t c = 0; c < 40; ++c) {
      const bool masked = y(0, c) == 0.0;
      for (std::size_t r = 0; r < 8; ++r) CHECK(y(r, c) == (masked ? 0.0 : x(r, c)));
    }
  }

  TEST_CASE("same seed gives the same mask") {
    Rng a(9), b(9);
    CHECK(draw_feature_mask(100, 0.3, a) == draw_feature_mask(100, 0.3, b));
  }

  TEST_CASE("masked fraction concentrates around p_s") {
    // 3 sigma of Binomial(10^4, 0.5) / 10^4 is 0.015; the bound leaves 0.03.
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed);
      const auto m = draw_feature_mask(10000, 0.5, rng);
      double masked = 0.0;
      for (double v : m) masked += v == 0.0;
      CHECK(masked / 10000.0 >= 0.47);
      CHECK(masked / 10000.0 <= 0.53);
    }
  }

  TEST_CASE("p_c = 0 keeps every edge") {
    const Graph g = testing::synthetic_graph(50, 200, 2, 2, 1);
    Rng rng(0);
    const Graph h = drop_edges(g, 0.0, rng);
    CHECK(std::vector<Edge>(h.edges().begin(), h.edges().end()) == std::vector<Edge>(g.edges().begin(), g.edges().end()));
  }

  TEST_CASE("kept fraction concentrates around 1 - p_c") {
    const Graph g = testing::synthetic_graph(1000, 10000, 1, 2, 4);
    REQUIRE(g.n_edges() == 10000);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed);
      const double kept = static_cast<double>(drop_edges(g, 0.3, rng).n_edges()) / 10000.0;
      CHECK(kept >= 0.686);
      CHECK(kept <= 0.714);
    }
  }

  TEST_CASE("dropping never adds edges, keeps symmetry and shares node data") {
    const Graph g = testing::synthetic_graph(60, 300, 3, 3, 5);
    const std::set<Edge> original(g.edges().begin(), g.edges().end());
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      const Graph h = drop_edges(g, 0.4, rng);
      for (const auto& e : h.edges()) CHECK(original.count(e) == 1);
      const Tensor a = normalized_adjacency(h, true);
      for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t j = 0; j < 60; ++j) REQUIRE(a(i, j) == a(j, i));
      CHECK(h.features().same_storage(g.features()));
      std::size_t total = 0;
      for (auto d : h.degree()) total += d;
      CHECK(total == 2 * h.n_edges());
    }
  }

  TEST_CASE("probabilities outside [0, 1) are rejected") {
    Rng rng(0);
    CHECK_THROWS_AS(draw_feature_mask(3, 1.0, rng), ContractError);
    CHECK_THROWS_AS(draw_feature_mask(3, -0.1, rng), ContractError);
    const Graph g = testing::synthetic_graph(5, 4, 1, 1, 0);
    CHECK_THROWS_AS(drop_edges(g, 1.0, rng), ContractError);
    CHECK_THROWS_AS((AugmentConfig{0.2, 1.5, 0}.validate()), ContractError);
  }
}
