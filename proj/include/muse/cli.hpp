#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "muse/graph.hpp"

namespace muse::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kNonFiniteLoss = 3,
  kEvalError = 4,
};

// Entry point of the `muse` executable: train | eval | analyze | embed.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Uniform bins over [-1, 1]; isolated nodes are not counted and a value of
// exactly 1 lands in the last bin.
std::vector<std::size_t> similarity_histogram(const NeighborhoodSimilarity& sim, std::size_t bins = 50);

}  // namespace muse::cli
