#pragma once

#include <cstdint>
#include <functional>

#include "fdm/common.hpp"

namespace fdm {

/// Applies a symmetric positive semidefinite operator to a block of columns.
using BlockOperator = std::function<Mat(const Mat&)>;

struct SubspaceIterationOptions {
  double tolerance = 1e-10;  // residual relative to each Ritz value
  int max_iterations = 300;
  int extra_block = 8;       // block size is m + extra_block (capped at the dimension)
  std::uint64_t seed = 0x5eed;
};

struct EigenResult {
  Mat vectors;  // dim x m, Euclidean orthonormal
  Vec values;   // descending
  int iterations = 0;
  double max_relative_residual = 0.0;
};

/// Top-m eigenpairs of a symmetric PSD operator by block subspace iteration
/// with Rayleigh-Ritz. `mask` (optional, length dim) zeroes coordinates
/// outside the operator's range in the start block. Throws NumericalError
/// on non-convergence or when m exceeds the numerical rank.
EigenResult top_eigenpairs(const BlockOperator& op, Index dim, Index m, const SubspaceIterationOptions& opts,
                           const Vec* mask = nullptr);

}  // namespace fdm
