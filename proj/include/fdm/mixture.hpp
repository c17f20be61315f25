#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "fdm/subspace.hpp"

namespace fdm {

/// Forces observed on a vertex subset; values holds 3 coordinates per vertex
/// in support order.
struct ForceObservation {
  std::vector<Index> support;
  Vec values;
};

/// Sigma = diag(diagonal) + factor factor^T.
struct MixtureMoments {
  Vec mean;
  Vec diagonal;
  Mat factor;

  Mat apply(const Mat& x) const;
  Mat dense() const;
};

struct MixtureOptions {
  Index marginal_limit = 3072;  // max observed coordinates per marginal
  std::size_t cache_capacity = 256;
};

/// K force priors with categorical weights and optional per-component subspaces.
class MixtureModel {
 public:
  MixtureModel(std::vector<ForcePrior> priors, Vec weights, std::vector<Subspace> subspaces = {},
               MixtureOptions opts = {});

  Index size() const { return static_cast<Index>(priors_.size()); }
  const ForcePrior& prior(Index k) const { return priors_[static_cast<std::size_t>(k)]; }
  const Vec& weights() const { return weights_; }
  bool has_subspaces() const { return !subspaces_.empty(); }
  const Subspace& subspace(Index k) const;

  MixtureMoments moments() const;
  /// -1/2 r^T S^-1 r - 1/2 log det S + log pi_k per component, S the ridged
  /// marginal covariance on the observed coordinates. Thread-safe.
  std::vector<double> log_posterior(const ForceObservation& obs) const;
  /// Argmax of log_posterior, ties to the lowest index.
  Index select(const ForceObservation& obs) const;

 private:
  struct Marginal;
  std::shared_ptr<const Marginal> marginal(Index k, const std::vector<Index>& support) const;

  std::vector<ForcePrior> priors_;
  Vec weights_;
  std::vector<Subspace> subspaces_;
  MixtureOptions opts_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<Index, std::vector<Index>>, std::shared_ptr<const Marginal>> cache_;
};

Index argmax_lowest(const std::vector<double>& scores);

struct HysteresisOptions {
  bool enabled = true;
  double margin = 2.0;  // nats over the incumbent
  int count = 3;        // consecutive wins by the same challenger
};

/// Tracks the active component; switches only after a challenger beats the
/// incumbent by `margin` on `count` consecutive observations.
class ComponentSelector {
 public:
  explicit ComponentSelector(HysteresisOptions opts = {}, Index initial = 0) : opts_(opts), active_(initial) {}

  Index active() const { return active_; }
  /// Returns true when the active component changed.
  bool update(const std::vector<double>& scores);
  void reset(Index active);

 private:
  HysteresisOptions opts_;
  Index active_;
  Index challenger_ = -1;
  int streak_ = 0;
};

}  // namespace fdm
