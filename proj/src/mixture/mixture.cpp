#include "fdm/mixture.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <set>

namespace fdm {

struct MixtureModel::Marginal {
  Vec mean;
  Eigen::LLT<Mat> llt;
  double log_det = 0.0;
};

Mat MixtureMoments::apply(const Mat& x) const {
  return diagonal.asDiagonal() * x + factor * (factor.transpose() * x);
}

Mat MixtureMoments::dense() const {
  Mat out = factor * factor.transpose();
  out.diagonal() += diagonal;
  return out;
}

MixtureModel::MixtureModel(std::vector<ForcePrior> priors, Vec weights, std::vector<Subspace> subspaces,
                           MixtureOptions opts)
    : priors_(std::move(priors)), weights_(std::move(weights)), subspaces_(std::move(subspaces)), opts_(opts) {
  if (priors_.empty()) throw InputError("mixture needs at least one component");
  if (weights_.size() != size()) throw InputError("mixture weights must have one entry per component");
  if ((weights_.array() < 0.0).any() || !weights_.allFinite()) throw InputError("mixture weights must be nonnegative");
  const double total = weights_.sum();
  if (!(total > 0.0)) throw InputError("mixture weights must not all be zero");
  weights_ /= total;
  for (const auto& p : priors_)
    if (p.dofs() != priors_.front().dofs()) throw InputError("mixture components have different sizes");
  if (!subspaces_.empty() && static_cast<Index>(subspaces_.size()) != size())
    throw InputError("mixture needs one subspace per component");
}

const Subspace& MixtureModel::subspace(Index k) const {
  if (subspaces_.empty()) throw InputError("mixture has no subspaces");
  return subspaces_.at(static_cast<std::size_t>(k));
}

MixtureMoments MixtureModel::moments() const {
  const Index dofs = priors_.front().dofs();
  MixtureMoments out;
  out.mean = Vec::Zero(dofs);
  for (Index k = 0; k < size(); ++k) out.mean += weights_(k) * prior(k).mean();
  out.diagonal = Vec::Zero(dofs);
  std::vector<Mat> blocks;
  Index cols = 0;
  for (Index k = 0; k < size(); ++k) {
    const double w = weights_(k);
    if (w == 0.0) continue;
    if (prior(k).is_diagonal()) {
      out.diagonal += w * prior(k).diagonal().variances;
    } else {
      blocks.push_back(std::sqrt(w) * prior(k).lowrank().factor);
      cols += blocks.back().cols();
    }
    const Vec d = prior(k).mean() - out.mean;
    if (d.squaredNorm() > 0.0) {
      blocks.push_back(std::sqrt(w) * d);
      cols += 1;
    }
  }
  out.factor.resize(dofs, cols);
  Index c = 0;
  for (const auto& b : blocks) {
    out.factor.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return out;
}

std::shared_ptr<const MixtureModel::Marginal> MixtureModel::marginal(Index k, const std::vector<Index>& support) const {
  const auto key = std::make_pair(k, support);
  {
    std::lock_guard lock(cache_mutex_);
    const auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const ForcePrior& p = prior(k);
  const Index s = 3 * static_cast<Index>(support.size());
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(s));
  for (Index v : support)
    for (int c = 0; c < 3; ++c) idx.push_back(3 * v + c);

  auto m = std::make_shared<Marginal>();
  m->mean.resize(s);
  Mat cov = Mat::Zero(s, s);
  for (Index i = 0; i < s; ++i) m->mean(i) = p.mean()(idx[static_cast<std::size_t>(i)]);
  if (p.is_diagonal()) {
    for (Index i = 0; i < s; ++i) cov(i, i) = p.diagonal().variances(idx[static_cast<std::size_t>(i)]);
  } else {
    const Mat& l = p.lowrank().factor;
    Mat ls(s, l.cols());
    for (Index i = 0; i < s; ++i) ls.row(i) = l.row(idx[static_cast<std::size_t>(i)]);
    cov = ls * ls.transpose();
  }
  double trace = cov.trace() / static_cast<double>(s);
  if (!(trace > 0.0)) trace = p.covariance_trace() / static_cast<double>(p.dofs());
  if (!(trace > 0.0)) throw NumericalError("mixture component " + std::to_string(k) + " has a zero covariance");
  cov.diagonal().array() += 1e-8 * trace;
  m->llt.compute(cov);
  if (m->llt.info() != Eigen::Success)
    throw NumericalError("marginal covariance of component " + std::to_string(k) + " is singular after ridge");
  m->log_det = 2.0 * m->llt.matrixLLT().diagonal().array().log().sum();

  std::lock_guard lock(cache_mutex_);
  if (cache_.size() >= opts_.cache_capacity) cache_.clear();
  cache_.emplace(key, m);
  return m;
}

std::vector<double> MixtureModel::log_posterior(const ForceObservation& obs) const {
  if (obs.support.empty()) throw InputError("observation support is empty");
  const Index s = 3 * static_cast<Index>(obs.support.size());
  if (obs.values.size() != s) throw InputError("observation values must have 3 entries per support vertex");
  if (!obs.values.allFinite()) throw InputError("observation values must be finite");
  if (s > opts_.marginal_limit)
    throw InputError("observation support of " + std::to_string(s) + " coordinates exceeds the marginal limit " +
                     std::to_string(opts_.marginal_limit));
  const Index nv = priors_.front().dofs() / 3;
  std::set<Index> seen;
  for (Index v : obs.support)
    if (v < 0 || v >= nv || !seen.insert(v).second) throw InputError("observation support has an invalid vertex");

  std::vector<double> scores(static_cast<std::size_t>(size()));
  for (Index k = 0; k < size(); ++k) {
    if (weights_(k) == 0.0) {
      scores[static_cast<std::size_t>(k)] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const auto m = marginal(k, obs.support);
    const Vec r = obs.values - m->mean;
    const Vec y = m->llt.matrixL().solve(r);
    scores[static_cast<std::size_t>(k)] = -0.5 * y.squaredNorm() - 0.5 * m->log_det + std::log(weights_(k));
  }
  return scores;
}

Index MixtureModel::select(const ForceObservation& obs) const { return argmax_lowest(log_posterior(obs)); }

Index argmax_lowest(const std::vector<double>& scores) {
  if (scores.empty()) throw InputError("no scores to compare");
  Index best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[static_cast<std::size_t>(best)]) best = static_cast<Index>(k);
  return best;
}

bool ComponentSelector::update(const std::vector<double>& scores) {
  const Index best = argmax_lowest(scores);
  if (active_ < 0 || active_ >= static_cast<Index>(scores.size())) {
    reset(best);
    return true;
  }
  if (best == active_) {
    challenger_ = -1;
    streak_ = 0;
    return false;
  }
  if (!opts_.enabled) {
    reset(best);
    return true;
  }
  const double lead = scores[static_cast<std::size_t>(best)] - scores[static_cast<std::size_t>(active_)];
  if (!(lead > opts_.margin)) {
    challenger_ = -1;
    streak_ = 0;
    return false;
  }
  if (best == challenger_) {
    ++streak_;
  } else {
    challenger_ = best;
    streak_ = 1;
  }
  if (streak_ >= opts_.count) {
    reset(best);
    return true;
  }
  return false;
}

void ComponentSelector::reset(Index active) {
  active_ = active;
  challenger_ = -1;
  streak_ = 0;
}

}  // namespace fdm
