#include "fdm/subspace.hpp"

#include <Eigen/SVD>

#include <array>
#include <cmath>

namespace fdm {

namespace {

constexpr std::array<std::pair<BuildPath, const char*>, 7> kPathNames{{
    {BuildPath::diagonal, "diagonal-GEVP"},
    {BuildPath::lowrank, "lowrank-SVD"},
    {BuildPath::greens, "greens"},
    {BuildPath::lma_reference, "lma-reference"},
    {BuildPath::skinning, "skinning"},
    {BuildPath::dense_oracle, "dense-oracle"},
    {BuildPath::pca, "pca"},
}};

void fix_signs(Mat& x, const Vec& scale) {
  for (Index c = 0; c < x.cols(); ++c) {
    Index best = 0;
    double best_abs = -1.0;
    for (Index i = 0; i < x.rows(); ++i) {
      const double a = std::abs(x(i, c) / scale(i));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (x(best, c) < 0.0) x.col(c) = -x.col(c);
  }
}

// Rotates an orthonormal block onto the projections of ascending coordinate axes.
void canonicalize_cluster(Eigen::Ref<Mat> q) {
  const Index s = q.cols();
  const double max_row = q.rowwise().norm().maxCoeff();
  Mat accepted(s, s);
  Index count = 0;
  for (Index r = 0; r < q.rows() && count < s; ++r) {
    Vec w = q.row(r).transpose();
    const double norm = w.norm();
    if (!(norm > 1e-6 * max_row)) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (Index a = 0; a < count; ++a) w -= accepted.col(a).dot(w) * accepted.col(a);
    const double residual = w.norm();
    if (residual > 1e-3 * norm) accepted.col(count++) = w / residual;
  }
  if (count == s) q = q * accepted;
}

Vec vertex_sqrt_mass(const SystemOperators& ops) {
  const Index n = ops.dofs() / 3;
  Vec out(n);
  for (Index v = 0; v < n; ++v) out(v) = ops.sqrt_mass()(3 * v);
  return out;
}

Vec vertex_free_mask(const SystemOperators& ops) {
  const Index n = ops.dofs() / 3;
  Vec out(n);
  for (Index v = 0; v < n; ++v) out(v) = ops.free_mask()(3 * v);
  return out;
}

struct ThinSvd {
  Mat u;
  Vec s;
};

ThinSvd thin_svd(const Mat& k, Index m, const char* what) {
  if (k.cols() == 0) throw InputError(std::string(what) + ": no force columns");
  Eigen::BDCSVD<Mat> svd(k, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  if (!s.allFinite()) throw NumericalError(std::string(what) + ": SVD failed");
  if (!(s(0) > 0.0)) throw InputError(std::string(what) + ": prior is identically zero on the free coordinates");
  if (s(m - 1) <= 1e-10 * s(0))
    throw NumericalError(std::string(what) + ": requested " + std::to_string(m) +
                         " modes exceed the numerical rank of the response");
  return {svd.matrixU().leftCols(m), s.head(m)};
}

}  // namespace

std::string to_string(BuildPath path) {
  for (const auto& [p, name] : kPathNames)
    if (p == path) return name;
  return "unknown";
}

BuildPath parse_build_path(std::string_view name) {
  for (const auto& [p, n] : kPathNames)
    if (name == n) return p;
  throw InputError("unknown build path: " + std::string(name));
}

DisplacementDistribution::DisplacementDistribution(const SystemOperators& ops, ForcePrior prior)
    : ops_(&ops), prior_(prior.masked(ops.free_mask())), mean_(ops.solve(prior_.mean())) {
  if (prior_.dofs() != ops.dofs()) throw InputError("prior size does not match the operators");
}

Mat DisplacementDistribution::apply_covariance(const Mat& x) const {
  return ops_->solve_columns(prior_.apply_covariance(ops_->solve_columns(x)));
}

Mat DisplacementDistribution::covariance_factor() const {
  if (prior_.is_diagonal()) throw InputError("covariance factor requires a low-rank prior");
  return ops_->solve_columns(prior_.lowrank().factor);
}

DisplacementDistribution propagate(const SystemOperators& ops, const ForcePrior& prior) {
  if (prior.dofs() != ops.dofs()) throw InputError("prior size does not match the operators");
  return DisplacementDistribution(ops, prior);
}

void canonicalize_basis(Mat& x, const Vec& values, const Vec& scale) {
  Index i = 0;
  while (i < x.cols()) {
    Index j = i + 1;
    while (j < x.cols() &&
           std::abs(values(j - 1) - values(j)) <= 1e-8 * std::max(std::abs(values(j - 1)), 1e-300))
      ++j;
    if (j - i > 1) canonicalize_cluster(x.middleCols(i, j - i));
    i = j;
  }
  fix_signs(x, scale);
}

Subspace build_diagonal(const SystemOperators& ops, const ForcePrior& prior, Index m, const BuildOptions& opts) {
  if (!prior.is_diagonal()) throw InputError("build_diagonal requires a diagonal prior");
  const DisplacementDistribution dist = propagate(ops, prior);
  const Vec& var = dist.prior().diagonal().variances;
  if (!(var.maxCoeff() > 0.0)) throw InputError("prior has zero variance on every free coordinate");
  const Vec& n = ops.sqrt_mass();
  const BlockOperator op = [&](const Mat& x) -> Mat {
    Mat y = ops.solve_columns(n.asDiagonal() * x);
    y = var.asDiagonal() * y;
    return n.asDiagonal() * ops.solve_columns(y);
  };
  EigenResult eig = top_eigenpairs(op, ops.dofs(), m, opts.eigen, &ops.free_mask());
  canonicalize_basis(eig.vectors, eig.values, n);

  Subspace sub;
  sub.basis = n.cwiseInverse().asDiagonal() * eig.vectors;
  sub.eigenvalues = eig.values;
  sub.mean = opts.keep_mean ? dist.mean() : Vec::Zero(ops.dofs());
  sub.prior_label = prior.label();
  sub.path = BuildPath::diagonal;
  return sub;
}

Subspace build_lowrank(const SystemOperators& ops, const ForcePrior& prior, Index m, const BuildOptions& opts) {
  if (prior.is_diagonal()) throw InputError("build_lowrank requires a low-rank prior");
  if (m < 1) throw InputError("requested mode count must be at least 1");
  const Index r = prior.lowrank().factor.cols();
  if (m > r)
    throw InputError("requested " + std::to_string(m) + " modes but the prior has rank " + std::to_string(r));
  const DisplacementDistribution dist = propagate(ops, prior);
  const Vec& n = ops.sqrt_mass();
  ThinSvd svd = thin_svd(n.asDiagonal() * dist.covariance_factor(), m, "build_lowrank");
  Vec values = svd.s.cwiseAbs2();
  canonicalize_basis(svd.u, values, n);

  Subspace sub;
  sub.basis = n.cwiseInverse().asDiagonal() * svd.u;
  sub.eigenvalues = std::move(values);
  sub.mean = opts.keep_mean ? dist.mean() : Vec::Zero(ops.dofs());
  sub.prior_label = prior.label();
  sub.path = BuildPath::lowrank;
  return sub;
}

Subspace build_subspace(const SystemOperators& ops, const ForcePrior& prior, Index m, const BuildOptions& opts) {
  return prior.is_diagonal() ? build_diagonal(ops, prior, m, opts) : build_lowrank(ops, prior, m, opts);
}

Subspace greens_subspace(const SystemOperators& ops, const Mat& forces) {
  if (forces.rows() != ops.dofs()) throw InputError("force matrix rows do not match the operators");
  const Index m = forces.cols();
  const Vec& n = ops.sqrt_mass();
  const Mat masked = ops.free_mask().asDiagonal() * forces;
  ThinSvd svd = thin_svd(n.asDiagonal() * ops.solve_columns(masked), m, "greens_subspace");
  Vec values = svd.s.cwiseAbs2();
  canonicalize_basis(svd.u, values, n);

  Subspace sub;
  sub.basis = n.cwiseInverse().asDiagonal() * svd.u;
  sub.eigenvalues = std::move(values);
  sub.mean = Vec::Zero(ops.dofs());
  sub.prior_label = "greens";
  sub.path = BuildPath::greens;
  return sub;
}

SkinningWeights scalarize_skinning(const SystemOperators& ops, const ForcePrior& prior, Index m,
                                   const BuildOptions& opts) {
  if (prior.dofs() != ops.dofs()) throw InputError("prior size does not match the operators");
  const Index nv = ops.dofs() / 3;
  const Vec n_phi = vertex_sqrt_mass(ops);
  const Vec free = vertex_free_mask(ops);
  const ForcePrior masked = prior.masked(ops.free_mask());
  SkinningWeights out;

  if (masked.is_diagonal()) {
    std::vector<Eigen::Triplet<double>> trip;
    const SpMat& h = ops.hessian();
    for (Index col = 0; col < h.outerSize(); ++col)
      for (SpMat::InnerIterator it(h, col); it; ++it)
        if (it.row() % 3 == it.col() % 3) trip.emplace_back(it.row() / 3, it.col() / 3, it.value());
    SpMat h_phi(nv, nv);
    h_phi.setFromTriplets(trip.begin(), trip.end());
    Cholesky chol(h_phi);
    if (chol.info() != Eigen::Success) throw NumericalError("scalarized Hessian factorization failed");

    const Vec& var = masked.diagonal().variances;
    Vec var_phi(nv);
    for (Index v = 0; v < nv; ++v) var_phi(v) = var.segment<3>(3 * v).mean();
    if (!(var_phi.maxCoeff() > 0.0)) throw InputError("prior has zero variance on every free coordinate");
    const BlockOperator op = [&](const Mat& x) -> Mat {
      Mat y = chol.solve(n_phi.asDiagonal() * x);
      y = var_phi.asDiagonal() * y;
      return n_phi.asDiagonal() * Mat(chol.solve(y));
    };
    EigenResult eig = top_eigenpairs(op, nv, m, opts.eigen, &free);
    canonicalize_basis(eig.vectors, eig.values, n_phi);
    out.weights = n_phi.cwiseInverse().asDiagonal() * eig.vectors;
    out.eigenvalues = eig.values;
    return out;
  }

  const Index r = masked.lowrank().factor.cols();
  if (m < 1 || m > r)
    throw InputError("requested " + std::to_string(m) + " weights but the prior has rank " + std::to_string(r));
  const Mat g = ops.sqrt_mass().asDiagonal() * ops.solve_columns(masked.lowrank().factor);
  Mat k_phi = Mat::Zero(nv, r);
  for (Index v = 0; v < nv; ++v) k_phi.row(v) = g.row(3 * v) + g.row(3 * v + 1) + g.row(3 * v + 2);
  ThinSvd svd = thin_svd(k_phi, m, "scalarize_skinning");
  Vec values = svd.s.cwiseAbs2();
  canonicalize_basis(svd.u, values, n_phi);
  out.weights = n_phi.cwiseInverse().asDiagonal() * svd.u;
  out.eigenvalues = std::move(values);
  return out;
}

Subspace lbs_basis(const TetMesh& mesh, const SystemOperators& ops, const SkinningWeights& weights) {
  const Index nv = mesh.num_vertices();
  if (weights.weights.rows() != nv || ops.dofs() != mesh.dofs())
    throw InputError("skinning weights do not match the mesh");
  const Vec& n = ops.sqrt_mass();
  const Index k = weights.weights.cols();
  Mat q(mesh.dofs(), 12 * k);
  std::vector<double> values;
  Index count = 0;
  Vec col(mesh.dofs());
  for (Index w = 0; w < k; ++w) {
    for (int c = 0; c < 4; ++c) {
      for (int d = 0; d < 3; ++d) {
        col.setZero();
        for (Index v = 0; v < nv; ++v) {
          const double coord = c < 3 ? mesh.vertices()(v, c) : 1.0;
          col(3 * v + d) = weights.weights(v, w) * coord;
        }
        col = ops.free_mask().cwiseProduct(n.cwiseProduct(col));
        const double norm = col.norm();
        if (!(norm > 0.0)) continue;
        for (int pass = 0; pass < 2; ++pass)
          for (Index a = 0; a < count; ++a) col -= q.col(a).dot(col) * q.col(a);
        const double residual = col.norm();
        if (residual <= 1e-10 * norm) continue;
        q.col(count++) = col / residual;
        values.push_back(weights.eigenvalues(w));
      }
    }
  }
  if (count == 0) throw InputError("skinning weights produce an empty basis");
  Mat x = q.leftCols(count);
  fix_signs(x, n);

  Subspace sub;
  sub.basis = n.cwiseInverse().asDiagonal() * x;
  sub.eigenvalues = Eigen::Map<const Vec>(values.data(), count);
  sub.mean = Vec::Zero(mesh.dofs());
  sub.prior_label = "skinning";
  sub.path = BuildPath::skinning;
  return sub;
}

Vec reconstruct(const Subspace& sub, const Vec& z) {
  if (z.size() != sub.modes()) throw InputError("reduced coordinate size does not match the subspace");
  return sub.basis * z + sub.mean;
}

Vec project(const Subspace& sub, const Vec& mass, const Vec& u) {
  if (u.size() != sub.dofs() || mass.size() != sub.dofs()) throw InputError("displacement size does not match the subspace");
  return sub.basis.transpose() * mass.cwiseProduct(u - sub.mean);
}

double mass_orthonormality_error(const Mat& basis, const Vec& mass) {
  const Mat g = basis.transpose() * mass.asDiagonal() * basis;
  return (g - Mat::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

}  // namespace fdm
