#include "fdm/eigensolver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <random>
#include <sstream>

namespace fdm {

namespace {

Mat orthonormalize(const Mat& z) {
  Eigen::HouseholderQR<Mat> qr(z);
  return qr.householderQ() * Mat::Identity(z.rows(), z.cols());
}

}  // namespace

EigenResult top_eigenpairs(const BlockOperator& op, Index dim, Index m, const SubspaceIterationOptions& opts,
                           const Vec* mask) {
  if (m < 1) throw InputError("requested mode count must be at least 1");
  Index range = dim;
  if (mask) range = static_cast<Index>((mask->array() != 0.0).count());
  if (m > range) throw InputError("requested " + std::to_string(m) + " modes but the operator acts on " +
                                  std::to_string(range) + " coordinates");
  const Index p = std::min<Index>(m + opts.extra_block, range);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  Mat x(dim, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < dim; ++i) x(i, j) = normal(rng);
  if (mask) x = mask->asDiagonal() * x;
  x = orthonormalize(x);

  EigenResult out;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Mat z = op(x);
    if (!z.allFinite()) throw NumericalError("eigensolver operator produced non-finite values");
    Mat t = x.transpose() * z;
    t = 0.5 * (t + t.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(t);
    if (eig.info() != Eigen::Success) throw NumericalError("Rayleigh-Ritz eigensolve failed");
    const Vec theta = eig.eigenvalues().reverse();
    const Mat v = eig.eigenvectors().rowwise().reverse();
    x = x * v;
    z = z * v;

    const double top = theta(0);
    if (!(top > 0.0)) throw NumericalError("operator is zero on the start block (degenerate prior)");
    // Residuals of tiny eigenvalues sit at the roundoff level of theta_1, so
    // the relative scale is floored there.
    double worst = 0.0;
    for (Index i = 0; i < m; ++i) {
      const double scale = std::max(theta(i), 1e-4 * top);
      worst = std::max(worst, (z.col(i) - theta(i) * x.col(i)).norm() / scale);
    }
    out.iterations = it;
    out.max_relative_residual = worst;
    if (worst <= opts.tolerance) {
      if (theta(m - 1) <= 1e-12 * top)
        throw NumericalError("requested " + std::to_string(m) + " modes exceed the numerical rank of the covariance");
      out.vectors = x.leftCols(m);
      out.values = theta.head(m);
      return out;
    }
    // Rank-deficient operators converge in the trailing columns to zero; stop
    // early rather than iterate on noise.
    if (theta(m - 1) <= 1e-14 * top && it > 3)
      throw NumericalError("requested " + std::to_string(m) + " modes exceed the numerical rank of the covariance");
    x = orthonormalize(z);
  }
  std::ostringstream msg;
  msg << "eigensolver did not converge in " << opts.max_iterations << " iterations (relative residual "
      << std::scientific << out.max_relative_residual << ")";
  throw NumericalError(msg.str());
}

}  // namespace fdm
