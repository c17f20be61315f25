#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdm {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed files, configs, or arguments that violate a precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Factorization, eigensolver, or line-search failures.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Number of worker threads used by column-parallel loops. Defaults to 1.
void set_thread_count(int threads);
int thread_count();

}  // namespace fdm
