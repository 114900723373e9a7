#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace dgrain {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;
using SparseMatrixXd = Eigen::SparseMatrix<double>;
using RowSparseMatrixXd = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Base class for all library errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters, malformed configuration, violated preconditions.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Solver breakdown, non-finite values, exhausted budgets.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Missing, unreadable or inconsistent files.
class IoError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

}  // namespace dgrain
