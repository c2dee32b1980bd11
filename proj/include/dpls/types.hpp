#pragma once

#include <Eigen/Dense>

namespace dpls {

// Dense storage throughout. Row-major matches the observation-per-row layout
// of every design matrix in the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace dpls
