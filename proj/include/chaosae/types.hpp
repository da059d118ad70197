#pragma once

#include <Eigen/Dense>

namespace chaosae {

/// Row-major dense matrix; rows are samples (time steps, windows, batch entries).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

} // namespace chaosae
