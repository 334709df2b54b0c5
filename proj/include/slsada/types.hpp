#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace slsada {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Integer class ids in [0, C). Positions follow the owning matrix's columns.
using Labels = std::vector<int>;

}  // namespace slsada
