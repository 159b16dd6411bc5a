#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace arht {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace arht
