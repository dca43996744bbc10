#pragma once

#include <Eigen/Dense>

namespace lcbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace lcbf
