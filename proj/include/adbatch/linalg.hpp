#pragma once

#include <Eigen/Dense>

namespace adbatch {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace adbatch
