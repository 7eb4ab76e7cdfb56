#pragma once

#include <Eigen/Dense>

namespace mblflow {

/// Dense real operator in the sigma basis (Hamiltonians, observables, rotations).
using OperatorMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace mblflow
