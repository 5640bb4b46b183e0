#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lyapnet/milp/branch_and_bound.hpp"
#include "lyapnet/milp/model.hpp"

namespace lyapnet::milp {

enum class ActiveKind { BinaryFixing, EqualityRow, InequalityRow, VariableBound };

/// One row of the square active system, in the form a^T s = b.
struct ActiveConstraint {
  ActiveKind kind = ActiveKind::InequalityRow;
  int index = 0;  // row index for row kinds, variable index otherwise
  bool upper = true;  // which bound, for VariableBound
};

/// The optimum of the fixed-binary LP written as the solution of A s = b, so that the
/// optimal value is gamma = c^T A^{-1} b + d.
struct ActiveSetCertificate {
  std::vector<ActiveConstraint> constraints;
  std::vector<double> binary_assignment;  // aligned with MilpModel::binary_variables()
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  double d = 0.0;
  Eigen::VectorXd vertex;  // A^{-1} b
  double objective = 0.0;  // c^T vertex + d
  double condition = 0.0;
};

struct ActiveSetOptions {
  double activity_tol = 1e-7;
  double independence_tol = 1e-9;
  double max_condition = 1e12;
  double reconstruction_tol = 1e-6;
};

/// Fixes the binaries at the optimum, re-solves the LP and selects an invertible square system
/// of active constraints (binary fixings, equalities, exact inequalities, variable bounds, then
/// bound-dependent inequalities). Throws DegenerateActiveSet if no such system exists.
ActiveSetCertificate extract_active_set(const MilpModel& model, const SolveResult& result,
                                        const ActiveSetOptions& options = {});

/// d gamma / d theta through the coefficient provenance recorded in the model.
Eigen::VectorXd mip_objective_gradient(const MilpModel& model, const ActiveSetCertificate& cert,
                                       int theta_dim);

/// Convenience overload: extracts the active set, then differentiates.
Eigen::VectorXd mip_objective_gradient(const MilpModel& model, const SolveResult& result,
                                       int theta_dim, const ActiveSetOptions& options = {});

}  // namespace lyapnet::milp
