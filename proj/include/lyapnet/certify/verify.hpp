#pragma once

#include <optional>

#include <nlohmann/json.hpp>

#include "lyapnet/certify/problem.hpp"
#include "lyapnet/milp/branch_and_bound.hpp"
#include "lyapnet/milp/encode.hpp"

namespace lyapnet::certify {

/// A verification MIP together with the variables holding the state x.
struct VerificationMip {
  milp::MilpModel model;
  std::vector<int> state_vars;
  int theta_dim = 0;

  Eigen::VectorXd state_of(const std::vector<double>& point) const;
  /// The unique feasible completion of the encoding at state x.
  std::vector<double> complete_at(const Eigen::VectorXd& x) const;
  /// Solver options wired for this model: pool keys, completion heuristic, x* start.
  milp::SolveOptions solve_options(const milp::SolveOptions& base, const Eigen::VectorXd& x_eq) const;
};

struct MipBuildOptions {
  milp::BoundMethod bound_method = milp::BoundMethod::Interval;
};

/// max eps1 |R (x - x*)|_1 - V(x) over x in the box.
VerificationMip build_positivity_mip(const CertificationProblem& p, const MipBuildOptions& options = {});
/// max V(x_{t+1}) - V(x) + eps2 V(x) over x in the box.
VerificationMip build_decrease_mip(const CertificationProblem& p, const MipBuildOptions& options = {});

struct VerifyOptions {
  double tolerance = 1e-6;
  milp::SolveOptions solver;
  MipBuildOptions build;
  /// Solve the two MIPs concurrently when greater than one.
  int workers = 1;
};

struct ConditionOutcome {
  VerificationMip mip;
  milp::SolveResult result;
  double value = 0.0;  // best objective found
  Eigen::VectorXd worst_state;
  bool satisfied = false;
};

enum class VerifyStatus { Certified, Violated, Undetermined };

struct VerifyReport {
  VerifyStatus status = VerifyStatus::Undetermined;
  bool certified = false;
  ConditionOutcome positivity;
  ConditionOutcome decrease;
};

const char* to_string(VerifyStatus status);

VerifyReport verify(const CertificationProblem& p, const VerifyOptions& options = {});

struct RoaResult {
  double rho = 0.0;
  Eigen::VectorXd minimizer;
  int face_dim = 0;
  bool face_upper = false;
  bool exact = true;  // every face MIP solved to optimality
  long node_count = 0;
  double wall_time = 0.0;
};

/// Largest rho with {V <= rho} inside the box: the minimum of V over the box boundary.
RoaResult roa_level(const CertificationProblem& p, const VerifyOptions& options = {});

nlohmann::json report_to_json(const VerifyReport& report, const VerifyOptions& options,
                              const std::optional<RoaResult>& roa = std::nullopt);
nlohmann::json roa_to_json(const RoaResult& roa);

/// LYAPNET_WORKERS, defaulting to 1.
int workers_from_env();

}  // namespace lyapnet::certify
