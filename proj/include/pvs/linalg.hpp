#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <optional>

namespace pvs {

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

/// Cholesky factorization used as the positive-definiteness test everywhere.
/// `jitter_rel` (relative to trace/dim) is 0 by default: failures must stay
/// visible to the damping loops instead of being papered over.
std::optional<Eigen::LLT<Eigen::MatrixXd>> try_cholesky(const Eigen::MatrixXd& m,
                                                        double jitter_rel = 0.0);

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt);

/// Inverse through the factorization; used only where a contract is stated
/// as an explicit inverse. Result is symmetrized.
Eigen::MatrixXd inverse_spd(const Eigen::LLT<Eigen::MatrixXd>& llt);

}  // namespace pvs
