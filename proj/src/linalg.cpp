#include "pvs/linalg.hpp"

namespace pvs {

std::optional<Eigen::LLT<Eigen::MatrixXd>> try_cholesky(const Eigen::MatrixXd& m,
                                                        double jitter_rel) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  if (jitter_rel > 0.0 && m.rows() > 0) {
    const double jitter = jitter_rel * m.trace() / static_cast<double>(m.rows());
    if (jitter > 0.0) {
      Eigen::MatrixXd jittered =
          m + jitter * Eigen::MatrixXd::Identity(m.rows(), m.cols());
      llt.compute(jittered);
      if (llt.info() == Eigen::Success) return llt;
    }
  }
  return std::nullopt;
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Eigen::MatrixXd inverse_spd(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::Index n = llt.matrixL().rows();
  return symmetrized(llt.solve(Eigen::MatrixXd::Identity(n, n)));
}

}  // namespace pvs
