#include "pvs/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "pvs/errors.hpp"

namespace pvs {

namespace {

constexpr double kMaxNodes = 1e6;

// Golub-Welsch on the Jacobi matrix of the He_n recurrence
// He_{n+1}(x) = x He_n(x) - n He_{n-1}(x).
void hermite_1d(int order, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  nodes.resize(order);
  weights.resize(order);
  if (order == 1) {
    nodes(0) = 0.0;
    weights(0) = 1.0;
    return;
  }
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int i = 0; i + 1 < order; ++i) {
    const double off = std::sqrt(static_cast<double>(i + 1));
    jacobi(i, i + 1) = off;
    jacobi(i + 1, i) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  nodes = eig.eigenvalues();
  for (int i = 0; i < order; ++i) {
    const double v0 = eig.eigenvectors()(0, i);
    weights(i) = v0 * v0;
  }
}

}  // namespace

QuadratureRule gauss_hermite_rule(int order, int dim) {
  if (order < 1 || dim < 1) throw DomainError("gauss_hermite_rule: order and dim must be >= 1");
  double total = 1.0;
  for (int i = 0; i < dim; ++i) {
    total *= order;
    if (total > kMaxNodes) throw CapacityError("gauss_hermite_rule: order^dim exceeds 1e6 nodes");
  }
  Eigen::VectorXd n1, w1;
  hermite_1d(order, n1, w1);

  const int count = static_cast<int>(total);
  QuadratureRule rule;
  rule.nodes.resize(count, dim);
  rule.weights.resize(count);
  for (int i = 0; i < count; ++i) {
    int rem = i;
    double w = 1.0;
    for (int a = dim - 1; a >= 0; --a) {
      const int idx = rem % order;
      rem /= order;
      rule.nodes(i, a) = n1(idx);
      w *= w1(idx);
    }
    rule.weights(i) = w;
  }
  return rule;
}

QuadratureRule unscented_rule(int dim, double alpha, double beta, double kappa) {
  (void)beta;  // the covariance-weight correction plays no role in a plain rule
  if (dim < 1) throw DomainError("unscented_rule: dim must be >= 1");
  const double lambda = alpha * alpha * (dim + kappa) - dim;
  const double scale = dim + lambda;
  if (!(scale > 0.0)) throw DomainError("unscented_rule: degenerate scaling, lambda + dim <= 0");

  QuadratureRule rule;
  rule.nodes = Eigen::MatrixXd::Zero(2 * dim + 1, dim);
  rule.weights.resize(2 * dim + 1);
  rule.weights(0) = lambda / scale;
  const double spread = std::sqrt(scale);
  for (int i = 0; i < dim; ++i) {
    rule.nodes(1 + 2 * i, i) = spread;
    rule.nodes(2 + 2 * i, i) = -spread;
    rule.weights(1 + 2 * i) = 0.5 / scale;
    rule.weights(2 + 2 * i) = 0.5 / scale;
  }
  return rule;
}

QuadratureRule make_rule(const QuadratureSpec& spec, int dim) {
  switch (spec.kind) {
    case QuadratureSpec::Kind::gauss_hermite:
      return gauss_hermite_rule(spec.order, dim);
    case QuadratureSpec::Kind::unscented:
      return unscented_rule(dim);
    case QuadratureSpec::Kind::automatic:
      break;
  }
  if (dim <= 3) return gauss_hermite_rule(5, dim);
  if (dim <= 6) return gauss_hermite_rule(3, dim);
  return unscented_rule(dim);
}

}  // namespace pvs
