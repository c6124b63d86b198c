#pragma once

#include <Eigen/Core>
#include <type_traits>

#include "pvs/gaussian.hpp"

namespace pvs {

/// Unit-space integration rule for expectations under N(0, I): nodes are rows,
/// weights sum to 1.
struct QuadratureRule {
  Eigen::MatrixXd nodes;
  Eigen::VectorXd weights;

  int dim() const { return static_cast<int>(nodes.cols()); }
  int count() const { return static_cast<int>(nodes.rows()); }
};

/// Tensor-product probabilists' Gauss-Hermite rule, exact for per-axis
/// polynomial degree <= 2*order - 1 under N(0, I). Guards order^dim <= 1e6.
QuadratureRule gauss_hermite_rule(int order, int dim);

/// Standard 2d+1 unscented points in unit space, exact up to degree 3.
QuadratureRule unscented_rule(int dim, double alpha = 1.0, double beta = 2.0,
                              double kappa = 2.0);

/// Dimension-independent description of a rule; `automatic` picks
/// Gauss-Hermite order 5 for dim <= 3, order 3 for dim 4-6, unscented above.
struct QuadratureSpec {
  enum class Kind { automatic, gauss_hermite, unscented };
  Kind kind = Kind::automatic;
  int order = 5;
};

QuadratureRule make_rule(const QuadratureSpec& spec, int dim);

/// E[f(x)] for x ~ marg: sum_i w_i f(m + L z_i) with L the lower Cholesky
/// factor of the covariance. Works for scalar, vector, and matrix f.
template <class F>
auto expect(const QuadratureRule& rule, const Gaussian& marg, F&& f) {
  auto llt = try_cholesky(marg.cov);
  if (!llt) throw DomainError("expect: covariance is not positive definite");
  const Eigen::MatrixXd L = llt->matrixL();

  auto value_at = [&](int i) {
    return f(Eigen::VectorXd(marg.mean + L * rule.nodes.row(i).transpose()));
  };
  using Value = decltype(value_at(0));
  if constexpr (std::is_arithmetic_v<Value>) {
    Value acc = rule.weights(0) * value_at(0);
    for (int i = 1; i < rule.count(); ++i) acc += rule.weights(i) * value_at(i);
    return acc;
  } else {
    auto acc = (rule.weights(0) * value_at(0)).eval();
    for (int i = 1; i < rule.count(); ++i) acc += rule.weights(i) * value_at(i);
    return acc;
  }
}

}  // namespace pvs
