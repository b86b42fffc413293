#pragma once

#include <Eigen/Dense>

#include <span>

namespace thermoid::detail {

/// argmin ||X theta - y||^2 + lambda ||theta||^2 via column-pivoting QR on
/// the augmented system. With lambda == 0 a rank-deficient X raises
/// NumericalError.
Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    double lambda);

/// Minimum-norm least-squares solution and the numerical rank of X.
struct MinNormSolution {
    Eigen::VectorXd theta;
    Eigen::Index rank = 0;
};

MinNormSolution solve_min_norm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               double relative_threshold);

/// Ridge penalty minimizing the generalized cross-validation score
/// n RSS(lambda) / (n - tr H(lambda))^2 over `grid`.
double select_ridge_by_gcv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::span<const double> grid);

} // namespace thermoid::detail
