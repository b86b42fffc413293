#include "least_squares.hpp"

#include "thermoid/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace thermoid::detail {

Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    double lambda) {
    const Eigen::Index p = X.cols();
    if (p == 0) return Eigen::VectorXd(0);
    if (X.rows() < p && lambda <= 0.0) {
        throw NumericalError("least squares: " + std::to_string(X.rows()) + " rows for " +
                             std::to_string(p) + " parameters");
    }
    if (lambda > 0.0) {
        Eigen::MatrixXd A(X.rows() + p, p);
        A << X, std::sqrt(lambda) * Eigen::MatrixXd::Identity(p, p);
        Eigen::VectorXd b(X.rows() + p);
        b << y, Eigen::VectorXd::Zero(p);
        return A.colPivHouseholderQr().solve(b);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-12);
    if (qr.rank() < p) {
        throw NumericalError("regressor matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                             " of " + std::to_string(p) +
                             "); inputs may be collinear, drop one or set a ridge penalty");
    }
    return qr.solve(y);
}

MinNormSolution solve_min_norm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               double relative_threshold) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
    cod.setThreshold(relative_threshold);
    return {cod.solve(y), cod.rank()};
}

double select_ridge_by_gcv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::span<const double> grid) {
    if (grid.empty()) throw ConfigError("empty ridge grid");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU);
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::VectorXd uty = svd.matrixU().transpose() * y;
    const double n = static_cast<double>(X.rows());
    const double outside = std::max(0.0, y.squaredNorm() - uty.squaredNorm());

    double best = grid.front();
    double best_score = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        double rss = outside;
        double df = 0.0;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const double s2 = s(i) * s(i);
            const double shrink = lambda / (s2 + lambda);
            rss += shrink * shrink * uty(i) * uty(i);
            df += s2 / (s2 + lambda);
        }
        const double denom = n - df;
        if (denom <= 0.0) continue;
        const double score = n * rss / (denom * denom);
        if (score < best_score) {
            best_score = score;
            best = lambda;
        }
    }
    return best;
}

} // namespace thermoid::detail
