#pragma once

#include "thermoid/dataset.hpp"
#include "thermoid/linmodels.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace thermoid::statespace {

/// Innovation-form model
///   x_{t+1} = A x_t + B u_t + K e_t
///   y_t     = C x_t + D u_t + e_t
/// with a single output.
struct SSModel {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::MatrixXd D;
    Eigen::MatrixXd K;
    std::vector<std::string> input_names;
    std::string output_name;

    Eigen::Index order() const { return A.rows(); }
    Eigen::Index n_inputs() const { return B.cols(); }
    double spectral_radius() const;
    /// Throws ConfigError on inconsistent dimensions.
    void validate() const;
};

/// Observer canonical form of a polynomial model. Delays are folded into the
/// numerators and the MA polynomial into K, so with zero initial state the
/// output equals linmodels::simulate with zero history.
SSModel from_poly(const linmodels::PolyModel& model);

/// A -> T A T^-1, B -> T B, C -> C T^-1, K -> T K.
SSModel similarity_transform(const SSModel& model, const Eigen::MatrixXd& T);

/// h[0] = D, h[k] = C A^{k-1} B; each entry is 1 x m.
std::vector<Eigen::RowVectorXd> markov_parameters(const SSModel& model, std::size_t count);

struct Realization {
    SSModel model;
    Eigen::VectorXd singular_values;
};

/// Ho-Kalman / eigensystem realization. Builds the rows x (cols * m) block
/// Hankel matrix H(i, j) = h[1 + i + j] and its one-step shift, keeps the
/// leading `order` singular triplets and returns a balanced (A, B, C) with
/// D = h[0]; K is zero. Needs h[0 .. rows + cols]. Throws NumericalError when
/// the Hankel matrix has numerical rank below `order`.
Realization ho_kalman(std::span<const Eigen::RowVectorXd> markov, int order, int rows, int cols,
                      double rank_tolerance = 1e-10);

struct SSFitOptions {
    /// Order of the intermediate ARX model; 0 selects 2 * order + 5.
    int arx_order = 0;
    /// Block rows/columns of the Hankel matrix; 0 selects max(order + 1, arx order).
    int hankel_size = 0;
    double rank_tolerance = 1e-10;
    bool estimate_innovation_gain = true;
    bool pem_refine = false;
    int pem_max_iterations = 50;
    /// Effective samples required per (order * (inputs + 2)).
    int samples_per_parameter = 10;
};

struct SSFitResult {
    SSModel model;
    linmodels::FitReport report;
    Eigen::VectorXd hankel_singular_values;
    int arx_order_used = 0;
    bool stable = true;
};

/// Two-stage estimate: a high-order ARX model (delay 0, so direct
/// feedthrough is captured) supplies the impulse response; ho_kalman turns
/// it into (A, B, C, D). When the ARX regression is rank deficient, as with
/// noiseless data from a low-order system, the ARX order is lowered until it
/// is full rank. K and the initial state are then fitted jointly by least
/// squares against the ARX one-step residuals taken as innovations.
SSFitResult fit_ss(const dataset::TimeSeriesTable& train, const linmodels::Channels& channels,
                   int order, const SSFitOptions& options = {});

/// Free-run state recursion with zero noise; zero initial state unless `x0`.
std::vector<double> simulate_ss(const SSModel& model, std::span<const std::vector<double>> inputs,
                                const std::optional<Eigen::VectorXd>& x0 = std::nullopt,
                                std::optional<std::size_t> length = std::nullopt);

/// Samples used to estimate the initial state before scoring: max(2n, 10).
std::size_t initial_state_window(const SSModel& model);

/// Least-squares initial state from the first `window` samples of the table.
Eigen::VectorXd estimate_initial_state(const SSModel& model, const dataset::TimeSeriesTable& table,
                                       std::size_t window);

/// Free-run and one-step predictions with the initial state estimated from
/// the first initial_state_window() samples, scored from
/// max(window, score_from).
linmodels::Evaluation evaluate_ss(const SSModel& model, const dataset::TimeSeriesTable& table,
                                  std::size_t score_from = 0);

} // namespace thermoid::statespace
