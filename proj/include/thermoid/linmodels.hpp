#pragma once

#include "thermoid/dataset.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace thermoid::linmodels {

/// Polynomial model in the backshift operator q^-1:
///
///   A(q) y_t = sum_j B_j(q) x_j(t - delay_j) + C(q) e_t
///
/// with A = 1 + a_1 q^-1 + ... + a_na q^-na,
///      B_j = b_j0 + b_j1 q^-1 + ... + b_jnb q^-nb  (leading term free),
///      C = 1 + c_1 q^-1 + ... + c_nc q^-nc.
/// ARX is the special case c = {}.
struct PolyModel {
    std::vector<double> a;
    std::vector<std::vector<double>> b;
    std::vector<double> c;
    std::vector<int> delays;
    double noise_variance = 0.0;
    std::vector<std::string> input_names;
    std::string output_name;

    std::size_t na() const { return a.size(); }
    std::size_t nc() const { return c.size(); }
    std::size_t n_inputs() const { return b.size(); }
    /// Number of leading samples without a complete lag history:
    /// max(na, delay_j + nb_j).
    std::size_t warmup() const;

    /// Throws ConfigError on inconsistent shapes or negative variance/delays.
    void validate() const;
};

struct Orders {
    int na = 4;
    int nb = 4;
    int nc = 4;
};

struct FitOptions {
    Orders orders;
    /// One delay per input, or a single value applied to every input.
    std::vector<int> delays{1};
    int max_els_iterations = 100;
    /// Relative parameter change ||d theta|| / max(1, ||theta||) that ends ELS.
    double convergence_tol = 1e-6;
    /// Ridge penalty on all estimated coefficients; 0 disables it.
    double ridge_lambda = 0.0;
    /// Choose ridge_lambda by generalized cross-validation on the ARX
    /// regressor over 10^-4 .. 10^2 (half-decade steps).
    bool ridge_by_gcv = false;
    /// Parameter norm beyond which ELS is declared divergent.
    double divergence_bound = 1e8;
    /// Gauss-Newton/Levenberg-Marquardt refinement of the one-step prediction
    /// error after ELS.
    bool pem_refine = false;
    int pem_max_iterations = 100;

    void validate() const;
};

struct Channels {
    std::string output;
    std::vector<std::string> inputs;
};

/// Linear regression form of the ARX part. Row r corresponds to time
/// t = first_row + r and holds [-y_{t-1} .. -y_{t-na}, x_j(t-d_j) .. x_j(t-d_j-nb)
/// for each input j]; target(r) = y_t. Rows whose lags would reach before the
/// start of the data are left out.
struct Regression {
    Eigen::MatrixXd regressors;
    Eigen::VectorXd target;
    std::size_t first_row = 0;
};

Regression build_regressors(const dataset::TimeSeriesTable& table, const Channels& channels,
                            int na, int nb, std::span<const int> delays);

enum class PredictionMode { free_run, one_step };

std::string to_string(PredictionMode mode);

struct TestFit {
    std::string label;
    double free_run_fit_pct = 0.0;
    double one_step_fit_pct = 0.0;
};

struct FitReport {
    std::string method;
    PolyModel model;
    int iterations_used = 0;
    bool converged = false;
    double residual_variance = 0.0;
    double ridge_lambda = 0.0;
    double train_fit_pct = 0.0;
    double train_one_step_fit_pct = 0.0;
    std::vector<TestFit> tests;
    PredictionMode prediction_mode = PredictionMode::free_run;

    /// Headline fit on the first test set, if any.
    std::optional<double> test_fit_pct() const;
};

/// Least-squares ARX fit (C = 1). Solved by column-pivoting QR; with
/// ridge_lambda > 0 the regression is augmented with sqrt(lambda) I.
/// Throws NumericalError on a rank-deficient regressor without ridge.
FitReport fit_arx(const dataset::TimeSeriesTable& train, const Channels& channels,
                  const FitOptions& options);

/// Extended least squares: start from the ARX fit, then repeatedly rebuild
/// the one-step residuals with the current model, append their lags as MA
/// regressors and re-solve, until the relative parameter change falls below
/// the tolerance or the iteration budget runs out. MA roots that leave the
/// unit circle are reflected back inside so the residual filter stays stable.
FitReport fit_armax(const dataset::TimeSeriesTable& train, const Channels& channels,
                    const FitOptions& options);

/// One ELS update starting from `model` (same orders and ridge as `options`).
PolyModel els_step(const dataset::TimeSeriesTable& train, const PolyModel& model,
                   const FitOptions& options);

/// Free-run simulation with the noise term set to zero. The first init.size()
/// outputs are taken from `init`; samples before t = 0 are zero. With no
/// inputs, `length` sets the output length.
std::vector<double> simulate(const PolyModel& model, std::span<const std::vector<double>> inputs,
                             std::span<const double> init = {},
                             std::optional<std::size_t> length = std::nullopt);

/// Free-run over a table whose first model.warmup() outputs seed the recursion.
std::vector<double> simulate_on(const PolyModel& model, const dataset::TimeSeriesTable& table);

struct OneStepPrediction {
    std::size_t first_index = 0;
    std::vector<double> values;
};

/// One-step-ahead predictions from measured past outputs and inputs, with
/// the MA residuals rebuilt recursively (zero before the first usable row).
OneStepPrediction predict_one_step(const PolyModel& model, const dataset::TimeSeriesTable& table);

/// Measured output with both predictions over rows [first_index, n_rows).
/// first_index is max(model.warmup(), score_from).
struct Evaluation {
    std::size_t first_index = 0;
    std::vector<double> measured;
    std::vector<double> free_run;
    std::vector<double> one_step;
    double free_run_fit_pct = 0.0;
    double one_step_fit_pct = 0.0;
};

Evaluation evaluate(const PolyModel& model, const dataset::TimeSeriesTable& table,
                    std::size_t score_from = 0);

/// 100 (1 - ||y - y_hat|| / ||y - mean(y)||). Throws NumericalError for a
/// constant y and ConfigError on length mismatch.
double model_fit(std::span<const double> y, std::span<const double> y_hat);

/// Roots of z^n + coeffs[0] z^{n-1} + ... + coeffs[n-1].
std::vector<std::complex<double>> monic_roots(std::span<const double> coeffs);

struct Stability {
    bool stable = true;
    std::vector<double> root_magnitudes;
};

Stability check_stability(const PolyModel& model);

} // namespace thermoid::linmodels
