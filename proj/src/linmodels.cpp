#include "thermoid/linmodels.hpp"

#include "least_squares.hpp"
#include "thermoid/error.hpp"

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace thermoid::linmodels {

using dataset::TimeSeriesTable;

std::size_t PolyModel::warmup() const {
    std::size_t w = a.size();
    for (std::size_t j = 0; j < b.size(); ++j) {
        const std::size_t d = j < delays.size() ? static_cast<std::size_t>(std::max(0, delays[j])) : 0;
        w = std::max(w, d + (b[j].empty() ? 0 : b[j].size() - 1));
    }
    return w;
}

void PolyModel::validate() const {
    if (b.size() != delays.size() || b.size() != input_names.size()) {
        throw ConfigError("model has " + std::to_string(b.size()) + " input polynomials, " +
                          std::to_string(delays.size()) + " delays and " +
                          std::to_string(input_names.size()) + " input names");
    }
    for (std::size_t j = 0; j < b.size(); ++j) {
        if (b[j].empty()) throw ConfigError("input polynomial for '" + input_names[j] + "' is empty");
        if (delays[j] < 0) throw ConfigError("negative delay for input '" + input_names[j] + "'");
    }
    if (!(noise_variance >= 0.0)) throw ConfigError("noise variance must be nonnegative");
}

void FitOptions::validate() const {
    if (orders.na < 0 || orders.nb < 0 || orders.nc < 0) throw ConfigError("model orders must be >= 0");
    if (max_els_iterations < 1) throw ConfigError("max_els_iterations must be >= 1");
    if (!(convergence_tol > 0.0)) throw ConfigError("convergence_tol must be positive");
    if (!(ridge_lambda >= 0.0)) throw ConfigError("ridge_lambda must be nonnegative");
    for (int d : delays) {
        if (d < 0) throw ConfigError("delays must be nonnegative");
    }
}

std::string to_string(PredictionMode mode) {
    return mode == PredictionMode::free_run ? "free_run" : "one_step";
}

std::optional<double> FitReport::test_fit_pct() const {
    if (tests.empty()) return std::nullopt;
    return prediction_mode == PredictionMode::free_run ? tests.front().free_run_fit_pct
                                                       : tests.front().one_step_fit_pct;
}

namespace {

std::vector<int> expand_delays(std::span<const int> delays, std::size_t n_inputs) {
    if (n_inputs == 0) return {};
    if (delays.size() == 1) return std::vector<int>(n_inputs, delays.front());
    if (delays.size() != n_inputs) {
        throw ConfigError("expected 1 or " + std::to_string(n_inputs) + " delays, got " +
                          std::to_string(delays.size()));
    }
    return {delays.begin(), delays.end()};
}

std::size_t first_usable_row(int na, int nb, std::span<const int> delays) {
    std::size_t w = static_cast<std::size_t>(na);
    for (int d : delays) w = std::max(w, static_cast<std::size_t>(d + nb));
    return w;
}

} // namespace

Regression build_regressors(const TimeSeriesTable& table, const Channels& channels, int na, int nb,
                            std::span<const int> delays) {
    if (na < 0 || nb < 0) throw ConfigError("model orders must be >= 0");
    const auto d = expand_delays(delays, channels.inputs.size());
    const auto y = table.values(channels.output);
    std::vector<std::span<const double>> xs;
    for (const auto& name : channels.inputs) xs.push_back(table.values(name));

    const std::size_t n = table.n_rows();
    const std::size_t t0 = first_usable_row(na, nb, d);
    if (n <= t0) {
        throw DataError("need more than " + std::to_string(t0) + " rows to build regressors, got " +
                        std::to_string(n));
    }
    const auto rows = static_cast<Eigen::Index>(n - t0);
    const auto cols = static_cast<Eigen::Index>(na + static_cast<int>(xs.size()) * (nb + 1));

    Regression r;
    r.first_row = t0;
    r.regressors.resize(rows, cols);
    r.target.resize(rows);
    for (Eigen::Index row = 0; row < rows; ++row) {
        const std::size_t t = t0 + static_cast<std::size_t>(row);
        Eigen::Index col = 0;
        for (int i = 1; i <= na; ++i) r.regressors(row, col++) = -y[t - static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < xs.size(); ++j) {
            for (int k = 0; k <= nb; ++k) {
                r.regressors(row, col++) = xs[j][t - static_cast<std::size_t>(d[j] + k)];
            }
        }
        r.target(row) = y[t];
    }
    return r;
}

namespace {

Eigen::VectorXd pack(const PolyModel& m) {
    std::vector<double> v(m.a);
    for (const auto& bj : m.b) v.insert(v.end(), bj.begin(), bj.end());
    v.insert(v.end(), m.c.begin(), m.c.end());
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void unpack(const Eigen::VectorXd& theta, PolyModel& m) {
    Eigen::Index k = 0;
    for (auto& ai : m.a) ai = theta(k++);
    for (auto& bj : m.b) {
        for (auto& bjk : bj) bjk = theta(k++);
    }
    for (auto& ci : m.c) ci = theta(k++);
}

PolyModel shape_model(const Channels& channels, const Orders& orders, const std::vector<int>& delays) {
    PolyModel m;
    m.output_name = channels.output;
    m.input_names = channels.inputs;
    m.delays = delays;
    m.a.assign(static_cast<std::size_t>(orders.na), 0.0);
    m.b.assign(channels.inputs.size(), std::vector<double>(static_cast<std::size_t>(orders.nb) + 1, 0.0));
    m.c.assign(static_cast<std::size_t>(orders.nc), 0.0);
    return m;
}

/// One-step residuals of the model over the regression rows, with e = 0
/// before the first row. The ARX part comes from the prebuilt regressors.
Eigen::VectorXd one_step_residuals(const Regression& reg, const Eigen::VectorXd& theta_arx,
                                   std::span<const double> c) {
    const Eigen::Index rows = reg.regressors.rows();
    Eigen::VectorXd e = reg.target - reg.regressors * theta_arx;
    if (!c.empty()) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            double ma = 0.0;
            for (std::size_t i = 1; i <= c.size(); ++i) {
                const Eigen::Index lag = r - static_cast<Eigen::Index>(i);
                if (lag >= 0) ma += c[i - 1] * e(lag);
            }
            e(r) -= ma;
        }
    }
    return e;
}

Eigen::MatrixXd lagged_residuals(const Eigen::VectorXd& e, int nc) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(e.size(), nc);
    for (Eigen::Index r = 0; r < e.size(); ++r) {
        for (int i = 1; i <= nc; ++i) {
            if (r - i >= 0) E(r, i - 1) = e(r - i);
        }
    }
    return E;
}

/// Reflects roots of z^n + c_1 z^{n-1} + ... outside the unit circle to 1/conj(r).
std::vector<double> stabilize_ma(const std::vector<double>& c) {
    if (c.empty()) return c;
    auto roots = monic_roots(c);
    bool changed = false;
    for (auto& r : roots) {
        if (std::abs(r) > 1.0) {
            r = 1.0 / std::conj(r);
            changed = true;
        }
    }
    if (!changed) return c;
    std::vector<std::complex<double>> poly{1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            next[i] += poly[i];
            next[i + 1] -= r * poly[i];
        }
        poly = std::move(next);
    }
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = poly[i + 1].real();
    return out;
}

std::string describe(const Eigen::VectorXd& theta) {
    std::ostringstream os;
    os << '[';
    for (Eigen::Index i = 0; i < theta.size(); ++i) os << (i ? ", " : "") << theta(i);
    os << ']';
    return os.str();
}

std::vector<double> ridge_grid() {
    std::vector<double> g;
    for (int k = -8; k <= 4; ++k) g.push_back(std::pow(10.0, 0.5 * k));
    return g;
}

struct ElsState {
    Regression reg;
    std::vector<int> delays;
    double lambda = 0.0;
};

ElsState prepare(const TimeSeriesTable& train, const Channels& channels, const FitOptions& options) {
    options.validate();
    ElsState s;
    s.delays = expand_delays(options.delays, channels.inputs.size());
    s.reg = build_regressors(train, channels, options.orders.na, options.orders.nb, s.delays);
    const auto params = s.reg.regressors.cols() + options.orders.nc;
    if (s.reg.regressors.rows() <= params) {
        throw DataError("need more usable rows (" + std::to_string(s.reg.regressors.rows()) +
                        ") than parameters (" + std::to_string(params) + ")");
    }
    s.lambda = options.ridge_lambda;
    if (options.ridge_by_gcv) {
        const auto grid = ridge_grid();
        s.lambda = detail::select_ridge_by_gcv(s.reg.regressors, s.reg.target, grid);
    }
    return s;
}

void finish_report(FitReport& report, const TimeSeriesTable& train) {
    const auto ev = evaluate(report.model, train);
    report.train_fit_pct = ev.free_run_fit_pct;
    report.train_one_step_fit_pct = ev.one_step_fit_pct;
}

/// Levenberg-Marquardt on the one-step prediction errors.
struct PemFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const Regression* reg;
    Eigen::Index n_arx;
    int nc;

    int inputs() const { return static_cast<int>(n_arx + nc); }
    int values() const { return static_cast<int>(reg->regressors.rows()); }

    int operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& fvec) const {
        const Eigen::VectorXd arx = theta.head(n_arx);
        std::vector<double> c(theta.data() + n_arx, theta.data() + n_arx + nc);
        fvec = one_step_residuals(*reg, arx, c);
        return 0;
    }
};

} // namespace

FitReport fit_arx(const TimeSeriesTable& train, const Channels& channels, const FitOptions& options) {
    FitOptions arx = options;
    arx.orders.nc = 0;
    auto s = prepare(train, channels, arx);
    const Eigen::VectorXd theta = detail::solve_least_squares(s.reg.regressors, s.reg.target, s.lambda);

    FitReport report;
    report.method = "ARX";
    report.model = shape_model(channels, arx.orders, s.delays);
    unpack(theta, report.model);
    const Eigen::VectorXd e = s.reg.target - s.reg.regressors * theta;
    report.residual_variance = e.squaredNorm() / static_cast<double>(e.size());
    report.model.noise_variance = report.residual_variance;
    report.iterations_used = 0;
    report.converged = true;
    report.ridge_lambda = s.lambda;
    finish_report(report, train);
    return report;
}

namespace {

/// Re-solves the augmented regression given the current MA-inclusive parameters.
Eigen::VectorXd els_update(const ElsState& s, const Eigen::VectorXd& theta, int nc) {
    const Eigen::Index n_arx = s.reg.regressors.cols();
    std::vector<double> c(theta.data() + n_arx, theta.data() + n_arx + nc);
    const Eigen::VectorXd e = one_step_residuals(s.reg, theta.head(n_arx), c);
    Eigen::MatrixXd X(s.reg.regressors.rows(), n_arx + nc);
    X << s.reg.regressors, lagged_residuals(e, nc);
    Eigen::VectorXd next = detail::solve_least_squares(X, s.reg.target, s.lambda);
    std::vector<double> c_next(next.data() + n_arx, next.data() + n_arx + nc);
    c_next = stabilize_ma(c_next);
    for (int i = 0; i < nc; ++i) next(n_arx + i) = c_next[static_cast<std::size_t>(i)];
    return next;
}

} // namespace

PolyModel els_step(const TimeSeriesTable& train, const PolyModel& model, const FitOptions& options) {
    Channels ch{model.output_name, model.input_names};
    auto s = prepare(train, ch, options);
    if (options.ridge_by_gcv) s.lambda = options.ridge_lambda;
    PolyModel out = model;
    unpack(els_update(s, pack(model), static_cast<int>(model.nc())), out);
    return out;
}

FitReport fit_armax(const TimeSeriesTable& train, const Channels& channels, const FitOptions& options) {
    auto s = prepare(train, channels, options);
    const int nc = options.orders.nc;
    const Eigen::Index n_arx = s.reg.regressors.cols();

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n_arx + nc);
    theta.head(n_arx) = detail::solve_least_squares(s.reg.regressors, s.reg.target, s.lambda);

    FitReport report;
    report.method = s.lambda > 0.0 ? "Reg. ARMAX" : "ARMAX";
    report.converged = true;
    report.iterations_used = 0;

    if (nc > 0) {
        report.converged = false;
        for (int it = 1; it <= options.max_els_iterations; ++it) {
            Eigen::VectorXd next = els_update(s, theta, nc);
            if (!next.allFinite() || next.norm() > options.divergence_bound) {
                throw NumericalError("ELS diverged at iteration " + std::to_string(it) +
                                     "; last stable parameters " + describe(theta));
            }
            const double change = (next - theta).norm() / std::max(1.0, next.norm());
            theta = std::move(next);
            report.iterations_used = it;
            if (change < options.convergence_tol) {
                report.converged = true;
                break;
            }
        }
    }

    if (options.pem_refine) {
        PemFunctor f{&s.reg, n_arx, nc};
        Eigen::NumericalDiff<PemFunctor> nd(f);
        Eigen::LevenbergMarquardt<Eigen::NumericalDiff<PemFunctor>> lm(nd);
        lm.parameters.maxfev = options.pem_max_iterations * static_cast<int>(theta.size() + 1);
        Eigen::VectorXd refined = theta;
        lm.minimize(refined);
        if (refined.allFinite()) {
            std::vector<double> c(refined.data() + n_arx, refined.data() + n_arx + nc);
            c = stabilize_ma(c);
            for (int i = 0; i < nc; ++i) refined(n_arx + i) = c[static_cast<std::size_t>(i)];
            Eigen::VectorXd r0;
            Eigen::VectorXd r1;
            f(theta, r0);
            f(refined, r1);
            if (r1.squaredNorm() <= r0.squaredNorm()) theta = refined;
        }
    }

    report.model = shape_model(channels, options.orders, s.delays);
    unpack(theta, report.model);
    const Eigen::VectorXd e = one_step_residuals(s.reg, theta.head(n_arx), report.model.c);
    report.residual_variance = e.squaredNorm() / static_cast<double>(e.size());
    report.model.noise_variance = report.residual_variance;
    report.ridge_lambda = s.lambda;
    finish_report(report, train);
    return report;
}

std::vector<double> simulate(const PolyModel& model, std::span<const std::vector<double>> inputs,
                             std::span<const double> init, std::optional<std::size_t> length) {
    model.validate();
    if (inputs.size() != model.n_inputs()) {
        throw ConfigError("model expects " + std::to_string(model.n_inputs()) + " inputs, got " +
                          std::to_string(inputs.size()));
    }
    std::size_t n = length.value_or(inputs.empty() ? init.size() : inputs.front().size());
    for (const auto& x : inputs) {
        if (x.size() != n) throw ConfigError("input sequences must all have the output length");
    }
    std::vector<double> y(n, 0.0);
    const std::size_t seeded = std::min(init.size(), n);
    std::copy_n(init.begin(), seeded, y.begin());
    for (std::size_t t = seeded; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t i = 1; i <= model.a.size() && i <= t; ++i) acc -= model.a[i - 1] * y[t - i];
        for (std::size_t j = 0; j < model.b.size(); ++j) {
            const auto d = static_cast<std::size_t>(model.delays[j]);
            for (std::size_t k = 0; k < model.b[j].size(); ++k) {
                if (t >= d + k) acc += model.b[j][k] * inputs[j][t - d - k];
            }
        }
        y[t] = acc;
    }
    return y;
}

namespace {

std::vector<std::vector<double>> input_columns(const PolyModel& model, const TimeSeriesTable& table) {
    std::vector<std::vector<double>> xs;
    for (const auto& name : model.input_names) {
        if (!table.has_column(name)) throw ConfigError("table lacks model input column '" + name + "'");
        xs.push_back(table.column(name).values);
    }
    if (!table.has_column(model.output_name)) {
        throw ConfigError("table lacks model output column '" + model.output_name + "'");
    }
    return xs;
}

} // namespace

std::vector<double> simulate_on(const PolyModel& model, const TimeSeriesTable& table) {
    const auto xs = input_columns(model, table);
    const auto y = table.values(model.output_name);
    const std::size_t w = std::min(model.warmup(), table.n_rows());
    return simulate(model, xs, y.first(w), table.n_rows());
}

OneStepPrediction predict_one_step(const PolyModel& model, const TimeSeriesTable& table) {
    model.validate();
    const auto xs = input_columns(model, table);
    const auto y = table.values(model.output_name);
    const std::size_t n = table.n_rows();
    const std::size_t t0 = model.warmup();
    if (n <= t0) throw DataError("table too short for one-step prediction");

    OneStepPrediction out;
    out.first_index = t0;
    out.values.resize(n - t0);
    std::vector<double> e(n, 0.0);
    for (std::size_t t = t0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t i = 1; i <= model.a.size(); ++i) acc -= model.a[i - 1] * y[t - i];
        for (std::size_t j = 0; j < model.b.size(); ++j) {
            const auto d = static_cast<std::size_t>(model.delays[j]);
            for (std::size_t k = 0; k < model.b[j].size(); ++k) acc += model.b[j][k] * xs[j][t - d - k];
        }
        for (std::size_t i = 1; i <= model.c.size(); ++i) {
            if (t >= t0 + i) acc += model.c[i - 1] * e[t - i];
        }
        out.values[t - t0] = acc;
        e[t] = y[t] - acc;
    }
    return out;
}

Evaluation evaluate(const PolyModel& model, const TimeSeriesTable& table, std::size_t score_from) {
    const auto free = simulate_on(model, table);
    const auto one = predict_one_step(model, table);
    const auto y = table.values(model.output_name);
    Evaluation ev;
    ev.first_index = std::max(one.first_index, score_from);
    if (ev.first_index >= table.n_rows()) throw DataError("nothing left to score after warmup");
    const auto skip = static_cast<std::ptrdiff_t>(ev.first_index);
    ev.measured.assign(y.begin() + skip, y.end());
    ev.free_run.assign(free.begin() + skip, free.end());
    ev.one_step.assign(one.values.begin() + (skip - static_cast<std::ptrdiff_t>(one.first_index)),
                       one.values.end());
    ev.free_run_fit_pct = model_fit(ev.measured, ev.free_run);
    ev.one_step_fit_pct = model_fit(ev.measured, ev.one_step);
    return ev;
}

double model_fit(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size()) {
        throw ConfigError("model_fit: length mismatch (" + std::to_string(y.size()) + " vs " +
                          std::to_string(y_hat.size()) + ")");
    }
    if (y.empty()) throw ConfigError("model_fit: empty sequences");
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double err = 0.0;
    double spread = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        err += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        spread += (y[i] - mean) * (y[i] - mean);
    }
    if (!(spread > 0.0)) throw NumericalError("model_fit undefined: measured output is constant");
    return 100.0 * (1.0 - std::sqrt(err) / std::sqrt(spread));
}

std::vector<std::complex<double>> monic_roots(std::span<const double> coeffs) {
    const auto n = static_cast<Eigen::Index>(coeffs.size());
    if (n == 0) return {};
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) companion(0, i) = -coeffs[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
    std::vector<std::complex<double>> roots(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) roots[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    return roots;
}

Stability check_stability(const PolyModel& model) {
    Stability s;
    for (const auto& r : monic_roots(model.a)) s.root_magnitudes.push_back(std::abs(r));
    std::sort(s.root_magnitudes.begin(), s.root_magnitudes.end(), std::greater<>());
    s.stable = std::all_of(s.root_magnitudes.begin(), s.root_magnitudes.end(),
                           [](double m) { return m < 1.0; });
    return s;
}

} // namespace thermoid::linmodels
