#include "thermoid/statespace.hpp"

#include "least_squares.hpp"
#include "thermoid/error.hpp"

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <cmath>

namespace thermoid::statespace {

using dataset::TimeSeriesTable;
using linmodels::Channels;
using linmodels::PolyModel;

double SSModel::spectral_radius() const {
    if (A.rows() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

void SSModel::validate() const {
    const auto n = A.rows();
    const auto m = B.cols();
    if (A.cols() != n || B.rows() != n || C.rows() != 1 || C.cols() != n || D.rows() != 1 ||
        D.cols() != m || K.rows() != n || K.cols() != 1) {
        throw ConfigError("state-space matrices have inconsistent dimensions");
    }
    if (static_cast<Eigen::Index>(input_names.size()) != m) {
        throw ConfigError("state-space model has " + std::to_string(m) + " input columns but " +
                          std::to_string(input_names.size()) + " input names");
    }
}

SSModel from_poly(const PolyModel& model) {
    model.validate();
    const std::size_t m = model.n_inputs();
    std::size_t n = std::max(model.na(), model.nc());
    for (std::size_t j = 0; j < m; ++j) {
        n = std::max(n, static_cast<std::size_t>(model.delays[j]) + model.b[j].size() - 1);
    }
    n = std::max<std::size_t>(n, 1);

    auto coeff = [](const std::vector<double>& v, std::size_t i) { return i >= 1 && i <= v.size() ? v[i - 1] : 0.0; };
    // beta_j(k): coefficient of q^-k in q^-d_j B_j(q).
    auto beta = [&](std::size_t j, std::size_t k) {
        const auto d = static_cast<std::size_t>(model.delays[j]);
        if (k < d || k - d >= model.b[j].size()) return 0.0;
        return model.b[j][k - d];
    };

    const auto ni = static_cast<Eigen::Index>(n);
    const auto mi = static_cast<Eigen::Index>(m);
    SSModel ss;
    ss.A = Eigen::MatrixXd::Zero(ni, ni);
    ss.B = Eigen::MatrixXd::Zero(ni, mi);
    ss.C = Eigen::MatrixXd::Zero(1, ni);
    ss.D = Eigen::MatrixXd::Zero(1, mi);
    ss.K = Eigen::MatrixXd::Zero(ni, 1);
    ss.C(0, 0) = 1.0;
    for (std::size_t j = 0; j < m; ++j) ss.D(0, static_cast<Eigen::Index>(j)) = beta(j, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        const auto r = static_cast<Eigen::Index>(i - 1);
        const double ai = coeff(model.a, i);
        ss.A(r, 0) = -ai;
        if (i < n) ss.A(r, r + 1) = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
            ss.B(r, static_cast<Eigen::Index>(j)) = beta(j, i) - ai * beta(j, 0);
        }
        ss.K(r, 0) = coeff(model.c, i) - ai;
    }
    ss.input_names = model.input_names;
    ss.output_name = model.output_name;
    return ss;
}

SSModel similarity_transform(const SSModel& model, const Eigen::MatrixXd& T) {
    const Eigen::MatrixXd Ti = T.inverse();
    SSModel out = model;
    out.A = T * model.A * Ti;
    out.B = T * model.B;
    out.C = model.C * Ti;
    out.K = T * model.K;
    return out;
}

std::vector<Eigen::RowVectorXd> markov_parameters(const SSModel& model, std::size_t count) {
    std::vector<Eigen::RowVectorXd> h;
    if (count == 0) return h;
    h.push_back(model.D.row(0));
    Eigen::MatrixXd CA = model.C;
    for (std::size_t k = 1; k < count; ++k) {
        h.push_back((CA * model.B).row(0));
        CA = CA * model.A;
    }
    return h;
}

Realization ho_kalman(std::span<const Eigen::RowVectorXd> markov, int order, int rows, int cols,
                      double rank_tolerance) {
    if (order < 1) throw ConfigError("state-space order must be >= 1");
    if (rows < order || cols < order) {
        throw ConfigError("Hankel matrix must have at least `order` block rows and columns");
    }
    if (markov.size() < static_cast<std::size_t>(rows + cols + 1)) {
        throw ConfigError("ho_kalman needs " + std::to_string(rows + cols + 1) +
                          " Markov parameters, got " + std::to_string(markov.size()));
    }
    const Eigen::Index m = markov.front().size();
    Eigen::MatrixXd H(rows, cols * m);
    Eigen::MatrixXd H1(rows, cols * m);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            H.block(i, j * m, 1, m) = markov[static_cast<std::size_t>(1 + i + j)];
            H1.block(i, j * m, 1, m) = markov[static_cast<std::size_t>(2 + i + j)];
        }
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    if (s.size() < order || s(0) <= 0.0 || s(order - 1) <= rank_tolerance * s(0)) {
        throw NumericalError("Hankel matrix has numerical rank below the requested order " +
                             std::to_string(order) + "; try a lower order");
    }
    const Eigen::MatrixXd U = svd.matrixU().leftCols(order);
    const Eigen::MatrixXd V = svd.matrixV().leftCols(order);
    const Eigen::VectorXd sq = s.head(order).cwiseSqrt();
    const Eigen::VectorXd isq = sq.cwiseInverse();

    Realization r;
    r.singular_values = s;
    auto& ss = r.model;
    ss.A = isq.asDiagonal() * U.transpose() * H1 * V * isq.asDiagonal();
    const Eigen::MatrixXd ctrb = sq.asDiagonal() * V.transpose(); // order x (cols * m)
    const Eigen::MatrixXd obsv = U * sq.asDiagonal();             // rows x order
    ss.B = ctrb.leftCols(m);
    ss.C = obsv.topRows(1);
    ss.D = markov.front();
    ss.K = Eigen::MatrixXd::Zero(order, 1);
    return r;
}

std::vector<double> simulate_ss(const SSModel& model, std::span<const std::vector<double>> inputs,
                                const std::optional<Eigen::VectorXd>& x0,
                                std::optional<std::size_t> length) {
    model.validate();
    if (static_cast<Eigen::Index>(inputs.size()) != model.n_inputs()) {
        throw ConfigError("state-space model expects " + std::to_string(model.n_inputs()) +
                          " inputs, got " + std::to_string(inputs.size()));
    }
    const std::size_t n = length.value_or(inputs.empty() ? 0 : inputs.front().size());
    for (const auto& u : inputs) {
        if (u.size() != n) throw ConfigError("input sequences must all have the output length");
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(model.order());
    if (x0) {
        if (x0->size() != model.order()) throw ConfigError("initial state has the wrong dimension");
        x = *x0;
    }
    const auto m = model.n_inputs();
    Eigen::VectorXd u(m);
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) {
        for (Eigen::Index j = 0; j < m; ++j) u(j) = inputs[static_cast<std::size_t>(j)][t];
        y[t] = (model.C * x)(0) + (model.D * u)(0);
        x = model.A * x + model.B * u;
    }
    return y;
}

namespace {

std::vector<std::vector<double>> input_columns(const SSModel& model, const TimeSeriesTable& table) {
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

/// One-step predictor x_{t+1} = A x + B u + K (y - C x - D u).
std::vector<double> one_step(const SSModel& model, std::span<const std::vector<double>> inputs,
                             std::span<const double> y, const Eigen::VectorXd& x0) {
    const auto m = model.n_inputs();
    Eigen::VectorXd x = x0;
    Eigen::VectorXd u(m);
    std::vector<double> yhat(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) {
        for (Eigen::Index j = 0; j < m; ++j) u(j) = inputs[static_cast<std::size_t>(j)][t];
        yhat[t] = (model.C * x)(0) + (model.D * u)(0);
        x = model.A * x + model.B * u + model.K.col(0) * (y[t] - yhat[t]);
    }
    return yhat;
}

} // namespace

std::size_t initial_state_window(const SSModel& model) {
    return std::max<std::size_t>(2 * static_cast<std::size_t>(model.order()), 10);
}

Eigen::VectorXd estimate_initial_state(const SSModel& model, const TimeSeriesTable& table,
                                       std::size_t window) {
    const auto xs = input_columns(model, table);
    const auto y = table.values(model.output_name);
    window = std::min(window, table.n_rows());
    const auto zero_state = simulate_ss(model, xs, std::nullopt, table.n_rows());
    const auto n = model.order();
    Eigen::MatrixXd O(static_cast<Eigen::Index>(window), n);
    Eigen::VectorXd r(static_cast<Eigen::Index>(window));
    Eigen::MatrixXd CA = model.C;
    for (std::size_t t = 0; t < window; ++t) {
        const auto row = static_cast<Eigen::Index>(t);
        O.row(row) = CA;
        r(row) = y[t] - zero_state[t];
        CA = CA * model.A;
    }
    return detail::solve_min_norm(O, r, 1e-12).theta;
}

linmodels::Evaluation evaluate_ss(const SSModel& model, const TimeSeriesTable& table,
                                  std::size_t score_from) {
    const auto xs = input_columns(model, table);
    const auto y = table.values(model.output_name);
    const std::size_t window = initial_state_window(model);
    const Eigen::VectorXd x0 = estimate_initial_state(model, table, window);
    const auto free = simulate_ss(model, xs, x0, table.n_rows());
    const auto pred = one_step(model, xs, y, x0);

    linmodels::Evaluation ev;
    ev.first_index = std::max(std::min(window, table.n_rows()), score_from);
    if (ev.first_index >= table.n_rows()) throw DataError("nothing left to score after warmup");
    const auto skip = static_cast<std::ptrdiff_t>(ev.first_index);
    ev.measured.assign(y.begin() + skip, y.end());
    ev.free_run.assign(free.begin() + skip, free.end());
    ev.one_step.assign(pred.begin() + skip, pred.end());
    ev.free_run_fit_pct = linmodels::model_fit(ev.measured, ev.free_run);
    ev.one_step_fit_pct = linmodels::model_fit(ev.measured, ev.one_step);
    return ev;
}

namespace {

struct ArxStage {
    PolyModel model;
    Eigen::VectorXd residuals; // one-step residuals, zero before the first usable row
    int order = 0;
};

ArxStage high_order_arx(const TimeSeriesTable& train, const Channels& channels, int order,
                        double rank_tolerance) {
    const std::vector<int> delays{0};
    for (int p = order; p >= 1; --p) {
        const auto reg = linmodels::build_regressors(train, channels, p, p, delays);
        if (reg.regressors.rows() <= reg.regressors.cols()) continue;
        const auto sol = detail::solve_min_norm(reg.regressors, reg.target, rank_tolerance);
        if (sol.rank < reg.regressors.cols()) continue;

        ArxStage st;
        st.order = p;
        st.model.output_name = channels.output;
        st.model.input_names = channels.inputs;
        st.model.delays.assign(channels.inputs.size(), 0);
        Eigen::Index k = 0;
        for (int i = 0; i < p; ++i) st.model.a.push_back(sol.theta(k++));
        for (std::size_t j = 0; j < channels.inputs.size(); ++j) {
            std::vector<double> bj;
            for (int i = 0; i <= p; ++i) bj.push_back(sol.theta(k++));
            st.model.b.push_back(std::move(bj));
        }
        st.residuals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(train.n_rows()));
        st.residuals.tail(reg.target.size()) = reg.target - reg.regressors * sol.theta;
        return st;
    }
    throw NumericalError("no full-rank ARX model found for the state-space Markov stage");
}

std::vector<Eigen::RowVectorXd> impulse_response(const PolyModel& model, std::size_t count) {
    const auto m = model.n_inputs();
    std::vector<Eigen::RowVectorXd> h(count, Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(m)));
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<std::vector<double>> u(m, std::vector<double>(count, 0.0));
        u[j][0] = 1.0;
        const auto y = linmodels::simulate(model, u, {}, count);
        for (std::size_t k = 0; k < count; ++k) h[k](static_cast<Eigen::Index>(j)) = y[k];
    }
    return h;
}

/// Fits x0 and K jointly from
///   y_t - C x^u_t - D u_t - e_t = C A^t x0 + C S_t K,  S_{t+1} = A S_t + e_t I,
/// where x^u is the zero-state input response and e the ARX residuals.
void fit_innovation_gain(SSModel& model, const TimeSeriesTable& train, const Eigen::VectorXd& e) {
    const auto xs = input_columns(model, train);
    const auto y = train.values(model.output_name);
    const auto free = simulate_ss(model, xs, std::nullopt, train.n_rows());
    const auto n = model.order();
    const auto rows = static_cast<Eigen::Index>(train.n_rows());

    Eigen::MatrixXd X(rows, 2 * n);
    Eigen::VectorXd target(rows);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    Eigen::RowVectorXd CA = model.C;
    for (Eigen::Index t = 0; t < rows; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        X.block(t, 0, 1, n) = CA;
        X.block(t, n, 1, n) = model.C * S;
        target(t) = y[ts] - free[ts] - e(t);
        S = model.A * S;
        S.diagonal().array() += e(t);
        CA = CA * model.A;
    }
    const auto sol = detail::solve_min_norm(X, target, 1e-12);
    model.K = sol.theta.tail(n);
}

struct SsPemFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const SSModel* shape;
    const std::vector<std::vector<double>>* xs;
    std::span<const double> y;

    int inputs_count() const {
        const auto n = shape->order();
        const auto m = shape->n_inputs();
        return static_cast<int>(n * n + n * m + n + m + n);
    }
    int inputs() const { return inputs_count(); }
    int values() const { return static_cast<int>(y.size()); }

    static Eigen::VectorXd pack(const SSModel& s) {
        const auto n = s.order();
        const auto m = s.n_inputs();
        Eigen::VectorXd p(n * n + n * m + n + m + n);
        p << Eigen::Map<const Eigen::VectorXd>(s.A.data(), n * n),
            Eigen::Map<const Eigen::VectorXd>(s.B.data(), n * m),
            Eigen::Map<const Eigen::VectorXd>(s.C.data(), n),
            Eigen::Map<const Eigen::VectorXd>(s.D.data(), m),
            Eigen::Map<const Eigen::VectorXd>(s.K.data(), n);
        return p;
    }

    SSModel unpack(const Eigen::VectorXd& p) const {
        SSModel s = *shape;
        const auto n = s.order();
        const auto m = s.n_inputs();
        Eigen::Index k = 0;
        s.A = Eigen::Map<const Eigen::MatrixXd>(p.data() + k, n, n);
        k += n * n;
        s.B = Eigen::Map<const Eigen::MatrixXd>(p.data() + k, n, m);
        k += n * m;
        s.C = Eigen::Map<const Eigen::MatrixXd>(p.data() + k, 1, n);
        k += n;
        s.D = Eigen::Map<const Eigen::MatrixXd>(p.data() + k, 1, m);
        k += m;
        s.K = Eigen::Map<const Eigen::MatrixXd>(p.data() + k, n, 1);
        return s;
    }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& fvec) const {
        const SSModel s = unpack(p);
        const auto pred = one_step(s, *xs, y, Eigen::VectorXd::Zero(s.order()));
        fvec.resize(static_cast<Eigen::Index>(y.size()));
        for (std::size_t t = 0; t < y.size(); ++t) {
            const double r = y[t] - pred[t];
            fvec(static_cast<Eigen::Index>(t)) = std::isfinite(r) ? r : 1e150;
        }
        return 0;
    }
};

} // namespace

SSFitResult fit_ss(const TimeSeriesTable& train, const Channels& channels, int order,
                   const SSFitOptions& options) {
    if (order < 1) throw ConfigError("state-space order must be >= 1");
    const auto m = static_cast<int>(channels.inputs.size());
    const auto needed = static_cast<std::size_t>(options.samples_per_parameter) *
                        static_cast<std::size_t>(order * (m + 2));
    if (train.n_rows() < needed) {
        throw DataError("order " + std::to_string(order) + " state-space fit needs at least " +
                        std::to_string(needed) + " samples, got " + std::to_string(train.n_rows()) +
                        "; lower the order");
    }

    const int arx_order = options.arx_order > 0 ? options.arx_order : 2 * order + 5;
    auto stage = high_order_arx(train, channels, arx_order, options.rank_tolerance);
    const int size = options.hankel_size > 0 ? options.hankel_size : std::max(order + 1, stage.order);
    const auto h = impulse_response(stage.model, static_cast<std::size_t>(2 * size + 1));
    auto real = ho_kalman(h, order, size, size, options.rank_tolerance);

    SSFitResult result;
    result.model = std::move(real.model);
    result.model.input_names = channels.inputs;
    result.model.output_name = channels.output;
    result.hankel_singular_values = std::move(real.singular_values);
    result.arx_order_used = stage.order;
    result.stable = result.model.spectral_radius() < 1.0;

    if (options.estimate_innovation_gain && result.stable) {
        fit_innovation_gain(result.model, train, stage.residuals);
    }

    if (options.pem_refine) {
        const auto xs = input_columns(result.model, train);
        SsPemFunctor f{&result.model, &xs, train.values(channels.output)};
        Eigen::NumericalDiff<SsPemFunctor> nd(f);
        Eigen::LevenbergMarquardt<Eigen::NumericalDiff<SsPemFunctor>> lm(nd);
        lm.parameters.maxfev = options.pem_max_iterations * (f.inputs_count() + 1);
        Eigen::VectorXd p = SsPemFunctor::pack(result.model);
        Eigen::VectorXd r0;
        f(p, r0);
        Eigen::VectorXd q = p;
        lm.minimize(q);
        Eigen::VectorXd r1;
        if (q.allFinite()) {
            f(q, r1);
            if (r1.squaredNorm() < r0.squaredNorm()) result.model = f.unpack(q);
        }
        result.stable = result.model.spectral_radius() < 1.0;
    }

    auto& report = result.report;
    report.method = std::to_string(order) + " S.S.";
    report.converged = true;
    report.iterations_used = 0;
    const auto ev = evaluate_ss(result.model, train);
    report.train_fit_pct = ev.free_run_fit_pct;
    report.train_one_step_fit_pct = ev.one_step_fit_pct;
    Eigen::Map<const Eigen::VectorXd> meas(ev.measured.data(), static_cast<Eigen::Index>(ev.measured.size()));
    Eigen::Map<const Eigen::VectorXd> pred(ev.one_step.data(), static_cast<Eigen::Index>(ev.one_step.size()));
    report.residual_variance = (meas - pred).squaredNorm() / static_cast<double>(ev.measured.size());
    return result;
}

} // namespace thermoid::statespace
