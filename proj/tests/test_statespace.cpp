#include "support.hpp"
#include "thermoid/error.hpp"
#include "thermoid/linmodels.hpp"
#include "thermoid/statespace.hpp"
#include "thermoid/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace thermoid;
using namespace thermoid::statespace;
using linmodels::Channels;
using linmodels::PolyModel;
using thermoid::testing::make_table;

namespace {

SSModel second_order_truth() {
    SSModel m;
    m.A.resize(2, 2);
    m.A << 0.6, 0.3, -0.2, 0.7;
    m.B.resize(2, 1);
    m.B << 1.0, 0.5;
    m.C.resize(1, 2);
    m.C << 1.0, -0.4;
    m.D = Eigen::MatrixXd::Constant(1, 1, 0.2);
    m.K = Eigen::MatrixXd::Zero(2, 1);
    m.input_names = {"u"};
    m.output_name = "y";
    return m;
}

synth::Generated noiseless_ss(std::size_t n, std::uint64_t seed) {
    synth::GeneratorSpec spec;
    spec.model = second_order_truth();
    spec.inputs = {synth::InputProcess{}};
    spec.noise_std = 0.0;
    spec.n_samples = n;
    spec.seed = seed;
    return synth::generate(spec);
}

std::vector<std::vector<double>> inputs_of(const dataset::TimeSeriesTable& t, const std::vector<std::string>& names) {
    std::vector<std::vector<double>> xs;
    for (const auto& n : names) xs.emplace_back(t.values(n).begin(), t.values(n).end());
    return xs;
}

double rms(const std::vector<double>& a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

Eigen::MatrixXd random_matrix(synth::Rng& rng, Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

} // namespace

TEST(SimulateSs, ZeroInZeroOut) {
    const auto y = simulate_ss(second_order_truth(), std::vector<std::vector<double>>{std::vector<double>(20, 0.0)});
    for (double v : y) EXPECT_EQ(v, 0.0);
}

TEST(SimulateSs, ScalarImpulse) {
    SSModel m;
    m.A = Eigen::MatrixXd::Constant(1, 1, 0.5);
    m.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
    m.C = Eigen::MatrixXd::Constant(1, 1, 1.0);
    m.D = Eigen::MatrixXd::Zero(1, 1);
    m.K = Eigen::MatrixXd::Zero(1, 1);
    m.input_names = {"u"};
    std::vector<std::vector<double>> u{std::vector<double>(8, 0.0)};
    u[0][0] = 1.0;
    const auto y = simulate_ss(m, u);
    EXPECT_DOUBLE_EQ(y[0], 0.0);
    for (std::size_t t = 1; t < y.size(); ++t) EXPECT_DOUBLE_EQ(y[t], std::pow(0.5, static_cast<double>(t - 1)));
}

TEST(SimulateSs, DimensionMismatch) {
    const auto m = second_order_truth();
    EXPECT_THROW(simulate_ss(m, std::vector<std::vector<double>>{{1.0}, {2.0}}), ConfigError);
    EXPECT_THROW(simulate_ss(m, std::vector<std::vector<double>>{{1.0, 2.0}}, Eigen::VectorXd::Zero(3)),
                 ConfigError);
}

TEST(FromPoly, MatchesPolynomialSimulation) {
    synth::Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const auto pm = synth::random_stable_model(rng, 1 + trial % 5, trial % 4, 0, 1 + trial % 3);
        const auto ss = from_poly(pm);
        std::vector<std::vector<double>> u(pm.n_inputs(), std::vector<double>(200));
        for (auto& x : u) {
            for (auto& v : x) v = rng.normal();
        }
        const auto a = linmodels::simulate(pm, u);
        const auto b = simulate_ss(ss, u);
        for (std::size_t t = 0; t < a.size(); ++t) ASSERT_NEAR(a[t], b[t], 1e-9);
    }
}

TEST(FromPoly, InnovationGainReproducesOneStepPredictor) {
    // With K from the MA polynomial, the state-space one-step predictor is the
    // polynomial one once the residual history has started.
    const auto spec = synth::canonical_armax_fixture(400, 5);
    const auto table = synth::generate(spec).table;
    const auto& pm = std::get<PolyModel>(spec.model);
    const auto ss = from_poly(pm);
    const auto ev_poly = linmodels::evaluate(pm, table, 50);
    const auto ev_ss = evaluate_ss(ss, table, 50);
    ASSERT_EQ(ev_poly.one_step.size(), ev_ss.one_step.size());
    for (std::size_t i = 0; i < ev_poly.one_step.size(); ++i) EXPECT_NEAR(ev_poly.one_step[i], ev_ss.one_step[i], 1e-6);
}

TEST(SimilarityTransform, LeavesOutputUnchanged) {
    synth::Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const auto pm = synth::random_stable_model(rng, 2 + trial % 4, 2, 0, 2);
        const auto ss = from_poly(pm);
        Eigen::MatrixXd T = random_matrix(rng, ss.order(), ss.order());
        T.diagonal().array() += 3.0;
        const auto st = similarity_transform(ss, T);
        std::vector<std::vector<double>> u(2, std::vector<double>(150));
        for (auto& x : u) {
            for (auto& v : x) v = rng.normal();
        }
        const auto a = simulate_ss(ss, u);
        const auto b = simulate_ss(st, u);
        for (std::size_t t = 0; t < a.size(); ++t) ASSERT_NEAR(a[t], b[t], 1e-8);
    }
}

TEST(HoKalman, ReproducesMarkovParametersOfTrueSystem) {
    synth::Rng rng(11);
    for (int n : {1, 2, 3, 5}) {
        auto pm = synth::random_stable_model(rng, n, n - 1, 0, 2, 0.8);
        // Unit delays keep the minimal order at n.
        pm.delays = {1, 1};
        const auto truth = from_poly(pm);
        const int size = n + 2;
        const auto h = markov_parameters(truth, static_cast<std::size_t>(2 * size + 1));
        const auto real = ho_kalman(h, n, size, size);
        const auto back = markov_parameters(real.model, static_cast<std::size_t>(2 * n + 1));
        for (int k = 0; k <= 2 * n; ++k) {
            EXPECT_LT((back[static_cast<std::size_t>(k)] - h[static_cast<std::size_t>(k)]).cwiseAbs().maxCoeff(), 1e-8)
                << "n=" << n << " k=" << k;
        }
    }
}

TEST(HoKalman, RankDeficientHankelAdvisesLowerOrder) {
    const auto truth = second_order_truth();
    const auto h = markov_parameters(truth, 13);
    try {
        ho_kalman(h, 4, 6, 6);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("lower order"), std::string::npos);
    }
}

TEST(FitSs, NoiselessSecondOrderSystemExact) {
    const auto gen = noiseless_ss(2000, 13);
    const auto fit = fit_ss(gen.table, {"y", {"u"}}, 2);
    // Compare on fresh data: zero initial state on both sides.
    const auto fresh = noiseless_ss(500, 99).table;
    const auto u = inputs_of(fresh, {"u"});
    const auto y_true = simulate_ss(second_order_truth(), u);
    const auto y_fit = simulate_ss(fit.model, u);
    EXPECT_LT(rms(y_fit, y_true), 1e-6);
    EXPECT_TRUE(fit.stable);
    EXPECT_EQ(fit.report.method, "2 S.S.");
}

TEST(FitSs, OrderOneUnderfitsSecondOrderData) {
    const auto table = synth::generate(synth::canonical_armax_fixture(3000, 17)).table;
    const Channels ch{"y", {"u"}};
    const auto ss1 = fit_ss(table, ch, 1);
    const auto armax = linmodels::fit_armax(table, ch, [] {
        linmodels::FitOptions o;
        o.orders = {2, 1, 1};
        return o;
    }());
    EXPECT_LT(evaluate_ss(ss1.model, table, 20).free_run_fit_pct, linmodels::evaluate(armax.model, table, 20).free_run_fit_pct);
}

TEST(FitSs, TrainFitNonDecreasingInOrder) {
    const auto table = synth::generate(synth::canonical_armax_fixture(4000, 19)).table;
    SSFitOptions opts;
    opts.arx_order = 2 * 6 + 5;
    double previous = -INFINITY;
    for (int n : {1, 2, 4, 6}) {
        const auto fit = fit_ss(table, {"y", {"u"}}, n, opts);
        const double f = evaluate_ss(fit.model, table, 20).free_run_fit_pct;
        EXPECT_GE(f, previous - 1e-6) << "order " << n;
        previous = f;
    }
}

TEST(FitSs, TooFewSamplesForOrder) {
    const auto table = noiseless_ss(100, 23).table;
    EXPECT_THROW(fit_ss(table, {"y", {"u"}}, 6), DataError);
    EXPECT_THROW(fit_ss(table, {"y", {"u"}}, 0), ConfigError);
}

TEST(FitSs, InitialStateRecoveredFromData) {
    const auto truth = second_order_truth();
    const auto gen = noiseless_ss(300, 29);
    const auto u = inputs_of(gen.table, {"u"});
    Eigen::VectorXd x0(2);
    x0 << 1.5, -2.0;
    const auto y = simulate_ss(truth, u, x0);
    const auto table = make_table({{"y", y}, {"u", u[0]}});
    const auto est = estimate_initial_state(truth, table, initial_state_window(truth));
    EXPECT_LT((est - x0).cwiseAbs().maxCoeff(), 1e-9);
}
