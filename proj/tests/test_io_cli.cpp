#include "fixture.hpp"
#include "support.hpp"
#include "thermoid/cli.hpp"
#include "thermoid/error.hpp"
#include "thermoid/io.hpp"
#include "thermoid/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

using namespace thermoid;
using nlohmann::json;
using thermoid::testing::read_text;
using thermoid::testing::TempDir;
using thermoid::testing::write_text;

namespace {

dataset::TimeSeriesTable reload(const std::filesystem::path& csv, const std::string& first,
                                const std::vector<std::string>& rest) {
    std::vector<dataset::ColumnRole> roles{{first, dataset::Role::output}};
    for (const auto& r : rest) roles.push_back({r, dataset::Role::candidate_input});
    return dataset::load_csv(csv, dataset::Schema(roles), {});
}

bool python_jsonschema_available() {
    return std::system("python3 -c 'import jsonschema, referencing' >/dev/null 2>&1") == 0;
}

int validate_json(const std::filesystem::path& dir) {
    const auto cmd = "python3 '" + thermoid::testing::source_path("scripts/validate_json.py").string() + "' '" +
                     dir.string() + "' >/dev/null";
    return std::system(cmd.c_str());
}

io::SavedModel first_order_model() {
    linmodels::PolyModel m;
    m.a = {-0.5};
    m.b = {{1.0}};
    m.delays = {1};
    m.input_names = {"u"};
    m.output_name = "y";
    return {m, {0.0, {"u"}, {0.0}}};
}

struct CliRun {
    int code;
    std::string err;
};

CliRun run_cli(const std::vector<std::string>& args) {
    ::testing::internal::CaptureStdout();
    ::testing::internal::CaptureStderr();
    const int code = cli::run(args);
    ::testing::internal::GetCapturedStdout();
    return {code, ::testing::internal::GetCapturedStderr()};
}

class CliFixture : public ::testing::Test {
protected:
    TempDir dir{"cli"};
    std::filesystem::path config = thermoid::testing::write_fixture(dir.path());
    std::filesystem::path out = dir / "out";
};

} // namespace

TEST(ModelJson, PolynomialRoundTrip) {
    const auto spec = synth::canonical_armax_fixture(10, 0);
    io::SavedModel saved{std::get<linmodels::PolyModel>(spec.model), {1.25, {"u"}, {-0.5}}};
    const auto back = io::saved_model_from_json(json::parse(io::to_json(saved).dump()));
    const auto& a = std::get<linmodels::PolyModel>(saved.model);
    const auto& b = std::get<linmodels::PolyModel>(back.model);
    EXPECT_EQ(a.a, b.a);
    EXPECT_EQ(a.b, b.b);
    EXPECT_EQ(a.c, b.c);
    EXPECT_EQ(a.delays, b.delays);
    EXPECT_EQ(a.input_names, b.input_names);
    EXPECT_EQ(back.operating_point.output, 1.25);
    EXPECT_EQ(back.operating_point.inputs, std::vector<double>{-0.5});
}

TEST(ModelJson, StateSpaceRoundTrip) {
    synth::Rng rng(4);
    const auto ss = statespace::from_poly(synth::random_stable_model(rng, 3, 2, 2, 2));
    const auto back = std::get<statespace::SSModel>(
        io::saved_model_from_json(json::parse(io::to_json(io::SavedModel{ss, {0.0, ss.input_names, {0.0, 0.0}}}).dump())).model);
    EXPECT_EQ(ss.A, back.A);
    EXPECT_EQ(ss.B, back.B);
    EXPECT_EQ(ss.C, back.C);
    EXPECT_EQ(ss.D, back.D);
    EXPECT_EQ(ss.K, back.K);
}

TEST(ModelJson, MalformedIsDataError) {
    EXPECT_THROW(io::saved_model_from_json(json::parse(R"({"kind": "polynomial"})")), DataError);
    EXPECT_THROW(io::saved_model_from_json(json::parse(R"({"kind": "neural"})")), DataError);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run_cli({}).code, cli::usage_error);
    EXPECT_EQ(run_cli({"frobnicate"}).code, cli::usage_error);
    EXPECT_EQ(run_cli({"fit"}).code, cli::usage_error);
    const auto r = run_cli({"nmi", "--config", "/no/such/config.json"});
    EXPECT_EQ(r.code, cli::usage_error);
    EXPECT_NE(r.err.find("/no/such/config.json"), std::string::npos);
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(CliFixture, NmiWritesMatrixAndRanking) {
    ASSERT_EQ(run_cli({"nmi", "--config", config.string(), "--out", out.string()}).code, 0);
    for (const auto* f : {"dependency_matrix.csv", "dependency_matrix.json", "ranking.csv", "selection.json"}) {
        EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
    }
    const auto sel = io::read_json(out / "selection.json");
    EXPECT_EQ(sel.at("selected"), json::array({"heater"}));
    EXPECT_TRUE(sel.contains("effective_config"));
    // The matrix CSV re-ingests with its label column ignored.
    const auto m = reload(out / "dependency_matrix.csv", "temp", {"heater", "fan", "noise"});
    EXPECT_EQ(m.n_rows(), 4u);
    EXPECT_EQ(m.values("temp")[0], 0.0);
    const auto rk = reload(out / "ranking.csv", "rank", {"value"});
    EXPECT_EQ(rk.n_rows(), 3u);
}

TEST(Cli, IdenticalColumnsGiveUnitOffDiagonal) {
    TempDir dir("cli");
    std::string csv = "a,b\n";
    for (int i = 0; i < 50; ++i) csv += std::to_string(i % 7) + "," + std::to_string(i % 7) + "\n";
    write_text(dir / "d.csv", csv);
    write_text(dir / "c.json", R"({"data": {"path": "d.csv", "roles": {"a": "output", "b": "input"},
                                           "split": {"train_fraction": 0.8}}})");
    ASSERT_EQ(run_cli({"nmi", "--config", (dir / "c.json").string(), "--out", dir.path().string()}).code, 0);
    const auto m = reload(dir / "dependency_matrix.csv", "a", {"b"});
    EXPECT_EQ(m.values("a")[0], 0.0);
    EXPECT_EQ(m.values("b")[0], 1.0);
    EXPECT_EQ(m.values("a")[1], 1.0);
}

TEST_F(CliFixture, FitArtifactsRoundTripThroughSimulate) {
    ASSERT_EQ(run_cli({"fit", "--config", config.string(), "--out", out.string()}).code, 0);
    for (const auto* f : {"model.json", "fit_report.json", "fit_report.txt", "predictions_train.csv",
                          "predictions_test1.csv", "predictions_test2.csv"}) {
        EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
    }
    const auto preds = reload(out / "predictions_train.csv", "measured", {"index", "free_run", "one_step"});
    EXPECT_GT(preds.n_rows(), 1900u);

    ASSERT_EQ(run_cli({"simulate", "--model", (out / "model.json").string(), "--input-csv",
                       (dir / "synth.csv").string(), "--out", out.string()})
                  .code,
              0);
    const auto sim = reload(out / "simulated.csv", "simulated", {"index"});
    // Simulating the whole file reproduces the train free-run, whose
    // recursion starts from the same leading samples.
    for (std::size_t i = 0; i < preds.n_rows(); ++i) {
        const auto t = static_cast<std::size_t>(preds.values("index")[i]);
        ASSERT_NEAR(sim.values("simulated")[t], preds.values("free_run")[i], 1e-12) << "t=" << t;
    }
}

TEST_F(CliFixture, FlagOverridesReachReport) {
    ASSERT_EQ(run_cli({"fit", "--config", config.string(), "--out", out.string(), "--order", "4", "--delay", "1",
                       "--inputs", "heater,fan"})
                  .code,
              0);
    const auto model = io::read_json(out / "model.json");
    EXPECT_EQ(model.at("orders").at("na"), 4);
    EXPECT_EQ(model.at("delays"), json::array({1, 1}));
    EXPECT_EQ(model.at("input_names"), json::array({"heater", "fan"}));
    const auto rep = io::read_json(out / "fit_report.json");
    EXPECT_EQ(rep.at("effective_config").at("selection").at("rule"), "explicit");
}

TEST(Cli, SimulateImpulseGivesGeometricResponse) {
    TempDir dir("cli");
    io::write_json(dir / "m.json", io::to_json(first_order_model()));
    write_text(dir / "u.csv", "u\n1\n0\n0\n0\n0\n0\n");
    ASSERT_EQ(run_cli({"simulate", "--model", (dir / "m.json").string(), "--input-csv", (dir / "u.csv").string(),
                       "--out", dir.path().string()})
                  .code,
              0);
    EXPECT_EQ(read_text(dir / "simulated.csv"), "index,simulated\n0,0\n1,1\n2,0.5\n3,0.25\n4,0.125\n5,0.0625\n");
}

TEST(Cli, SimulateMismatchedColumnsFails) {
    TempDir dir("cli");
    io::write_json(dir / "m.json", io::to_json(first_order_model()));
    write_text(dir / "v.csv", "v\n1\n0\n0\n");
    const auto r = run_cli({"simulate", "--model", (dir / "m.json").string(), "--input-csv",
                            (dir / "v.csv").string(), "--out", dir.path().string()});
    EXPECT_EQ(r.code, cli::data_error);
    EXPECT_NE(r.err.find("'u'"), std::string::npos);
}

TEST_F(CliFixture, CompareTableHasEveryZooRow) {
    auto doc = io::read_json(config);
    doc["zoo"] = json::parse(R"([
        {"method": "armax", "order": 4}, {"method": "arx", "order": 4}, {"method": "arx", "order": 10},
        {"method": "arx", "order": 30}, {"method": "reg_armax", "order": 4, "ridge_lambda": "gcv"},
        {"method": "ss", "order": 1}, {"method": "ss", "order": 6}, {"method": "ss", "order": 15},
        {"method": "ss", "order": 30}])");
    io::write_json(config, doc);
    ASSERT_EQ(run_cli({"compare", "--config", config.string(), "--out", out.string()}).code, 0);
    const auto table = io::read_json(out / "comparison.json");
    const std::vector<std::string> labels{"4th ARMAX", "4th ARX",     "10th ARX",  "30th ARX", "4th Reg. ARMAX",
                                          "1st S.S.",  "6th S.S.",    "15th S.S.", "30th S.S."};
    ASSERT_EQ(table.at("rows").size(), labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) EXPECT_EQ(table.at("rows")[i].at("label"), labels[i]);
    const auto text = read_text(out / "comparison.txt");
    for (const auto& l : labels) EXPECT_NE(text.find(l), std::string::npos) << l;
    const auto csv = reload(out / "comparison.csv", "train_fit_pct", {"order", "test1_fit_pct"});
    EXPECT_GE(csv.n_rows(), 1u);
}

TEST_F(CliFixture, EmptyZooFails) {
    auto doc = io::read_json(config);
    doc["zoo"] = json::array();
    io::write_json(config, doc);
    const auto r = run_cli({"compare", "--config", config.string(), "--out", out.string()});
    EXPECT_EQ(r.code, cli::usage_error);
    EXPECT_NE(r.err.find("zoo"), std::string::npos);
}

TEST_F(CliFixture, MissingDataFileIsDataError) {
    std::filesystem::remove(dir / "synth.csv");
    EXPECT_EQ(run_cli({"nmi", "--config", config.string(), "--out", out.string()}).code, cli::data_error);
}

TEST_F(CliFixture, ReportIsDeterministic) {
    const auto a = dir / "a";
    const auto b = dir / "b";
    ASSERT_EQ(run_cli({"report", "--config", config.string(), "--out", a.string()}).code, 0);
    ASSERT_EQ(run_cli({"report", "--config", config.string(), "--out", b.string()}).code, 0);
    for (const auto* f : {"dependency_matrix.csv", "ranking.csv", "selection.json", "model.json", "fit_report.json",
                          "predictions_test1.csv"}) {
        EXPECT_EQ(read_text(a / f), read_text(b / f)) << f;
    }
    auto ca = io::read_json(a / "comparison.json");
    auto cb = io::read_json(b / "comparison.json");
    for (auto* c : {&ca, &cb}) {
        for (auto& r : (*c)["rows"]) r.erase("wall_time_ms");
    }
    EXPECT_EQ(ca, cb);
}

TEST_F(CliFixture, SynthWritesTableAndTruth) {
    ASSERT_EQ(run_cli({"synth", "--config", thermoid::testing::source_path("configs/fixture_generator.json").string(),
                       "--seed", "0", "--out", out.string()})
                  .code,
              0);
    EXPECT_EQ(read_text(out / "synth.csv"), read_text(dir / "synth.csv"));
    const auto truth = io::read_json(out / "synth_truth.json");
    EXPECT_EQ(truth.at("seed"), 0);
    const auto back = io::generator_from_json(truth);
    EXPECT_EQ(synth::generate(back).table.values("temp")[17], synth::generate(thermoid::testing::fixture_generator()).table.values("temp")[17]);
}

TEST_F(CliFixture, EmittedJsonMatchesSchemas) {
    if (!python_jsonschema_available()) GTEST_SKIP() << "python3 jsonschema not installed";
    ASSERT_EQ(run_cli({"report", "--config", config.string(), "--out", out.string()}).code, 0);
    ASSERT_EQ(run_cli({"synth", "--samples", "100", "--out", out.string()}).code, 0);
    EXPECT_EQ(validate_json(out), 0);
    // The validator is not vacuous.
    auto model = io::read_json(out / "model.json");
    model.erase("kind");
    io::write_json(dir / "model.json", model);
    EXPECT_NE(validate_json(dir / "model.json"), 0);
}
