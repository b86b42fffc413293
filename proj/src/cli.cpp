#include "thermoid/cli.hpp"

#include "csv_util.hpp"
#include "thermoid/error.hpp"
#include "thermoid/io.hpp"
#include "thermoid/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace thermoid::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
    std::string config;
    std::string out = ".";
    std::vector<std::string> inputs;
    std::optional<int> order;
    std::optional<int> delay;
    std::optional<int> bins;
    std::optional<std::string> strategy;
    std::optional<int> top_k;
    std::optional<double> threshold;
    std::optional<std::string> metric;
};

void init_logging() {
    auto logger = spdlog::get("thermoid");
    if (!logger) {
        logger = spdlog::stderr_color_mt("thermoid");
        spdlog::set_default_logger(logger);
    }
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv(log_level_env)) level = spdlog::level::from_str(env);
    spdlog::set_level(level);
}

fs::path prepare_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + dir + "'");
    return fs::path(dir);
}

/// Flags win over file values.
pipeline::PipelineConfig effective_config(const Overrides& o) {
    if (o.config.empty()) throw ConfigError("--config is required");
    auto cfg = pipeline::load_config(o.config);
    if (o.order) cfg.fit.orders = {*o.order, *o.order, *o.order};
    if (o.delay) cfg.fit.delays = {*o.delay};
    if (o.bins) cfg.binning.n_bins = *o.bins;
    if (o.strategy) cfg.binning.strategy = infotheory::parse_strategy(*o.strategy);
    if (o.metric) cfg.metric = infotheory::parse_metric(*o.metric);
    if (o.top_k) {
        if (*o.top_k < 1) throw ConfigError("--top-k must be >= 1");
        cfg.selection.kind = pipeline::SelectionRule::Kind::top_k;
        cfg.selection.k = *o.top_k;
    }
    if (o.threshold) {
        cfg.selection.kind = pipeline::SelectionRule::Kind::threshold;
        cfg.selection.tau = *o.threshold;
    }
    if (!o.inputs.empty()) {
        cfg.selection.kind = pipeline::SelectionRule::Kind::explicit_list;
        cfg.selection.inputs = o.inputs;
    }
    cfg.fit.validate();
    return cfg;
}

std::string file_label(const std::string& label) {
    std::string s;
    for (char c : label) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    return s;
}

pipeline::SelectionReport do_nmi(const pipeline::PipelineConfig& cfg, const pipeline::Datasets& data,
                                 const fs::path& out) {
    auto sel = pipeline::run_selection(cfg, data.train);
    io::write_file(out / "dependency_matrix.csv", io::matrix_csv(sel.matrix));
    io::write_json(out / "dependency_matrix.json", io::to_json(sel.matrix));
    io::write_file(out / "ranking.csv", io::ranking_csv(sel.ranking));
    json doc = io::to_json(sel);
    doc["effective_config"] = pipeline::config_to_json(cfg);
    io::write_json(out / "selection.json", doc);
    return sel;
}

pipeline::InferenceReport do_fit(const pipeline::PipelineConfig& cfg, const pipeline::SelectionReport& sel,
                                 const pipeline::Datasets& data, const fs::path& out) {
    auto rep = pipeline::run_inference(cfg, sel, data);
    io::write_json(out / "model.json", io::to_json(io::SavedModel{rep.fit.model, rep.operating_point}));
    io::write_json(out / "fit_report.json", io::to_json(rep));
    io::write_file(out / "fit_report.txt", io::fit_report_text(rep.fit));
    io::write_file(out / "predictions_train.csv", io::predictions_csv(rep.train_evaluation));
    for (const auto& t : rep.tests) {
        io::write_file(out / ("predictions_" + file_label(t.label) + ".csv"), io::predictions_csv(t.evaluation));
    }
    return rep;
}

pipeline::ComparisonTable do_compare(const pipeline::PipelineConfig& cfg, const std::vector<std::string>& inputs,
                                     const pipeline::Datasets& data, const fs::path& out) {
    auto table = pipeline::compare_models(cfg, inputs, data);
    io::write_file(out / "comparison.txt", io::comparison_text(table));
    io::write_file(out / "comparison.csv", io::comparison_csv(table));
    io::write_json(out / "comparison.json", io::to_json(table));
    return table;
}

std::vector<std::string> comparison_inputs(const pipeline::PipelineConfig& cfg, const Overrides& o,
                                           const pipeline::Datasets& data) {
    if (!o.inputs.empty()) return o.inputs;
    if (!cfg.zoo_inputs.empty()) return cfg.zoo_inputs;
    return pipeline::run_selection(cfg, data.train).selected;
}

int cmd_nmi(const Overrides& o) {
    const auto cfg = effective_config(o);
    const auto out = prepare_out(o.out);
    const auto data = pipeline::load_datasets(cfg);
    const auto sel = do_nmi(cfg, data, out);
    std::cout << io::matrix_text(sel.matrix) << '\n' << io::ranking_text(sel);
    return ok;
}

int cmd_fit(const Overrides& o) {
    const auto cfg = effective_config(o);
    const auto out = prepare_out(o.out);
    const auto data = pipeline::load_datasets(cfg);
    const auto sel = do_nmi(cfg, data, out);
    const auto rep = do_fit(cfg, sel, data, out);
    std::cout << io::ranking_text(sel) << '\n' << io::fit_report_text(rep.fit);
    return ok;
}

int cmd_compare(const Overrides& o) {
    const auto cfg = effective_config(o);
    if (cfg.zoo.empty()) throw ConfigError("model zoo is empty");
    const auto out = prepare_out(o.out);
    const auto data = pipeline::load_datasets(cfg);
    const auto table = do_compare(cfg, comparison_inputs(cfg, o, data), data, out);
    std::cout << io::comparison_text(table);
    return ok;
}

int cmd_report(const Overrides& o) {
    const auto cfg = effective_config(o);
    const auto out = prepare_out(o.out);
    const auto data = pipeline::load_datasets(cfg);
    const auto sel = do_nmi(cfg, data, out);
    const auto rep = do_fit(cfg, sel, data, out);
    std::string text = io::matrix_text(sel.matrix) + "\n" + io::ranking_text(sel) + "\n" + io::fit_report_text(rep.fit);
    if (!cfg.zoo.empty()) {
        const auto inputs = !o.inputs.empty() ? o.inputs : !cfg.zoo_inputs.empty() ? cfg.zoo_inputs : sel.selected;
        text += "\n" + io::comparison_text(do_compare(cfg, inputs, data, out));
    }
    io::write_file(out / "report.txt", text);
    std::cout << text;
    return ok;
}

std::vector<std::string> csv_header(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV file '" + path.string() + "' is empty");
    auto fields = detail::split_csv_line(line);
    for (auto& f : fields) f = detail::trim(f);
    return fields;
}

/// Input columns are shifted by the stored operating point exactly as the
/// fit did. When the CSV also carries the measured output, its first samples
/// seed the recursion (polynomial) or the initial state (state space).
int cmd_simulate(const std::string& model_path, const std::string& input_csv, const std::string& out_dir) {
    if (model_path.empty()) throw ConfigError("--model is required");
    if (input_csv.empty()) throw ConfigError("--input-csv is required");
    const auto saved = io::saved_model_from_json(io::read_json(model_path));
    const auto& names =
        std::visit([](const auto& m) -> const std::vector<std::string>& { return m.input_names; }, saved.model);
    const auto& output =
        std::visit([](const auto& m) -> const std::string& { return m.output_name; }, saved.model);

    const auto header = csv_header(input_csv);
    for (const auto& n : names) {
        if (std::find(header.begin(), header.end(), n) == header.end()) {
            throw DataError("input CSV lacks model input column '" + n + "'");
        }
    }
    const bool has_output = std::find(header.begin(), header.end(), output) != header.end();
    if (!has_output && names.empty()) throw DataError("input CSV lacks the output column '" + output + "'");

    std::vector<dataset::ColumnRole> roles;
    const std::string anchor = has_output ? output : names.front();
    roles.push_back({anchor, dataset::Role::output});
    for (const auto& n : names) {
        if (n != anchor) roles.push_back({n, dataset::Role::candidate_input});
    }
    const auto raw = dataset::load_csv(input_csv, dataset::Schema(roles), {});

    const auto& op = saved.operating_point;
    dataset::Standardization centre;
    centre.stats[output] = {op.output, 1.0};
    for (std::size_t j = 0; j < names.size(); ++j) centre.stats[names[j]] = {op.inputs[j], 1.0};
    const auto table = dataset::standardize(raw, centre).table;

    std::vector<double> sim;
    if (const auto* pm = std::get_if<linmodels::PolyModel>(&saved.model)) {
        if (has_output) {
            sim = linmodels::simulate_on(*pm, table);
        } else {
            std::vector<std::vector<double>> xs;
            for (const auto& n : names) xs.emplace_back(table.values(n).begin(), table.values(n).end());
            sim = linmodels::simulate(*pm, xs, {}, table.n_rows());
        }
    } else {
        const auto& ss = std::get<statespace::SSModel>(saved.model);
        std::vector<std::vector<double>> xs;
        for (const auto& n : names) xs.emplace_back(table.values(n).begin(), table.values(n).end());
        std::optional<Eigen::VectorXd> x0;
        if (has_output) {
            x0 = statespace::estimate_initial_state(
                ss, table, std::min(table.n_rows(), statespace::initial_state_window(ss)));
        }
        sim = statespace::simulate_ss(ss, xs, x0, table.n_rows());
    }

    std::ostringstream csv;
    csv << "index,simulated\n";
    for (std::size_t t = 0; t < sim.size(); ++t) csv << t << ',' << detail::format_real(sim[t] + op.output) << '\n';
    const auto out = prepare_out(out_dir);
    io::write_file(out / "simulated.csv", csv.str());
    spdlog::info("simulated {} samples into {}", sim.size(), (out / "simulated.csv").string());
    return ok;
}

int cmd_synth(const std::string& config, std::optional<std::uint64_t> seed, std::optional<std::size_t> samples,
              const std::string& out_dir) {
    auto spec = config.empty() ? synth::canonical_armax_fixture(10000, 0)
                               : io::generator_from_json(io::read_json(config));
    if (seed) spec.seed = *seed;
    if (samples) spec.n_samples = *samples;
    const auto gen = synth::generate(spec);
    const auto out = prepare_out(out_dir);
    io::write_file(out / "synth.csv", io::table_csv(gen.table));
    io::write_json(out / "synth_truth.json", io::to_json(gen.truth));
    std::cout << "wrote " << gen.table.n_rows() << " rows to " << (out / "synth.csv").string() << '\n';
    return ok;
}

void add_pipeline_flags(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "pipeline config (JSON)")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--inputs", o.inputs, "explicit input list; bypasses NMI selection")->delimiter(',');
    sub->add_option("--order", o.order, "polynomial orders na = nb = nc");
    sub->add_option("--delay", o.delay, "input delay");
    sub->add_option("--bins", o.bins, "bins per column");
    sub->add_option("--strategy", o.strategy, "equal_width | equal_frequency | categorical");
    sub->add_option("--top-k", o.top_k, "select the k best-ranked inputs");
    sub->add_option("--threshold", o.threshold, "select inputs whose metric is at least this value");
    sub->add_option("--metric", o.metric, "MI | NMI_sqrt");
}

} // namespace

int run(int argc, const char* const* argv) {
    init_logging();
    CLI::App app{"Information-guided linear system identification for thermal time series"};
    app.require_subcommand(1);
    app.set_version_flag("--version", io::library_version);

    Overrides o;
    std::string model_path;
    std::string input_csv;
    std::string synth_config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;

    auto* nmi = app.add_subcommand("nmi", "dependency matrix and input ranking on the training data");
    add_pipeline_flags(nmi, o);
    auto* fit = app.add_subcommand("fit", "select inputs, fit ARMAX, write model, report and predictions");
    add_pipeline_flags(fit, o);
    auto* compare = app.add_subcommand("compare", "fit every model in the zoo and tabulate fits");
    add_pipeline_flags(compare, o);
    auto* report = app.add_subcommand("report", "nmi, fit and compare in one run, with a text summary");
    add_pipeline_flags(report, o);

    auto* simulate = app.add_subcommand("simulate", "free-run a saved model on an input CSV");
    simulate->add_option("--model", model_path, "model JSON written by fit")->required();
    simulate->add_option("--input-csv", input_csv, "CSV with the model's input columns")->required();
    simulate->add_option("--out", o.out, "output directory");

    auto* gen = app.add_subcommand("synth", "generate a synthetic table with its truth record");
    gen->add_option("--config", synth_config, "generator spec (JSON); default is the ARMAX recovery fixture");
    gen->add_option("--seed", seed, "random seed");
    gen->add_option("--samples", samples, "samples after warm-up");
    gen->add_option("--out", o.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "thermoid: " << e.what() << '\n';
        return usage_error;
    }

    try {
        if (nmi->parsed()) return cmd_nmi(o);
        if (fit->parsed()) return cmd_fit(o);
        if (compare->parsed()) return cmd_compare(o);
        if (report->parsed()) return cmd_report(o);
        if (simulate->parsed()) return cmd_simulate(model_path, input_csv, o.out);
        if (gen->parsed()) return cmd_synth(synth_config, seed, samples, o.out);
    } catch (const ConfigError& e) {
        std::cerr << "thermoid: config error: " << e.what() << '\n';
        return usage_error;
    } catch (const DataError& e) {
        std::cerr << "thermoid: data error: " << e.what() << '\n';
        return data_error;
    } catch (const NumericalError& e) {
        std::cerr << "thermoid: numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const std::exception& e) {
        std::cerr << "thermoid: numerical failure: " << e.what() << '\n';
        return numerical_failure;
    }
    return usage_error;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"thermoid"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace thermoid::cli
