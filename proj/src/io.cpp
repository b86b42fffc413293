#include "thermoid/io.hpp"

#include "csv_util.hpp"
#include "thermoid/error.hpp"

#include <spdlog/fmt/fmt.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace thermoid::io {

using nlohmann::json;
using detail::format_real;
using detail::quote_if_needed;

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from(const json& doc, const char* name) {
    const auto rows = doc.at("rows").get<Eigen::Index>();
    const auto cols = doc.at("cols").get<Eigen::Index>();
    const auto data = doc.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
        throw DataError(std::string("matrix '") + name + "' has inconsistent dimensions");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = data[static_cast<std::size_t>(i * cols + j)];
    }
    return m;
}

json op_json(const pipeline::OperatingPoint& op) {
    return {{"output", op.output}, {"input_names", op.input_names}, {"inputs", op.inputs}};
}

json evaluation_summary(const linmodels::Evaluation& ev) {
    return {{"first_index", ev.first_index},
            {"n_scored", ev.measured.size()},
            {"free_run_fit_pct", ev.free_run_fit_pct},
            {"one_step_fit_pct", ev.one_step_fit_pct}};
}

/// A free run of an unstable model overflows; its fit is not a number.
std::string pct(double v) { return std::isfinite(v) ? fmt::format("{:.2f}%", v) : "diverged"; }

std::string fit_cell(const std::optional<double>& v) { return v ? pct(*v) : "-"; }

} // namespace

json to_json(const linmodels::PolyModel& m) {
    return {{"kind", "polynomial"},
            {"orders",
             {{"na", m.na()},
              {"nb", m.b.empty() ? 0 : static_cast<int>(m.b.front().size()) - 1},
              {"nc", m.nc()}}},
            {"a", m.a},
            {"b", m.b},
            {"c", m.c},
            {"delays", m.delays},
            {"noise_variance", m.noise_variance},
            {"input_names", m.input_names},
            {"output_name", m.output_name}};
}

json to_json(const statespace::SSModel& m) {
    return {{"kind", "state_space"},
            {"order", m.order()},
            {"n_inputs", m.n_inputs()},
            {"A", matrix_json(m.A)},
            {"B", matrix_json(m.B)},
            {"C", matrix_json(m.C)},
            {"D", matrix_json(m.D)},
            {"K", matrix_json(m.K)},
            {"input_names", m.input_names},
            {"output_name", m.output_name}};
}

json to_json(const SavedModel& saved) {
    json doc = std::visit([](const auto& m) { return to_json(m); }, saved.model);
    doc["version"] = library_version;
    doc["operating_point"] = op_json(saved.operating_point);
    return doc;
}

linmodels::PolyModel poly_from_json(const json& doc) try {
    linmodels::PolyModel m;
    m.a = doc.at("a").get<std::vector<double>>();
    m.b = doc.at("b").get<std::vector<std::vector<double>>>();
    m.c = doc.at("c").get<std::vector<double>>();
    m.delays = doc.at("delays").get<std::vector<int>>();
    m.noise_variance = doc.value("noise_variance", 0.0);
    m.input_names = doc.at("input_names").get<std::vector<std::string>>();
    m.output_name = doc.at("output_name").get<std::string>();
    m.validate();
    return m;
} catch (const json::exception& e) {
    throw DataError(std::string("malformed polynomial model: ") + e.what());
}

statespace::SSModel ss_from_json(const json& doc) try {
    statespace::SSModel m;
    m.A = matrix_from(doc.at("A"), "A");
    m.B = matrix_from(doc.at("B"), "B");
    m.C = matrix_from(doc.at("C"), "C");
    m.D = matrix_from(doc.at("D"), "D");
    m.K = matrix_from(doc.at("K"), "K");
    m.input_names = doc.at("input_names").get<std::vector<std::string>>();
    m.output_name = doc.at("output_name").get<std::string>();
    m.validate();
    return m;
} catch (const json::exception& e) {
    throw DataError(std::string("malformed state-space model: ") + e.what());
}

SavedModel saved_model_from_json(const json& doc) try {
    SavedModel saved;
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "polynomial") saved.model = poly_from_json(doc);
    else if (kind == "state_space") saved.model = ss_from_json(doc);
    else throw DataError("unknown model kind '" + kind + "'");

    const auto& names = std::visit([](const auto& m) -> const std::vector<std::string>& { return m.input_names; },
                                   saved.model);
    auto& op = saved.operating_point;
    op.input_names = names;
    op.inputs.assign(names.size(), 0.0);
    if (doc.contains("operating_point")) {
        const auto& o = doc.at("operating_point");
        op.output = o.at("output").get<double>();
        const auto in = o.at("inputs").get<std::vector<double>>();
        if (in.size() != names.size()) throw DataError("operating point does not match the model inputs");
        op.inputs = in;
    }
    return saved;
} catch (const json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
}

json to_json(const linmodels::FitReport& r) {
    json tests = json::array();
    for (const auto& t : r.tests) {
        tests.push_back({{"label", t.label},
                         {"free_run_fit_pct", t.free_run_fit_pct},
                         {"one_step_fit_pct", t.one_step_fit_pct}});
    }
    const auto test_fit = r.test_fit_pct();
    return {{"method", r.method},
            {"model", to_json(r.model)},
            {"iterations_used", r.iterations_used},
            {"converged", r.converged},
            {"residual_variance", r.residual_variance},
            {"ridge_lambda", r.ridge_lambda},
            {"train_fit_pct", r.train_fit_pct},
            {"train_one_step_fit_pct", r.train_one_step_fit_pct},
            {"test_fit_pct", test_fit ? json(*test_fit) : json(nullptr)},
            {"tests", tests},
            {"prediction_mode", linmodels::to_string(r.prediction_mode)}};
}

json to_json(const pipeline::InferenceReport& r) {
    json tests = json::array();
    for (const auto& t : r.tests) {
        json e = evaluation_summary(t.evaluation);
        e["label"] = t.label;
        tests.push_back(e);
    }
    const auto stab = linmodels::check_stability(r.fit.model);
    return {{"version", library_version},
            {"fit", to_json(r.fit)},
            {"stable", stab.stable},
            {"root_magnitudes", stab.root_magnitudes},
            {"operating_point", op_json(r.operating_point)},
            {"train_evaluation", evaluation_summary(r.train_evaluation)},
            {"test_evaluations", tests},
            {"effective_config", r.effective_config}};
}

json to_json(const infotheory::DependencyMatrix& m) {
    json values = json::array();
    json degenerate = json::array();
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        std::vector<double> row;
        std::vector<bool> flags;
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
            row.push_back(m.values(i, j));
            flags.push_back(m.degenerate(i, j));
        }
        values.push_back(row);
        degenerate.push_back(flags);
    }
    std::vector<std::string> strategies;
    for (auto s : m.strategies) strategies.push_back(infotheory::to_string(s));
    return {{"version", library_version},
            {"metric", infotheory::to_string(m.metric)},
            {"labels", m.labels},
            {"values", values},
            {"degenerate", degenerate},
            {"bins", m.bins},
            {"strategies", strategies}};
}

json to_json(const pipeline::SelectionReport& r) {
    json ranking = json::array();
    for (const auto& x : r.ranking) {
        ranking.push_back({{"name", x.name}, {"value", x.value}, {"degenerate", x.degenerate}});
    }
    return {{"version", library_version},
            {"target", r.target},
            {"matrix", to_json(r.matrix)},
            {"ranking", ranking},
            {"selected", r.selected},
            {"rule", r.rule}};
}

json to_json(const pipeline::ComparisonTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) {
        json tests = json::array();
        for (const auto& x : r.tests) {
            tests.push_back({{"label", x.label},
                             {"free_run_fit_pct", x.free_run_fit_pct},
                             {"one_step_fit_pct", x.one_step_fit_pct}});
        }
        rows.push_back({{"label", r.label},
                        {"family", r.family},
                        {"order", r.order},
                        {"train_fit_pct", r.train_fit_pct ? json(*r.train_fit_pct) : json(nullptr)},
                        {"tests", tests},
                        {"wall_time_ms", r.wall_time_ms},
                        {"error", r.error ? json(*r.error) : json(nullptr)}});
    }
    return {{"version", library_version},
            {"inputs", t.inputs},
            {"test_labels", t.test_labels},
            {"score_from", t.score_from},
            {"prediction_mode", "free_run"},
            {"rows", rows},
            {"effective_config", t.effective_config}};
}

json to_json(const synth::GeneratorSpec& s) {
    json inputs = json::array();
    for (const auto& p : s.inputs) {
        json steps = json::array();
        for (const auto& [at, level] : p.steps) steps.push_back({at, level});
        inputs.push_back({{"kind", synth::to_string(p.kind)},
                          {"mean", p.mean},
                          {"amplitude", p.amplitude},
                          {"period", p.period},
                          {"switch_probability", p.switch_probability},
                          {"steps", steps}});
    }
    return {{"version", library_version},
            {"model", std::visit([](const auto& m) { return to_json(m); }, s.model)},
            {"inputs", inputs},
            {"noise_std", s.noise_std},
            {"n_samples", s.n_samples},
            {"warmup", s.warmup},
            {"seed", s.seed},
            {"allow_unstable", s.allow_unstable},
            {"sample_period", s.sample_period},
            {"rng", "mt19937_64; uniform = (x >> 11) * 2^-53; Box-Muller normals, cosine first"}};
}

synth::GeneratorSpec generator_from_json(const json& doc) try {
    synth::GeneratorSpec s;
    const json& m = doc.at("model");
    const auto kind = m.value("kind", std::string("polynomial"));
    if (kind == "polynomial") {
        linmodels::PolyModel pm;
        pm.a = m.value("a", std::vector<double>{});
        pm.b = m.at("b").get<std::vector<std::vector<double>>>();
        pm.c = m.value("c", std::vector<double>{});
        pm.delays = m.value("delays", std::vector<int>(pm.b.size(), 1));
        pm.output_name = m.value("output_name", std::string("y"));
        pm.input_names = m.value("input_names", std::vector<std::string>{});
        if (pm.input_names.empty()) {
            for (std::size_t j = 0; j < pm.b.size(); ++j) pm.input_names.push_back("u" + std::to_string(j + 1));
        }
        s.model = pm;
    } else if (kind == "state_space") {
        s.model = ss_from_json(m);
    } else {
        throw ConfigError("unknown model kind '" + kind + "'");
    }
    for (const auto& p : doc.value("inputs", json::array())) {
        synth::InputProcess ip;
        ip.kind = synth::InputProcess::parse_kind(p.value("kind", std::string("white_noise")));
        ip.mean = p.value("mean", 0.0);
        ip.amplitude = p.value("amplitude", 1.0);
        ip.period = p.value("period", 50.0);
        ip.switch_probability = p.value("switch_probability", 0.1);
        for (const auto& st : p.value("steps", json::array())) {
            ip.steps.emplace_back(st.at(0).get<std::size_t>(), st.at(1).get<double>());
        }
        s.inputs.push_back(ip);
    }
    s.noise_std = doc.value("noise_std", 0.0);
    s.n_samples = doc.value("n_samples", std::size_t{1000});
    s.warmup = doc.value("warmup", std::size_t{200});
    s.seed = doc.value("seed", std::uint64_t{0});
    s.allow_unstable = doc.value("allow_unstable", false);
    s.sample_period = doc.value("sample_period", 1.0);
    return s;
} catch (const json::exception& e) {
    throw ConfigError(std::string("invalid generator spec: ") + e.what());
}

std::string matrix_csv(const infotheory::DependencyMatrix& m) {
    std::ostringstream out;
    out << "variable";
    for (const auto& l : m.labels) out << ',' << quote_if_needed(l);
    out << '\n';
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        out << quote_if_needed(m.labels[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) out << ',' << format_real(m.values(i, j));
        out << '\n';
    }
    return out.str();
}

std::string ranking_csv(const std::vector<infotheory::RankedInput>& ranking) {
    std::ostringstream out;
    out << "rank,name,value,degenerate\n";
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        out << i + 1 << ',' << quote_if_needed(ranking[i].name) << ',' << format_real(ranking[i].value) << ','
            << (ranking[i].degenerate ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string predictions_csv(const linmodels::Evaluation& ev) {
    std::ostringstream out;
    out << "index,measured,free_run,one_step\n";
    for (std::size_t i = 0; i < ev.measured.size(); ++i) {
        out << ev.first_index + i << ',' << format_real(ev.measured[i]) << ',' << format_real(ev.free_run[i])
            << ',' << format_real(ev.one_step[i]) << '\n';
    }
    return out.str();
}

std::string comparison_csv(const pipeline::ComparisonTable& t) {
    std::ostringstream out;
    out << "method,family,order,train_fit_pct";
    for (const auto& l : t.test_labels) out << ',' << quote_if_needed(l + "_fit_pct");
    for (const auto& l : t.test_labels) out << ',' << quote_if_needed(l + "_one_step_fit_pct");
    out << ",wall_time_ms,error\n";
    for (const auto& r : t.rows) {
        out << quote_if_needed(r.label) << ',' << r.family << ',' << r.order << ','
            << (r.train_fit_pct ? format_real(*r.train_fit_pct) : "");
        for (std::size_t i = 0; i < t.test_labels.size(); ++i) {
            out << ',' << (i < r.tests.size() ? format_real(r.tests[i].free_run_fit_pct) : "");
        }
        for (std::size_t i = 0; i < t.test_labels.size(); ++i) {
            out << ',' << (i < r.tests.size() ? format_real(r.tests[i].one_step_fit_pct) : "");
        }
        out << ',' << format_real(r.wall_time_ms) << ',' << quote_if_needed(r.error.value_or("")) << '\n';
    }
    return out.str();
}

std::string table_csv(const dataset::TimeSeriesTable& table) {
    std::ostringstream out;
    const auto names = table.names();
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << quote_if_needed(names[j]);
    out << '\n';
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        for (std::size_t j = 0; j < names.size(); ++j) {
            out << (j ? "," : "") << format_real(table.columns()[j].values[i]);
        }
        out << '\n';
    }
    return out.str();
}

std::string matrix_text(const infotheory::DependencyMatrix& m) {
    std::size_t w = 8;
    for (const auto& l : m.labels) w = std::max(w, l.size());
    std::string out = fmt::format("{:<{}}", "", w);
    for (const auto& l : m.labels) out += fmt::format("  {:>{}}", l, w);
    out += '\n';
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        out += fmt::format("{:<{}}", m.labels[static_cast<std::size_t>(i)], w);
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
            const auto cell = fmt::format("{:.4f}{}", m.values(i, j), m.degenerate(i, j) ? "*" : "");
            out += fmt::format("  {:>{}}", cell, w);
        }
        out += '\n';
    }
    if (m.degenerate.any()) out += "* zero-entropy column, value set to 0\n";
    return out;
}

std::string comparison_text(const pipeline::ComparisonTable& t) {
    std::size_t w = 12;
    for (const auto& r : t.rows) w = std::max(w, r.label.size());
    std::string out = fmt::format("{:<{}}  {:>10}", "Method", w, "Train");
    for (const auto& l : t.test_labels) out += fmt::format("  {:>10}", l);
    out += fmt::format("  {:>10}\n", "Time (ms)");
    for (const auto& r : t.rows) {
        out += fmt::format("{:<{}}  {:>10}", r.label, w, fit_cell(r.train_fit_pct));
        for (std::size_t i = 0; i < t.test_labels.size(); ++i) {
            out += fmt::format("  {:>10}",
                               i < r.tests.size() ? fit_cell(r.tests[i].free_run_fit_pct) : std::string("-"));
        }
        out += fmt::format("  {:>10.1f}", r.wall_time_ms);
        if (r.error) out += "  error: " + *r.error;
        out += '\n';
    }
    return out;
}

std::string fit_report_text(const linmodels::FitReport& r) {
    const auto& m = r.model;
    auto list = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += fmt::format("{}{:.6g}", i ? ", " : "", v[i]);
        return "[" + s + "]";
    };
    std::string out = fmt::format("{} model of {}\n", r.method, m.output_name);
    out += fmt::format("  a = {}\n", list(m.a));
    for (std::size_t j = 0; j < m.b.size(); ++j) {
        out += fmt::format("  b[{}] = {}  (delay {})\n", m.input_names[j], list(m.b[j]), m.delays[j]);
    }
    if (!m.c.empty()) out += fmt::format("  c = {}\n", list(m.c));
    out += fmt::format("  noise variance {:.6g}, ridge lambda {:.6g}\n", m.noise_variance, r.ridge_lambda);
    out += fmt::format("  ELS iterations {}, converged {}\n", r.iterations_used, r.converged ? "yes" : "no");
    const auto stab = linmodels::check_stability(m);
    if (!stab.stable) {
        out += fmt::format("  unstable A polynomial (largest root magnitude {:.4g}); free run may diverge\n",
                           *std::max_element(stab.root_magnitudes.begin(), stab.root_magnitudes.end()));
    }
    out += fmt::format("  {:<12}{:>12}{:>12}\n", "set", "free-run", "one-step");
    out += fmt::format("  {:<12}{:>12}{:>12}\n", "train", pct(r.train_fit_pct), pct(r.train_one_step_fit_pct));
    for (const auto& t : r.tests) {
        out += fmt::format("  {:<12}{:>12}{:>12}\n", t.label, pct(t.free_run_fit_pct), pct(t.one_step_fit_pct));
    }
    return out;
}

std::string ranking_text(const pipeline::SelectionReport& r) {
    std::string out = fmt::format("Inputs ranked against {} ({}):\n", r.target, infotheory::to_string(r.matrix.metric));
    for (std::size_t i = 0; i < r.ranking.size(); ++i) {
        const auto& x = r.ranking[i];
        const bool chosen = std::find(r.selected.begin(), r.selected.end(), x.name) != r.selected.end();
        out += fmt::format("  {:>2}. {:<20} {:.4f}{}{}\n", i + 1, x.name, x.value, x.degenerate ? " (degenerate)" : "",
                           chosen ? "  *" : "");
    }
    out += fmt::format("Selected by {}: {}\n", r.rule, fmt::join(r.selected, ", "));
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const json& doc) { write_file(path, doc.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

} // namespace thermoid::io
