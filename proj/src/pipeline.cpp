#include "thermoid/pipeline.hpp"

#include "thermoid/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <future>
#include <numeric>

namespace thermoid::pipeline {

using dataset::TimeSeriesTable;
using nlohmann::json;

std::string SelectionRule::describe() const {
    switch (kind) {
    case Kind::top_k: return "top_k(" + std::to_string(k) + ")";
    case Kind::threshold: {
        std::string t = std::to_string(tau);
        return "threshold(" + t + ")";
    }
    case Kind::explicit_list: return "explicit";
    }
    return "explicit";
}

std::string to_string(ZooEntry::Family family) {
    switch (family) {
    case ZooEntry::Family::armax: return "armax";
    case ZooEntry::Family::arx: return "arx";
    case ZooEntry::Family::reg_armax: return "reg_armax";
    case ZooEntry::Family::state_space: return "ss";
    }
    return "armax";
}

ZooEntry::Family parse_family(const std::string& text) {
    if (text == "armax" || text == "ARMAX") return ZooEntry::Family::armax;
    if (text == "arx" || text == "ARX") return ZooEntry::Family::arx;
    if (text == "reg_armax" || text == "regularized_armax") return ZooEntry::Family::reg_armax;
    if (text == "ss" || text == "state_space") return ZooEntry::Family::state_space;
    throw ConfigError("unknown model family '" + text + "'");
}

namespace {

std::string ordinal(int n) {
    const int tens = n % 100;
    const char* suffix = "th";
    if (tens < 11 || tens > 13) {
        switch (n % 10) {
        case 1: suffix = "st"; break;
        case 2: suffix = "nd"; break;
        case 3: suffix = "rd"; break;
        default: break;
        }
    }
    return std::to_string(n) + suffix;
}

} // namespace

std::string ZooEntry::label() const {
    const auto o = ordinal(order);
    switch (family) {
    case Family::armax: return o + " ARMAX";
    case Family::arx: return o + " ARX";
    case Family::reg_armax: return o + " Reg. ARMAX";
    case Family::state_space: return o + " S.S.";
    }
    return o;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

template <typename T>
T value_or(const json& obj, const char* key, T fallback) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
    return obj.at(key).get<T>();
}

dataset::SplitSpec::Range parse_range(const json& r) {
    if (!r.is_array() || r.size() != 2) throw ConfigError("index range must be [begin, end]");
    return {r[0].get<std::size_t>(), r[1].get<std::size_t>()};
}

std::vector<dataset::ColumnRole> parse_roles(const json& roles) {
    std::vector<dataset::ColumnRole> out;
    if (roles.is_array()) {
        for (const auto& r : roles) {
            out.push_back({r.at("name").get<std::string>(),
                           dataset::parse_role(r.at("role").get<std::string>())});
        }
    } else if (roles.is_object()) {
        for (const auto& [name, role] : roles.items()) {
            out.push_back({name, dataset::parse_role(role.get<std::string>())});
        }
    } else {
        throw ConfigError("data.roles must be an array or object");
    }
    return out;
}

} // namespace

PipelineConfig parse_config(const json& doc, const std::filesystem::path& base_dir) try {
    PipelineConfig cfg;
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    const json& d = doc.at("data");

    cfg.data.schema = dataset::Schema(parse_roles(d.at("roles")));
    cfg.data.load.sample_period = value_or<double>(d, "sample_period", 1.0);
    cfg.data.load.missing = dataset::parse_missing_policy(value_or<std::string>(d, "missing", "drop"));
    if (d.contains("timestamp_column") && !d.at("timestamp_column").is_null()) {
        cfg.data.load.timestamp_column = d.at("timestamp_column").get<std::string>();
    }
    if (d.contains("units")) cfg.data.load.units = d.at("units").get<std::map<std::string, std::string>>();

    if (d.contains("train")) {
        cfg.data.train_path = resolve(base_dir, d.at("train").get<std::string>());
        if (d.contains("tests")) {
            for (const auto& t : d.at("tests")) {
                cfg.data.tests.push_back({t.at("label").get<std::string>(),
                                          resolve(base_dir, t.at("path").get<std::string>())});
            }
        }
    } else if (d.contains("path")) {
        cfg.data.path = resolve(base_dir, d.at("path").get<std::string>());
        const json s = d.value("split", json::object());
        const auto mode = value_or<std::string>(s, "mode", "fraction");
        if (mode == "fraction") {
            cfg.data.split = dataset::SplitSpec::fraction(value_or<double>(s, "train_fraction", 0.8));
        } else if (mode == "index_ranges") {
            const json& tests = s.at("test");
            const bool many = tests.is_array() && !tests.empty() && tests[0].is_array();
            cfg.data.split = dataset::SplitSpec::ranges(parse_range(s.at("train")),
                                                        parse_range(many ? tests[0] : tests));
            if (many) {
                for (std::size_t i = 1; i < tests.size(); ++i) {
                    cfg.data.extra_test_ranges.push_back(parse_range(tests[i]));
                }
            }
        } else {
            throw ConfigError("unknown split mode '" + mode + "'");
        }
    } else {
        throw ConfigError("data needs either 'train' (with 'tests') or 'path' (with 'split')");
    }

    cfg.standardize = value_or<bool>(doc, "standardize", false);
    const auto detrend = value_or<std::string>(doc, "detrend", "mean");
    if (detrend == "mean") cfg.detrend = Detrend::mean;
    else if (detrend == "none") cfg.detrend = Detrend::none;
    else throw ConfigError("unknown detrend mode '" + detrend + "'");

    const json b = doc.value("binning", json::object());
    if (b.contains("n_bins") && !b.at("n_bins").is_null()) cfg.binning.n_bins = b.at("n_bins").get<int>();
    cfg.binning.strategy =
        infotheory::parse_strategy(value_or<std::string>(b, "strategy", "equal_frequency"));
    cfg.binning.auto_categorical = value_or<bool>(b, "auto_categorical", true);
    cfg.metric = infotheory::parse_metric(value_or<std::string>(doc, "metric", "NMI_sqrt"));

    const json sel = doc.value("selection", json::object());
    const auto rule = value_or<std::string>(sel, "rule", "top_k");
    if (rule == "top_k") {
        cfg.selection.kind = SelectionRule::Kind::top_k;
        cfg.selection.k = value_or<int>(sel, "k", 1);
        if (cfg.selection.k < 1) throw ConfigError("selection.k must be >= 1");
    } else if (rule == "threshold") {
        cfg.selection.kind = SelectionRule::Kind::threshold;
        cfg.selection.tau = value_or<double>(sel, "tau", 0.0);
    } else if (rule == "explicit") {
        cfg.selection.kind = SelectionRule::Kind::explicit_list;
        cfg.selection.inputs = sel.at("inputs").get<std::vector<std::string>>();
    } else {
        throw ConfigError("unknown selection rule '" + rule + "'");
    }

    const json f = doc.value("fit", json::object());
    cfg.fit.orders.na = value_or<int>(f, "na", 4);
    cfg.fit.orders.nb = value_or<int>(f, "nb", 4);
    cfg.fit.orders.nc = value_or<int>(f, "nc", 4);
    if (f.contains("delay")) {
        const json& dl = f.at("delay");
        cfg.fit.delays = dl.is_array() ? dl.get<std::vector<int>>() : std::vector<int>{dl.get<int>()};
    }
    cfg.fit.max_els_iterations = value_or<int>(f, "max_els_iterations", 100);
    cfg.fit.convergence_tol = value_or<double>(f, "convergence_tol", 1e-6);
    cfg.fit.ridge_lambda = value_or<double>(f, "ridge_lambda", 0.0);
    cfg.fit.ridge_by_gcv = value_or<bool>(f, "ridge_by_gcv", false);
    cfg.fit.divergence_bound = value_or<double>(f, "divergence_bound", 1e8);
    cfg.fit.pem_refine = value_or<bool>(f, "pem_refine", false);
    cfg.fit.pem_max_iterations = value_or<int>(f, "pem_max_iterations", 100);
    cfg.fit.validate();

    const json ss = doc.value("state_space", json::object());
    cfg.ss.arx_order = value_or<int>(ss, "arx_order", 0);
    cfg.ss.hankel_size = value_or<int>(ss, "hankel_size", 0);
    cfg.ss.rank_tolerance = value_or<double>(ss, "rank_tolerance", 1e-10);
    cfg.ss.estimate_innovation_gain = value_or<bool>(ss, "estimate_innovation_gain", true);
    cfg.ss.pem_refine = value_or<bool>(ss, "pem_refine", false);
    cfg.ss.pem_max_iterations = value_or<int>(ss, "pem_max_iterations", 50);
    cfg.ss.samples_per_parameter = value_or<int>(ss, "samples_per_parameter", 10);

    if (doc.contains("zoo")) {
        for (const auto& z : doc.at("zoo")) {
            ZooEntry e;
            e.family = parse_family(z.at("method").get<std::string>());
            e.order = z.at("order").get<int>();
            if (e.order < 1) throw ConfigError("zoo orders must be >= 1");
            if (z.contains("ridge_lambda") && z.at("ridge_lambda").is_number()) {
                e.ridge_lambda = z.at("ridge_lambda").get<double>();
            }
            cfg.zoo.push_back(e);
        }
    }
    cfg.zoo_inputs = value_or<std::vector<std::string>>(doc, "zoo_inputs", {});
    return cfg;
} catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

json config_to_json(const PipelineConfig& c) {
    json d;
    json roles = json::array();
    for (const auto& r : c.data.schema.roles()) roles.push_back({{"name", r.name}, {"role", dataset::to_string(r.role)}});
    d["roles"] = roles;
    d["sample_period"] = c.data.load.sample_period;
    d["missing"] = c.data.load.missing == dataset::MissingPolicy::drop ? "drop" : "forward_fill";
    d["timestamp_column"] = c.data.load.timestamp_column ? json(*c.data.load.timestamp_column) : json(nullptr);
    if (c.data.train_path) {
        d["train"] = c.data.train_path->string();
        json tests = json::array();
        for (const auto& t : c.data.tests) tests.push_back({{"label", t.label}, {"path", t.path.string()}});
        d["tests"] = tests;
    } else if (c.data.path) {
        d["path"] = c.data.path->string();
        if (c.data.split.mode == dataset::SplitSpec::Mode::fraction) {
            d["split"] = {{"mode", "fraction"}, {"train_fraction", c.data.split.train_fraction}};
        } else {
            json tests = json::array();
            tests.push_back({c.data.split.test_range.first, c.data.split.test_range.second});
            for (const auto& r : c.data.extra_test_ranges) tests.push_back({r.first, r.second});
            d["split"] = {{"mode", "index_ranges"},
                          {"train", {c.data.split.train_range.first, c.data.split.train_range.second}},
                          {"test", tests}};
        }
    }

    json out;
    out["data"] = d;
    out["standardize"] = c.standardize;
    out["detrend"] = c.detrend == Detrend::mean ? "mean" : "none";
    out["binning"] = {{"n_bins", c.binning.n_bins ? json(*c.binning.n_bins) : json(nullptr)},
                      {"strategy", infotheory::to_string(c.binning.strategy)},
                      {"auto_categorical", c.binning.auto_categorical}};
    out["metric"] = infotheory::to_string(c.metric);
    json sel;
    switch (c.selection.kind) {
    case SelectionRule::Kind::top_k: sel = {{"rule", "top_k"}, {"k", c.selection.k}}; break;
    case SelectionRule::Kind::threshold: sel = {{"rule", "threshold"}, {"tau", c.selection.tau}}; break;
    case SelectionRule::Kind::explicit_list: sel = {{"rule", "explicit"}, {"inputs", c.selection.inputs}}; break;
    }
    out["selection"] = sel;
    out["fit"] = {{"na", c.fit.orders.na},
                  {"nb", c.fit.orders.nb},
                  {"nc", c.fit.orders.nc},
                  {"delay", c.fit.delays},
                  {"max_els_iterations", c.fit.max_els_iterations},
                  {"convergence_tol", c.fit.convergence_tol},
                  {"ridge_lambda", c.fit.ridge_lambda},
                  {"ridge_by_gcv", c.fit.ridge_by_gcv},
                  {"divergence_bound", c.fit.divergence_bound},
                  {"pem_refine", c.fit.pem_refine},
                  {"pem_max_iterations", c.fit.pem_max_iterations}};
    out["state_space"] = {{"arx_order", c.ss.arx_order},
                          {"hankel_size", c.ss.hankel_size},
                          {"rank_tolerance", c.ss.rank_tolerance},
                          {"estimate_innovation_gain", c.ss.estimate_innovation_gain},
                          {"pem_refine", c.ss.pem_refine},
                          {"pem_max_iterations", c.ss.pem_max_iterations},
                          {"samples_per_parameter", c.ss.samples_per_parameter}};
    json zoo = json::array();
    for (const auto& z : c.zoo) {
        json e = {{"method", to_string(z.family)}, {"order", z.order}};
        if (z.family == ZooEntry::Family::reg_armax) {
            e["ridge_lambda"] = z.ridge_lambda ? json(*z.ridge_lambda) : json("gcv");
        }
        zoo.push_back(e);
    }
    out["zoo"] = zoo;
    out["zoo_inputs"] = c.zoo_inputs;
    return out;
}

Datasets load_datasets(const PipelineConfig& config) {
    const auto& d = config.data;
    if (d.train_path) {
        Datasets out{dataset::load_csv(*d.train_path, d.schema, d.load), {}};
        for (const auto& t : d.tests) {
            out.tests.push_back({t.label, dataset::load_csv(t.path, d.schema, d.load)});
        }
        return out;
    }
    if (!d.path) throw ConfigError("no dataset configured");
    const auto table = dataset::load_csv(*d.path, d.schema, d.load);
    auto first = dataset::split(table, d.split);
    Datasets out{std::move(first.train), {}};
    out.tests.push_back({"test1", std::move(first.test)});
    for (std::size_t i = 0; i < d.extra_test_ranges.size(); ++i) {
        auto extra = dataset::split(table, dataset::SplitSpec::ranges(d.split.train_range, d.extra_test_ranges[i]));
        out.tests.push_back({"test" + std::to_string(i + 2), std::move(extra.test)});
    }
    return out;
}

SelectionReport run_selection(const PipelineConfig& config, const TimeSeriesTable& train) {
    const auto& schema = config.data.schema;
    const auto candidates = schema.candidates();
    if (candidates.empty()) throw ConfigError("schema declares no candidate inputs");

    // Output first, so its row/column leads the matrix.
    TimeSeriesTable table = train.select(schema.loaded_columns());
    if (config.standardize) table = dataset::standardize(table).table;

    SelectionReport report;
    report.target = schema.output();
    report.matrix = infotheory::dependency_matrix(table, config.binning, config.metric);
    report.ranking = infotheory::rank_inputs(report.matrix, report.target, candidates);

    std::vector<const infotheory::RankedInput*> usable;
    for (const auto& r : report.ranking) {
        if (!r.degenerate) usable.push_back(&r);
    }

    const auto& rule = config.selection;
    report.rule = rule.describe();
    if (rule.kind == SelectionRule::Kind::explicit_list) {
        for (const auto& name : rule.inputs) {
            if (std::find(candidates.begin(), candidates.end(), name) == candidates.end()) {
                throw ConfigError("explicit input '" + name + "' is not a candidate column");
            }
        }
        report.selected = rule.inputs;
        return report;
    }
    if (usable.empty()) throw NumericalError("every candidate input has zero entropy");

    if (rule.kind == SelectionRule::Kind::top_k) {
        for (std::size_t i = 0; i < usable.size() && i < static_cast<std::size_t>(rule.k); ++i) {
            report.selected.push_back(usable[i]->name);
        }
    } else {
        for (const auto* r : usable) {
            if (r->value >= rule.tau) report.selected.push_back(r->name);
        }
        if (report.selected.empty()) {
            report.selected.push_back(usable.front()->name);
            report.rule += " fallback top_k(1)";
        }
    }
    return report;
}

SelectionReport run_selection(const PipelineConfig& config) {
    return run_selection(config, load_datasets(config).train);
}

namespace {

struct Prepared {
    TimeSeriesTable train;
    std::vector<LabeledTable> tests;
    OperatingPoint op;
};

/// Column subset, then optional standardization (train statistics reused on
/// test sets) or mean removal.
Prepared prepare(const PipelineConfig& config, const std::vector<std::string>& inputs, const Datasets& data) {
    const auto& output = config.data.schema.output();
    std::vector<std::string> cols{output};
    cols.insert(cols.end(), inputs.begin(), inputs.end());

    auto train = data.train.select(cols);
    std::vector<LabeledTable> tests;
    for (const auto& t : data.tests) tests.push_back({t.label, t.table.select(cols)});

    OperatingPoint op;
    op.input_names = inputs;
    op.inputs.assign(inputs.size(), 0.0);
    if (config.standardize) {
        auto s = dataset::standardize(train);
        for (auto& t : tests) t.table = dataset::standardize(t.table, s.standardization).table;
        train = std::move(s.table);
    } else if (config.detrend == Detrend::mean) {
        dataset::Standardization centre;
        for (const auto& name : cols) {
            const auto v = train.values(name);
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            centre.stats[name] = {mean, 1.0};
        }
        op.output = centre.stats[output].mean;
        for (std::size_t j = 0; j < inputs.size(); ++j) op.inputs[j] = centre.stats[inputs[j]].mean;
        train = dataset::standardize(train, centre).table;
        for (auto& t : tests) t.table = dataset::standardize(t.table, centre).table;
    }
    return {std::move(train), std::move(tests), std::move(op)};
}

void shift(linmodels::Evaluation& ev, double offset) {
    for (auto* v : {&ev.measured, &ev.free_run, &ev.one_step}) {
        for (double& x : *v) x += offset;
    }
}

} // namespace

InferenceReport run_inference(const PipelineConfig& config, const std::vector<std::string>& inputs,
                              const Datasets& data) {
    if (inputs.empty()) throw ConfigError("no inputs selected for inference");
    auto prep = prepare(config, inputs, data);
    const linmodels::Channels ch{config.data.schema.output(), inputs};

    InferenceReport report;
    report.effective_config = config_to_json(config);
    report.operating_point = prep.op;
    report.fit = linmodels::fit_armax(prep.train, ch, config.fit);
    report.train_evaluation = linmodels::evaluate(report.fit.model, prep.train);
    shift(report.train_evaluation, prep.op.output);
    for (const auto& t : prep.tests) {
        auto ev = linmodels::evaluate(report.fit.model, t.table);
        report.fit.tests.push_back({t.label, ev.free_run_fit_pct, ev.one_step_fit_pct});
        shift(ev, prep.op.output);
        report.tests.push_back({t.label, std::move(ev)});
    }
    spdlog::info("ARMAX on [{}]: train fit {:.2f}%, {} ELS iterations", fmt::join(inputs, ", "),
                 report.fit.train_fit_pct, report.fit.iterations_used);
    if (!linmodels::check_stability(report.fit.model).stable) {
        spdlog::warn("ARMAX on [{}] has an unstable A polynomial; free-run predictions may diverge",
                     fmt::join(inputs, ", "));
    }
    return report;
}

InferenceReport run_inference(const PipelineConfig& config, const SelectionReport& selection,
                              const Datasets& data) {
    return run_inference(config, selection.selected, data);
}

namespace {

std::size_t entry_warmup(const ZooEntry& e, const linmodels::FitOptions& fit) {
    if (e.family == ZooEntry::Family::state_space) {
        return std::max<std::size_t>(2 * static_cast<std::size_t>(e.order), 10);
    }
    const int delay = fit.delays.empty() ? 0 : *std::max_element(fit.delays.begin(), fit.delays.end());
    return static_cast<std::size_t>(std::max(e.order, delay + e.order));
}

struct RowResult {
    std::optional<double> train_fit;
    std::vector<linmodels::TestFit> tests;
};

RowResult fit_entry(const PipelineConfig& config, const ZooEntry& entry, const linmodels::Channels& ch,
                    const Prepared& prep, std::size_t score_from, int ss_arx_order) {
    RowResult out;
    if (entry.family == ZooEntry::Family::state_space) {
        auto opts = config.ss;
        if (opts.arx_order == 0) opts.arx_order = ss_arx_order;
        const auto res = statespace::fit_ss(prep.train, ch, entry.order, opts);
        out.train_fit = statespace::evaluate_ss(res.model, prep.train, score_from).free_run_fit_pct;
        for (const auto& t : prep.tests) {
            const auto ev = statespace::evaluate_ss(res.model, t.table, score_from);
            out.tests.push_back({t.label, ev.free_run_fit_pct, ev.one_step_fit_pct});
        }
        return out;
    }
    auto opts = config.fit;
    opts.orders = {entry.order, entry.order, entry.order};
    opts.ridge_lambda = 0.0;
    opts.ridge_by_gcv = false;
    linmodels::FitReport rep;
    switch (entry.family) {
    case ZooEntry::Family::arx:
        rep = linmodels::fit_arx(prep.train, ch, opts);
        break;
    case ZooEntry::Family::reg_armax:
        if (entry.ridge_lambda) opts.ridge_lambda = *entry.ridge_lambda;
        else opts.ridge_by_gcv = true;
        rep = linmodels::fit_armax(prep.train, ch, opts);
        break;
    default:
        rep = linmodels::fit_armax(prep.train, ch, opts);
        break;
    }
    out.train_fit = linmodels::evaluate(rep.model, prep.train, score_from).free_run_fit_pct;
    for (const auto& t : prep.tests) {
        const auto ev = linmodels::evaluate(rep.model, t.table, score_from);
        out.tests.push_back({t.label, ev.free_run_fit_pct, ev.one_step_fit_pct});
    }
    return out;
}

} // namespace

ComparisonTable compare_models(const PipelineConfig& config, const std::vector<std::string>& inputs,
                               const Datasets& data) {
    if (config.zoo.empty()) throw ConfigError("model zoo is empty");
    if (inputs.empty()) throw ConfigError("no inputs for the comparison");
    const auto prep = prepare(config, inputs, data);
    const linmodels::Channels ch{config.data.schema.output(), inputs};

    ComparisonTable table;
    table.inputs = inputs;
    table.effective_config = config_to_json(config);
    for (const auto& t : prep.tests) table.test_labels.push_back(t.label);
    int max_ss = 0;
    for (const auto& e : config.zoo) {
        table.score_from = std::max(table.score_from, entry_warmup(e, config.fit));
        if (e.family == ZooEntry::Family::state_space) max_ss = std::max(max_ss, e.order);
    }
    // One shared Markov stage so the state-space rows are truncations of the same Hankel matrix.
    const int ss_arx_order = 2 * max_ss + 5;

    std::vector<std::future<ComparisonRow>> jobs;
    for (const auto& entry : config.zoo) {
        jobs.push_back(std::async(std::launch::async, [&, entry] {
            ComparisonRow row;
            row.label = entry.label();
            row.family = to_string(entry.family);
            row.order = entry.order;
            const auto start = std::chrono::steady_clock::now();
            try {
                auto res = fit_entry(config, entry, ch, prep, table.score_from, ss_arx_order);
                row.train_fit_pct = res.train_fit;
                row.tests = std::move(res.tests);
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            row.wall_time_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            return row;
        }));
    }
    for (auto& j : jobs) table.rows.push_back(j.get());
    return table;
}

} // namespace thermoid::pipeline
