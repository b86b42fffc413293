#pragma once

#include "thermoid/dataset.hpp"
#include "thermoid/infotheory.hpp"
#include "thermoid/linmodels.hpp"
#include "thermoid/statespace.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace thermoid::pipeline {

struct TestSource {
    std::string label;
    std::filesystem::path path;
};

/// Either separate train/test files, or one file cut by index ranges or a
/// train fraction.
struct DatasetConfig {
    std::optional<std::filesystem::path> train_path;
    std::vector<TestSource> tests;
    std::optional<std::filesystem::path> path;
    dataset::SplitSpec split;
    /// Extra test ranges after the first, index_ranges mode only.
    std::vector<dataset::SplitSpec::Range> extra_test_ranges;
    dataset::Schema schema{{{"y", dataset::Role::output}}};
    dataset::LoadOptions load;
};

struct SelectionRule {
    enum class Kind { top_k, threshold, explicit_list };
    Kind kind = Kind::top_k;
    int k = 1;
    double tau = 0.0;
    std::vector<std::string> inputs;

    std::string describe() const;
};

/// Operating-point removal applied before fitting. Fit percentages are
/// unaffected because the same offset is removed from y and its prediction.
enum class Detrend { none, mean };

struct ZooEntry {
    enum class Family { armax, arx, reg_armax, state_space };
    Family family = Family::armax;
    int order = 4;
    /// Reg. ARMAX only; nullopt picks lambda by generalized cross-validation.
    std::optional<double> ridge_lambda;

    std::string label() const;
};

std::string to_string(ZooEntry::Family family);
ZooEntry::Family parse_family(const std::string& text);

struct PipelineConfig {
    DatasetConfig data;
    bool standardize = false;
    Detrend detrend = Detrend::mean;
    infotheory::SymbolizeOptions binning;
    infotheory::Metric metric = infotheory::Metric::nmi_sqrt;
    SelectionRule selection;
    linmodels::FitOptions fit;
    statespace::SSFitOptions ss;
    std::vector<ZooEntry> zoo;
    /// Inputs used by the comparison table; empty means the selected inputs.
    std::vector<std::string> zoo_inputs;
};

/// Parses the JSON config. Relative paths resolve against `base_dir`.
PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
/// Canonical form of the effective configuration, echoed into reports.
nlohmann::json config_to_json(const PipelineConfig& config);

struct LabeledTable {
    std::string label;
    dataset::TimeSeriesTable table;
};

struct Datasets {
    dataset::TimeSeriesTable train;
    std::vector<LabeledTable> tests;
};

Datasets load_datasets(const PipelineConfig& config);

struct SelectionReport {
    infotheory::DependencyMatrix matrix;
    std::string target;
    std::vector<infotheory::RankedInput> ranking;
    std::vector<std::string> selected;
    std::string rule;
};

/// Input selection on the training table only: optional standardization,
/// symbolization, pairwise dependency matrix, ranking against the output,
/// then the configured rule. A threshold that keeps nothing falls back to
/// the best-ranked non-degenerate candidate. Throws NumericalError when
/// every candidate is degenerate.
SelectionReport run_selection(const PipelineConfig& config, const dataset::TimeSeriesTable& train);
SelectionReport run_selection(const PipelineConfig& config);

struct OperatingPoint {
    double output = 0.0;
    std::vector<std::string> input_names;
    std::vector<double> inputs;
};

struct TestEvaluation {
    std::string label;
    linmodels::Evaluation evaluation;
};

struct InferenceReport {
    linmodels::FitReport fit;
    OperatingPoint operating_point;
    linmodels::Evaluation train_evaluation;
    std::vector<TestEvaluation> tests;
    nlohmann::json effective_config;
};

/// ARMAX fit on the selected inputs, evaluated free-run and one-step on
/// every test set. Deterministic for a fixed config.
InferenceReport run_inference(const PipelineConfig& config, const SelectionReport& selection,
                              const Datasets& data);
InferenceReport run_inference(const PipelineConfig& config, const std::vector<std::string>& inputs,
                              const Datasets& data);

struct ComparisonRow {
    std::string label;
    std::string family;
    int order = 0;
    std::optional<double> train_fit_pct;
    std::vector<linmodels::TestFit> tests;
    double wall_time_ms = 0.0;
    std::optional<std::string> error;
};

struct ComparisonTable {
    std::vector<std::string> inputs;
    std::vector<std::string> test_labels;
    std::size_t score_from = 0;
    std::vector<ComparisonRow> rows;
    nlohmann::json effective_config;
};

/// Fits every zoo entry on the same training table and scores all of them
/// free-run (one-step alongside) from the same first test index. Entries
/// are fitted concurrently; failures become row annotations. Throws
/// ConfigError for an empty zoo.
ComparisonTable compare_models(const PipelineConfig& config, const std::vector<std::string>& inputs,
                               const Datasets& data);

} // namespace thermoid::pipeline
