#pragma once

#include "thermoid/infotheory.hpp"
#include "thermoid/linmodels.hpp"
#include "thermoid/pipeline.hpp"
#include "thermoid/statespace.hpp"
#include "thermoid/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <variant>

namespace thermoid::io {

inline constexpr const char* library_version = "0.1.0";

using AnyModel = std::variant<linmodels::PolyModel, statespace::SSModel>;

/// A model document: the model plus the offsets removed before fitting.
struct SavedModel {
    AnyModel model;
    pipeline::OperatingPoint operating_point;
};

nlohmann::json to_json(const linmodels::PolyModel& model);
nlohmann::json to_json(const statespace::SSModel& model);
nlohmann::json to_json(const SavedModel& saved);
SavedModel saved_model_from_json(const nlohmann::json& doc);
linmodels::PolyModel poly_from_json(const nlohmann::json& doc);
statespace::SSModel ss_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const linmodels::FitReport& report);
nlohmann::json to_json(const pipeline::InferenceReport& report);
nlohmann::json to_json(const infotheory::DependencyMatrix& matrix);
nlohmann::json to_json(const pipeline::SelectionReport& report);
nlohmann::json to_json(const pipeline::ComparisonTable& table);
nlohmann::json to_json(const synth::GeneratorSpec& spec);

/// Generator description as read by the synth subcommand.
synth::GeneratorSpec generator_from_json(const nlohmann::json& doc);

/// Labels as header and first column ("variable").
std::string matrix_csv(const infotheory::DependencyMatrix& matrix);
std::string ranking_csv(const std::vector<infotheory::RankedInput>& ranking);
/// Columns index, measured, free_run, one_step; index counts table rows.
std::string predictions_csv(const linmodels::Evaluation& evaluation);
std::string comparison_csv(const pipeline::ComparisonTable& table);
std::string table_csv(const dataset::TimeSeriesTable& table);

std::string matrix_text(const infotheory::DependencyMatrix& matrix);
std::string comparison_text(const pipeline::ComparisonTable& table);
std::string fit_report_text(const linmodels::FitReport& report);
std::string ranking_text(const pipeline::SelectionReport& report);

/// Throws ConfigError when the file cannot be written.
void write_file(const std::filesystem::path& path, const std::string& content);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
/// Throws ConfigError (missing file) or DataError (malformed JSON).
nlohmann::json read_json(const std::filesystem::path& path);

} // namespace thermoid::io
