#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace thermoid::dataset {

struct Column {
    std::string name;
    std::vector<double> values;
    std::string unit;
};

/// Uniformly sampled multivariate log. Immutable once constructed; every
/// column has the same length, at least two rows, finite values only, and
/// unique names.
class TimeSeriesTable {
public:
    TimeSeriesTable(std::vector<Column> columns, double sample_period,
                    std::optional<std::string> start_time = std::nullopt,
                    std::size_t dropped_rows = 0);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_columns() const { return columns_.size(); }
    double sample_period() const { return sample_period_; }
    const std::optional<std::string>& start_time() const { return start_time_; }
    std::size_t dropped_rows() const { return dropped_rows_; }

    const std::vector<Column>& columns() const { return columns_; }
    std::vector<std::string> names() const;
    bool has_column(const std::string& name) const;
    const Column& column(const std::string& name) const;
    std::span<const double> values(const std::string& name) const { return column(name).values; }

    /// Rows [begin, end). Throws DataError when the slice has fewer than 2 rows.
    TimeSeriesTable slice(std::size_t begin, std::size_t end) const;
    /// Subset of columns, in the order given.
    TimeSeriesTable select(const std::vector<std::string>& names) const;

private:
    std::vector<Column> columns_;
    double sample_period_;
    std::optional<std::string> start_time_;
    std::size_t dropped_rows_;
    std::size_t n_rows_ = 0;
};

enum class Role { output, candidate_input, excluded };

Role parse_role(const std::string& text);
std::string to_string(Role role);

struct ColumnRole {
    std::string name;
    Role role;
};

/// Column-role map in declaration order. Exactly one output column.
class Schema {
public:
    explicit Schema(std::vector<ColumnRole> roles);

    const std::vector<ColumnRole>& roles() const { return roles_; }
    const std::string& output() const { return output_; }
    std::vector<std::string> candidates() const;
    /// Output plus candidate inputs; excluded columns are dropped at load time.
    std::vector<std::string> loaded_columns() const;

private:
    std::vector<ColumnRole> roles_;
    std::string output_;
};

enum class MissingPolicy { drop, forward_fill };

MissingPolicy parse_missing_policy(const std::string& text);

struct LoadOptions {
    double sample_period = 1.0;
    MissingPolicy missing = MissingPolicy::drop;
    /// Column holding timestamps; read as metadata only.
    std::optional<std::string> timestamp_column;
    std::map<std::string, std::string> units;
};

/// Reads a comma-separated file with a header row. Only schema columns are
/// kept. Rows with unparseable or non-finite cells are dropped or
/// forward-filled according to the missing-data policy. Files whose data rows
/// all carry exactly one more field than the header (a leading row label, as
/// written by R's write.csv) are accepted and the label is ignored.
TimeSeriesTable load_csv(const std::filesystem::path& path, const Schema& schema,
                         const LoadOptions& options);

struct SplitSpec {
    enum class Mode { fraction, index_ranges };
    using Range = std::pair<std::size_t, std::size_t>; // [begin, end)

    Mode mode = Mode::fraction;
    double train_fraction = 0.8;
    Range train_range{0, 0};
    Range test_range{0, 0};

    static SplitSpec fraction(double train_fraction);
    static SplitSpec ranges(Range train, Range test);
};

struct SplitResult {
    TimeSeriesTable train;
    TimeSeriesTable test;
};

/// Chronological split; no shuffling. Fraction mode puts the first
/// floor(fraction * n_rows) rows in train and the rest in test.
SplitResult split(const TimeSeriesTable& table, const SplitSpec& spec);

enum class StdConvention { population, sample };

struct ColumnStats {
    double mean = 0.0;
    double std = 1.0;
};

struct Standardization {
    std::map<std::string, ColumnStats> stats;
    /// Columns left unchanged because their standard deviation is zero.
    std::vector<std::string> zero_variance;
};

struct StandardizeResult {
    TimeSeriesTable table;
    Standardization standardization;
};

/// (v - mean) / std per column. When `stats` is omitted they are computed
/// from `table` and returned so a test table can reuse training statistics.
StandardizeResult standardize(const TimeSeriesTable& table,
                              const std::optional<Standardization>& stats = std::nullopt,
                              StdConvention convention = StdConvention::population);

} // namespace thermoid::dataset
