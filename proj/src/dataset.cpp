#include "thermoid/dataset.hpp"

#include "thermoid/error.hpp"
#include "csv_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace thermoid::dataset {

TimeSeriesTable::TimeSeriesTable(std::vector<Column> columns, double sample_period,
                                 std::optional<std::string> start_time, std::size_t dropped_rows)
    : columns_(std::move(columns)),
      sample_period_(sample_period),
      start_time_(std::move(start_time)),
      dropped_rows_(dropped_rows) {
    if (columns_.empty()) {
        throw DataError("table has no columns");
    }
    if (!(sample_period_ > 0.0) || !std::isfinite(sample_period_)) {
        throw DataError("sample period must be a positive finite number of seconds");
    }
    n_rows_ = columns_.front().values.size();
    std::set<std::string> seen;
    for (const auto& c : columns_) {
        if (!seen.insert(c.name).second) {
            throw DataError("duplicate column name '" + c.name + "'");
        }
        if (c.values.size() != n_rows_) {
            throw DataError("column '" + c.name + "' has " + std::to_string(c.values.size()) +
                            " values, expected " + std::to_string(n_rows_));
        }
        for (double v : c.values) {
            if (!std::isfinite(v)) {
                throw DataError("column '" + c.name + "' contains a non-finite value");
            }
        }
    }
    if (n_rows_ < 2) {
        throw DataError("table needs at least 2 rows, got " + std::to_string(n_rows_));
    }
}

std::vector<std::string> TimeSeriesTable::names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
}

bool TimeSeriesTable::has_column(const std::string& name) const {
    return std::any_of(columns_.begin(), columns_.end(),
                       [&](const Column& c) { return c.name == name; });
}

const Column& TimeSeriesTable::column(const std::string& name) const {
    for (const auto& c : columns_) {
        if (c.name == name) return c;
    }
    throw ConfigError("unknown column '" + name + "'");
}

TimeSeriesTable TimeSeriesTable::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > n_rows_) {
        throw DataError("row slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                        ") out of bounds for " + std::to_string(n_rows_) + " rows");
    }
    std::vector<Column> cols;
    cols.reserve(columns_.size());
    for (const auto& c : columns_) {
        cols.push_back({c.name,
                        std::vector<double>(c.values.begin() + static_cast<std::ptrdiff_t>(begin),
                                            c.values.begin() + static_cast<std::ptrdiff_t>(end)),
                        c.unit});
    }
    return TimeSeriesTable(std::move(cols), sample_period_, std::nullopt, 0);
}

TimeSeriesTable TimeSeriesTable::select(const std::vector<std::string>& names) const {
    std::vector<Column> cols;
    cols.reserve(names.size());
    for (const auto& n : names) cols.push_back(column(n));
    return TimeSeriesTable(std::move(cols), sample_period_, start_time_, dropped_rows_);
}

Role parse_role(const std::string& text) {
    if (text == "output") return Role::output;
    if (text == "candidate_input" || text == "input") return Role::candidate_input;
    if (text == "excluded") return Role::excluded;
    throw ConfigError("unknown column role '" + text + "'");
}

std::string to_string(Role role) {
    switch (role) {
    case Role::output: return "output";
    case Role::candidate_input: return "candidate_input";
    case Role::excluded: return "excluded";
    }
    return "excluded";
}

Schema::Schema(std::vector<ColumnRole> roles) : roles_(std::move(roles)) {
    std::set<std::string> seen;
    int outputs = 0;
    for (const auto& r : roles_) {
        if (!seen.insert(r.name).second) {
            throw ConfigError("column '" + r.name + "' appears twice in the schema");
        }
        if (r.role == Role::output) {
            ++outputs;
            output_ = r.name;
        }
    }
    if (outputs != 1) {
        throw ConfigError("schema must declare exactly one output column, found " +
                          std::to_string(outputs));
    }
}

std::vector<std::string> Schema::candidates() const {
    std::vector<std::string> out;
    for (const auto& r : roles_) {
        if (r.role == Role::candidate_input) out.push_back(r.name);
    }
    return out;
}

std::vector<std::string> Schema::loaded_columns() const {
    std::vector<std::string> out{output_};
    for (const auto& c : candidates()) out.push_back(c);
    return out;
}

MissingPolicy parse_missing_policy(const std::string& text) {
    if (text == "drop") return MissingPolicy::drop;
    if (text == "forward_fill" || text == "ffill") return MissingPolicy::forward_fill;
    throw ConfigError("unknown missing-data policy '" + text + "'");
}

TimeSeriesTable load_csv(const std::filesystem::path& path, const Schema& schema,
                         const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open CSV file '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("CSV file '" + path.string() + "' is empty");
    }
    const auto header = detail::split_csv_line(line);

    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        rows.push_back(detail::split_csv_line(line));
    }

    // A leading row label on every data row shifts fields by one.
    const bool row_labels = !rows.empty() && std::all_of(rows.begin(), rows.end(), [&](const auto& r) {
        return r.size() == header.size() + 1;
    });
    const std::size_t offset = row_labels ? 1 : 0;

    auto header_index = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };

    if (!header_index(schema.output())) {
        throw DataError("output column '" + schema.output() + "' not found in header of '" +
                        path.string() + "'");
    }
    const auto wanted = schema.loaded_columns();
    std::vector<std::size_t> idx;
    for (const auto& name : wanted) {
        auto i = header_index(name);
        if (!i) {
            throw DataError("schema column '" + name + "' not found in header of '" +
                            path.string() + "'");
        }
        idx.push_back(*i + offset);
    }
    std::optional<std::size_t> ts_idx;
    if (options.timestamp_column) {
        auto i = header_index(*options.timestamp_column);
        if (!i) {
            throw DataError("timestamp column '" + *options.timestamp_column + "' not found in '" +
                            path.string() + "'");
        }
        ts_idx = *i + offset;
    }

    std::vector<std::vector<double>> values(wanted.size());
    std::vector<double> last(wanted.size());
    bool have_last = false;
    std::size_t dropped = 0;
    std::optional<std::string> start_time;

    for (const auto& r : rows) {
        if (r.size() != header.size() + offset) {
            throw DataError("row with " + std::to_string(r.size()) + " fields in '" +
                            path.string() + "', header has " + std::to_string(header.size()));
        }
        std::vector<double> parsed(wanted.size());
        std::vector<bool> ok(wanted.size());
        bool all_ok = true;
        for (std::size_t c = 0; c < wanted.size(); ++c) {
            auto v = detail::parse_real(r[idx[c]]);
            ok[c] = v.has_value();
            parsed[c] = v.value_or(0.0);
            all_ok = all_ok && ok[c];
        }
        if (!all_ok) {
            if (options.missing == MissingPolicy::drop || !have_last) {
                ++dropped;
                continue;
            }
            for (std::size_t c = 0; c < wanted.size(); ++c) {
                if (!ok[c]) parsed[c] = last[c];
            }
        }
        if (!start_time && ts_idx) start_time = detail::trim(r[*ts_idx]);
        for (std::size_t c = 0; c < wanted.size(); ++c) values[c].push_back(parsed[c]);
        last = parsed;
        have_last = true;
    }

    if (values.front().size() < 2) {
        throw DataError("CSV file '" + path.string() + "' has fewer than 2 valid rows");
    }

    std::vector<Column> cols;
    for (std::size_t c = 0; c < wanted.size(); ++c) {
        auto unit = options.units.find(wanted[c]);
        cols.push_back({wanted[c], std::move(values[c]),
                        unit == options.units.end() ? std::string{} : unit->second});
    }
    return TimeSeriesTable(std::move(cols), options.sample_period, start_time, dropped);
}

SplitSpec SplitSpec::fraction(double train_fraction) {
    SplitSpec s;
    s.mode = Mode::fraction;
    s.train_fraction = train_fraction;
    return s;
}

SplitSpec SplitSpec::ranges(Range train, Range test) {
    SplitSpec s;
    s.mode = Mode::index_ranges;
    s.train_range = train;
    s.test_range = test;
    return s;
}

SplitResult split(const TimeSeriesTable& table, const SplitSpec& spec) {
    const std::size_t n = table.n_rows();
    SplitSpec::Range train;
    SplitSpec::Range test;
    if (spec.mode == SplitSpec::Mode::fraction) {
        if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
            throw ConfigError("train fraction must lie in (0, 1), got " +
                              std::to_string(spec.train_fraction));
        }
        const auto cut = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
        train = {0, cut};
        test = {cut, n};
    } else {
        train = spec.train_range;
        test = spec.test_range;
        if (train.first > train.second || test.first > test.second) {
            throw ConfigError("split ranges must satisfy begin <= end");
        }
        if (train.second > n || test.second > n) {
            throw ConfigError("split range exceeds the table's " + std::to_string(n) + " rows");
        }
        if (test.first < train.second) {
            throw ConfigError("split ranges must be non-overlapping with train before test");
        }
    }
    if (train.second - train.first == 0) throw DataError("split leaves an empty train slice");
    if (test.second - test.first == 0) throw DataError("split leaves an empty test slice");
    return {table.slice(train.first, train.second), table.slice(test.first, test.second)};
}

StandardizeResult standardize(const TimeSeriesTable& table,
                              const std::optional<Standardization>& stats,
                              StdConvention convention) {
    Standardization out;
    std::vector<Column> cols;
    for (const auto& c : table.columns()) {
        ColumnStats s;
        if (stats) {
            auto it = stats->stats.find(c.name);
            if (it == stats->stats.end()) {
                throw ConfigError("standardization statistics do not cover column '" + c.name + "'");
            }
            s = it->second;
        } else {
            const double n = static_cast<double>(c.values.size());
            double mean = 0.0;
            for (double v : c.values) mean += v;
            mean /= n;
            double ss = 0.0;
            for (double v : c.values) ss += (v - mean) * (v - mean);
            const double denom = convention == StdConvention::sample ? n - 1.0 : n;
            s = {mean, std::sqrt(ss / denom)};
        }
        out.stats[c.name] = s;
        Column t = c;
        if (s.std > 0.0) {
            for (double& v : t.values) v = (v - s.mean) / s.std;
        } else {
            out.zero_variance.push_back(c.name);
        }
        cols.push_back(std::move(t));
    }
    return {TimeSeriesTable(std::move(cols), table.sample_period(), table.start_time(),
                            table.dropped_rows()),
            std::move(out)};
}

} // namespace thermoid::dataset
