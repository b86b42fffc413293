#pragma once

#include "thermoid/dataset.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace thermoid::infotheory {

enum class BinStrategy { equal_width, equal_frequency, categorical };

BinStrategy parse_strategy(const std::string& text);
std::string to_string(BinStrategy strategy);

/// How a real series was cut into symbols. `apply` re-bins new data with the
/// same rule.
struct Binning {
    BinStrategy strategy = BinStrategy::equal_frequency;
    /// n_bins + 1 boundaries for interval strategies; the sorted distinct
    /// values for `categorical`.
    std::vector<double> edges;

    int n_bins() const;
    int bin_of(double v) const;
    std::vector<int> apply(std::span<const double> values) const;
};

struct SymbolSequence {
    std::vector<int> symbols;
    int n_bins = 0;
    Binning binning;
    /// Set when the source series is constant (every symbol is 0, one bin).
    bool degenerate = false;
};

/// Wraps already-discrete symbols. Throws ConfigError when a symbol is
/// negative or not below `n_bins`.
SymbolSequence from_symbols(std::vector<int> symbols, int n_bins);

/// Discretizes a real series.
///
/// equal_width splits [min, max] into `n_bins` equal intervals with the
/// maximum landing in the top bin. equal_frequency assigns the i-th value in
/// stable sorted order to bin floor(i * n_bins / N), so tied values are split
/// by time order and every bin holds N / n_bins points (give or take one).
/// categorical maps each distinct value to its rank.
SymbolSequence symbolize(std::span<const double> values, int n_bins, BinStrategy strategy);

/// Default bin count: max(2, floor(sqrt(N) / 2)) capped at 16.
int default_bin_count(std::size_t n);

struct SymbolizeOptions {
    std::optional<int> n_bins; ///< nullopt selects default_bin_count
    BinStrategy strategy = BinStrategy::equal_frequency;
    /// Columns with at most n_bins distinct values are binned categorically.
    bool auto_categorical = true;
};

/// symbolize() with the column-level defaults applied.
SymbolSequence symbolize_column(std::span<const double> values, const SymbolizeOptions& options);

struct JointHistogram {
    Eigen::MatrixX<long long> counts;
    long long total = 0;

    static JointHistogram of(const SymbolSequence& a, const SymbolSequence& b);
};

enum class LogBase { two, natural };

/// Plug-in entropy of the empirical symbol distribution; 0 <= H <= log(n_bins).
double entropy(const SymbolSequence& s, LogBase base = LogBase::two);

/// Plug-in mutual information from the empirical joint histogram. Zero-count
/// cells contribute nothing; tiny negative round-off is clamped to 0.
double mutual_information(const SymbolSequence& a, const SymbolSequence& b,
                          LogBase base = LogBase::two);

/// I(a;b) / sqrt(H(a) H(b)), clamped to [0, 1]. Throws NumericalError when
/// either entropy is zero.
double nmi_sqrt(const SymbolSequence& a, const SymbolSequence& b, LogBase base = LogBase::two);

enum class Metric { mi, nmi_sqrt };

Metric parse_metric(const std::string& text);
std::string to_string(Metric metric);

/// Pairwise dependency values between table columns. The diagonal is 0 by
/// convention: only relations between distinct variables are reported, even
/// though I(U;U) = H(U).
struct DependencyMatrix {
    std::vector<std::string> labels;
    Eigen::MatrixXd values;
    Metric metric = Metric::nmi_sqrt;
    /// degenerate(i, j) is set when the cell was forced to 0 because a column
    /// has zero entropy.
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> degenerate;
    /// Bin count used per column, in label order.
    std::vector<int> bins;
    std::vector<BinStrategy> strategies;

    std::size_t index_of(const std::string& label) const;
    double at(const std::string& row, const std::string& col) const;
};

/// Cells are evaluated on worker threads; each cell reads shared immutable
/// symbol sequences and writes only its own slot, so the result does not
/// depend on scheduling.
DependencyMatrix dependency_matrix(const dataset::TimeSeriesTable& table,
                                   const SymbolizeOptions& options, Metric metric);

struct RankedInput {
    std::string name;
    double value = 0.0;
    bool degenerate = false;
};

/// Labels other than `target` (or only `candidates`, when given) sorted by
/// their value in the target row, descending; ties keep label order.
std::vector<RankedInput> rank_inputs(const DependencyMatrix& matrix, const std::string& target,
                                     const std::optional<std::vector<std::string>>& candidates =
                                         std::nullopt);

} // namespace thermoid::infotheory
