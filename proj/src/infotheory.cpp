#include "thermoid/infotheory.hpp"

#include "thermoid/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>
#include <tuple>

namespace thermoid::infotheory {

BinStrategy parse_strategy(const std::string& text) {
    if (text == "equal_width") return BinStrategy::equal_width;
    if (text == "equal_frequency") return BinStrategy::equal_frequency;
    if (text == "categorical") return BinStrategy::categorical;
    throw ConfigError("unknown binning strategy '" + text + "'");
}

std::string to_string(BinStrategy strategy) {
    switch (strategy) {
    case BinStrategy::equal_width: return "equal_width";
    case BinStrategy::equal_frequency: return "equal_frequency";
    case BinStrategy::categorical: return "categorical";
    }
    return "equal_frequency";
}

int Binning::n_bins() const {
    if (strategy == BinStrategy::categorical) return static_cast<int>(edges.size());
    return std::max(1, static_cast<int>(edges.size()) - 1);
}

int Binning::bin_of(double v) const {
    const int n = n_bins();
    if (strategy == BinStrategy::categorical) {
        auto it = std::upper_bound(edges.begin(), edges.end(), v);
        return std::clamp(static_cast<int>(it - edges.begin()) - 1, 0, n - 1);
    }
    // Count interior edges <= v.
    auto first = edges.begin() + 1;
    auto last = edges.end() - 1;
    if (first >= last) return 0;
    auto it = std::upper_bound(first, last, v);
    return std::clamp(static_cast<int>(it - first), 0, n - 1);
}

std::vector<int> Binning::apply(std::span<const double> values) const {
    std::vector<int> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return bin_of(v); });
    return out;
}

SymbolSequence from_symbols(std::vector<int> symbols, int n_bins) {
    if (symbols.empty()) throw ConfigError("symbol sequence must be nonempty");
    if (n_bins < 1) throw ConfigError("symbol alphabet must have at least one bin");
    for (int s : symbols) {
        if (s < 0 || s >= n_bins) {
            throw ConfigError("symbol " + std::to_string(s) + " outside [0, " +
                              std::to_string(n_bins) + ")");
        }
    }
    SymbolSequence out;
    out.symbols = std::move(symbols);
    out.n_bins = n_bins;
    out.binning.strategy = BinStrategy::categorical;
    out.binning.edges.resize(static_cast<std::size_t>(n_bins));
    std::iota(out.binning.edges.begin(), out.binning.edges.end(), 0.0);
    out.degenerate = std::all_of(out.symbols.begin(), out.symbols.end(),
                                 [&](int s) { return s == out.symbols.front(); });
    return out;
}

namespace {

SymbolSequence constant_sequence(std::size_t n, double v, BinStrategy strategy) {
    SymbolSequence out;
    out.symbols.assign(n, 0);
    out.n_bins = 1;
    out.binning.strategy = strategy;
    out.binning.edges = strategy == BinStrategy::categorical ? std::vector<double>{v}
                                                             : std::vector<double>{v - 0.5, v + 0.5};
    out.degenerate = true;
    return out;
}

std::vector<double> distinct_sorted(std::span<const double> values) {
    std::vector<double> d(values.begin(), values.end());
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    return d;
}

} // namespace

SymbolSequence symbolize(std::span<const double> values, int n_bins, BinStrategy strategy) {
    if (values.empty()) throw ConfigError("cannot symbolize an empty series");
    for (double v : values) {
        if (!std::isfinite(v)) throw ConfigError("cannot symbolize non-finite values");
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;

    if (strategy == BinStrategy::categorical) {
        auto distinct = distinct_sorted(values);
        if (distinct.size() == 1) return constant_sequence(values.size(), lo, strategy);
        SymbolSequence out;
        out.binning.strategy = strategy;
        out.binning.edges = std::move(distinct);
        out.symbols = out.binning.apply(values);
        out.n_bins = out.binning.n_bins();
        return out;
    }

    if (n_bins < 2) throw ConfigError("n_bins must be at least 2, got " + std::to_string(n_bins));
    if (lo == hi) return constant_sequence(values.size(), lo, strategy);

    SymbolSequence out;
    out.n_bins = n_bins;
    out.binning.strategy = strategy;
    auto& edges = out.binning.edges;
    edges.resize(static_cast<std::size_t>(n_bins) + 1);

    if (strategy == BinStrategy::equal_width) {
        const double width = (hi - lo) / n_bins;
        for (int k = 0; k <= n_bins; ++k) edges[static_cast<std::size_t>(k)] = lo + k * width;
        edges.back() = hi;
        out.symbols = out.binning.apply(values);
        return out;
    }

    const std::size_t n = values.size();
    if (n < static_cast<std::size_t>(n_bins)) {
        throw ConfigError("equal_frequency binning needs at least n_bins = " +
                          std::to_string(n_bins) + " values, got " + std::to_string(n));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    out.symbols.resize(n);
    for (std::size_t rank = 0; rank < n; ++rank) {
        out.symbols[order[rank]] = static_cast<int>(rank * static_cast<std::size_t>(n_bins) / n);
    }
    edges.front() = lo;
    edges.back() = hi;
    for (int j = 1; j < n_bins; ++j) {
        // First rank that lands in bin j.
        const std::size_t k = (static_cast<std::size_t>(j) * n + static_cast<std::size_t>(n_bins) - 1) /
                              static_cast<std::size_t>(n_bins);
        edges[static_cast<std::size_t>(j)] = 0.5 * (values[order[k - 1]] + values[order[k]]);
    }
    return out;
}

int default_bin_count(std::size_t n) {
    const int b = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n)) / 2.0));
    return std::clamp(b, 2, 16);
}

SymbolSequence symbolize_column(std::span<const double> values, const SymbolizeOptions& options) {
    const int n_bins = options.n_bins.value_or(default_bin_count(values.size()));
    if (options.auto_categorical) {
        // Early exit once more than n_bins distinct values are seen.
        std::vector<double> seen;
        for (double v : values) {
            if (std::find(seen.begin(), seen.end(), v) == seen.end()) {
                seen.push_back(v);
                if (seen.size() > static_cast<std::size_t>(n_bins)) break;
            }
        }
        if (seen.size() <= static_cast<std::size_t>(n_bins)) {
            return symbolize(values, n_bins, BinStrategy::categorical);
        }
    }
    return symbolize(values, n_bins, options.strategy);
}

JointHistogram JointHistogram::of(const SymbolSequence& a, const SymbolSequence& b) {
    if (a.symbols.size() != b.symbols.size()) {
        throw ConfigError("symbol sequences differ in length (" + std::to_string(a.symbols.size()) +
                          " vs " + std::to_string(b.symbols.size()) + ")");
    }
    if (a.symbols.empty()) throw ConfigError("symbol sequences must be nonempty");
    JointHistogram h;
    h.counts = Eigen::MatrixX<long long>::Zero(a.n_bins, b.n_bins);
    for (std::size_t t = 0; t < a.symbols.size(); ++t) {
        ++h.counts(a.symbols[t], b.symbols[t]);
    }
    h.total = static_cast<long long>(a.symbols.size());
    return h;
}

namespace {

double log_in(double x, LogBase base) { return base == LogBase::two ? std::log2(x) : std::log(x); }

std::vector<long long> marginal_counts(const SymbolSequence& s) {
    std::vector<long long> c(static_cast<std::size_t>(s.n_bins), 0);
    for (int v : s.symbols) ++c[static_cast<std::size_t>(v)];
    return c;
}

} // namespace

double entropy(const SymbolSequence& s, LogBase base) {
    if (s.symbols.empty()) throw ConfigError("entropy of an empty sequence");
    const auto counts = marginal_counts(s);
    const double n = static_cast<double>(s.symbols.size());
    const double log_n = log_in(n, base);
    double h = 0.0;
    for (long long c : counts) {
        if (c == 0) continue;
        const double cd = static_cast<double>(c);
        h += (cd / n) * (log_n - log_in(cd, base));
    }
    return std::max(0.0, h);
}

double mutual_information(const SymbolSequence& a, const SymbolSequence& b, LogBase base) {
    // Summation order follows the histogram orientation, so fix one
    // orientation per unordered pair to make I(a;b) == I(b;a) bit for bit.
    const bool swap = std::tie(b.n_bins, b.symbols) < std::tie(a.n_bins, a.symbols);
    const auto h = swap ? JointHistogram::of(b, a) : JointHistogram::of(a, b);
    const auto rows = h.counts.rowwise().sum().eval();
    const auto cols = h.counts.colwise().sum().eval();
    const double n = static_cast<double>(h.total);
    const double log_n = log_in(n, base);
    double mi = 0.0;
    for (Eigen::Index i = 0; i < h.counts.rows(); ++i) {
        for (Eigen::Index j = 0; j < h.counts.cols(); ++j) {
            const long long c = h.counts(i, j);
            if (c == 0) continue;
            const double cd = static_cast<double>(c);
            const double term = (log_n - log_in(static_cast<double>(cols(j)), base)) +
                                (log_in(cd, base) - log_in(static_cast<double>(rows(i)), base));
            mi += (cd / n) * term;
        }
    }
    return std::max(0.0, mi);
}

double nmi_sqrt(const SymbolSequence& a, const SymbolSequence& b, LogBase base) {
    const double ha = entropy(a, base);
    const double hb = entropy(b, base);
    if (ha <= 0.0 || hb <= 0.0) {
        throw NumericalError("normalized mutual information undefined: zero entropy input");
    }
    const double v = mutual_information(a, b, base) / std::sqrt(ha * hb);
    return std::clamp(v, 0.0, 1.0);
}

Metric parse_metric(const std::string& text) {
    if (text == "mi" || text == "MI") return Metric::mi;
    if (text == "nmi_sqrt" || text == "NMI_sqrt" || text == "nmi") return Metric::nmi_sqrt;
    throw ConfigError("unknown dependency metric '" + text + "'");
}

std::string to_string(Metric metric) { return metric == Metric::mi ? "MI" : "NMI_sqrt"; }

std::size_t DependencyMatrix::index_of(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw ConfigError("label '" + label + "' not in dependency matrix");
    return static_cast<std::size_t>(it - labels.begin());
}

double DependencyMatrix::at(const std::string& row, const std::string& col) const {
    return values(static_cast<Eigen::Index>(index_of(row)), static_cast<Eigen::Index>(index_of(col)));
}

DependencyMatrix dependency_matrix(const dataset::TimeSeriesTable& table,
                                   const SymbolizeOptions& options, Metric metric) {
    const auto k = table.n_columns();
    if (k < 2) throw ConfigError("dependency matrix needs at least 2 columns");
    const int bins = options.n_bins.value_or(default_bin_count(table.n_rows()));
    if (table.n_rows() < static_cast<std::size_t>(bins)) {
        throw ConfigError("dependency matrix needs at least n_bins = " + std::to_string(bins) +
                          " rows, got " + std::to_string(table.n_rows()));
    }

    DependencyMatrix m;
    m.labels = table.names();
    m.metric = metric;
    std::vector<SymbolSequence> seqs;
    seqs.reserve(k);
    for (const auto& c : table.columns()) {
        seqs.push_back(symbolize_column(c.values, options));
        m.bins.push_back(seqs.back().n_bins);
        m.strategies.push_back(seqs.back().binning.strategy);
    }
    const auto dim = static_cast<Eigen::Index>(k);
    m.values = Eigen::MatrixXd::Zero(dim, dim);
    m.degenerate = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(dim, dim, false);

    std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = i + 1; j < dim; ++j) cells.emplace_back(i, j);
    }

    auto evaluate = [&](std::size_t c) {
        const auto [i, j] = cells[c];
        const auto& a = seqs[static_cast<std::size_t>(i)];
        const auto& b = seqs[static_cast<std::size_t>(j)];
        const bool degenerate = a.degenerate || b.degenerate;
        double v = 0.0;
        if (!degenerate) v = metric == Metric::mi ? mutual_information(a, b) : nmi_sqrt(a, b);
        m.values(i, j) = m.values(j, i) = v;
        m.degenerate(i, j) = m.degenerate(j, i) = degenerate;
    };

    const std::size_t workers =
        std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), cells.size());
    if (workers <= 1) {
        for (std::size_t c = 0; c < cells.size(); ++c) evaluate(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t c = next++; c < cells.size(); c = next++) evaluate(c);
            });
        }
    }
    return m;
}

std::vector<RankedInput> rank_inputs(const DependencyMatrix& matrix, const std::string& target,
                                     const std::optional<std::vector<std::string>>& candidates) {
    const auto row = static_cast<Eigen::Index>(matrix.index_of(target));
    std::vector<RankedInput> out;
    auto push = [&](const std::string& name) {
        const auto col = static_cast<Eigen::Index>(matrix.index_of(name));
        out.push_back({name, matrix.values(row, col), matrix.degenerate(row, col)});
    };
    if (candidates) {
        for (const auto& c : *candidates) {
            if (c != target) push(c);
        }
    } else {
        for (const auto& l : matrix.labels) {
            if (l != target) push(l);
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedInput& a, const RankedInput& b) { return a.value > b.value; });
    return out;
}

} // namespace thermoid::infotheory
