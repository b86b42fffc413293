#include "support.hpp"
#include "thermoid/error.hpp"
#include "thermoid/infotheory.hpp"
#include "thermoid/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace thermoid;
using namespace thermoid::infotheory;
using thermoid::testing::make_table;

namespace {

SymbolSequence seq(std::vector<int> s, int n_bins = 3) { return from_symbols(std::move(s), n_bins); }

std::vector<int> random_symbols(std::mt19937_64& rng, std::size_t n, int k) {
    std::vector<int> s(n);
    for (auto& v : s) v = static_cast<int>(rng() % static_cast<unsigned>(k));
    return s;
}

std::vector<double> uniform_noise(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(n);
    for (auto& v : x) v = u(rng);
    return x;
}

} // namespace

TEST(Symbolize, EqualWidthSplitsRange) {
    const auto s = symbolize(std::vector<double>{0, 1, 2, 3}, 2, BinStrategy::equal_width);
    EXPECT_EQ(s.symbols, (std::vector<int>{0, 0, 1, 1}));
    EXPECT_EQ(s.n_bins, 2);
    EXPECT_FALSE(s.degenerate);
}

TEST(Symbolize, EqualWidthMaximumLandsInTopBin) {
    const auto s = symbolize(std::vector<double>{0, 10, 5, 9.999}, 4, BinStrategy::equal_width);
    EXPECT_EQ(s.symbols, (std::vector<int>{0, 3, 2, 3}));
}

TEST(Symbolize, EqualFrequencyOnePointPerBin) {
    const auto s = symbolize(std::vector<double>{10, 20, 30, 40}, 4, BinStrategy::equal_frequency);
    EXPECT_EQ(s.symbols, (std::vector<int>{0, 1, 2, 3}));
}

TEST(Symbolize, EqualFrequencyTiesBrokenByTimeOrder) {
    const auto s = symbolize(std::vector<double>{1, 1, 1, 2}, 2, BinStrategy::equal_frequency);
    EXPECT_EQ(s.symbols, (std::vector<int>{0, 0, 1, 1}));
}

TEST(Symbolize, MonotoneTransformGivesSameSymbols) {
    std::mt19937_64 rng(3);
    const auto x = uniform_noise(rng, 500);
    std::vector<double> ex(x.size());
    std::transform(x.begin(), x.end(), ex.begin(), [](double v) { return std::exp(v); });
    for (int k : {2, 5, 11}) {
        EXPECT_EQ(symbolize(x, k, BinStrategy::equal_frequency).symbols,
                  symbolize(ex, k, BinStrategy::equal_frequency).symbols);
    }
}

TEST(Symbolize, DescriptorRebinsIdentically) {
    std::mt19937_64 rng(5);
    const auto x = uniform_noise(rng, 301);
    for (auto strategy : {BinStrategy::equal_width, BinStrategy::equal_frequency}) {
        const auto s = symbolize(x, 7, strategy);
        EXPECT_EQ(s.binning.apply(x), s.symbols) << to_string(strategy);
        EXPECT_TRUE(std::is_sorted(s.binning.edges.begin(), s.binning.edges.end()));
        EXPECT_TRUE(std::adjacent_find(s.binning.edges.begin(), s.binning.edges.end()) == s.binning.edges.end());
    }
}

TEST(Symbolize, CategoricalUsesDistinctValues) {
    const auto s = symbolize(std::vector<double>{1, 0, 0, 1, 1}, 2, BinStrategy::categorical);
    EXPECT_EQ(s.symbols, (std::vector<int>{1, 0, 0, 1, 1}));
    EXPECT_EQ(s.n_bins, 2);
}

TEST(Symbolize, ConstantSeriesIsDegenerate) {
    const auto s = symbolize(std::vector<double>{4, 4, 4}, 3, BinStrategy::equal_width);
    EXPECT_TRUE(s.degenerate);
    EXPECT_EQ(s.symbols, (std::vector<int>{0, 0, 0}));
    EXPECT_DOUBLE_EQ(entropy(s), 0.0);
}

TEST(Symbolize, Errors) {
    EXPECT_THROW(symbolize(std::vector<double>{1, 2, 3}, 1, BinStrategy::equal_width), ConfigError);
    EXPECT_THROW(symbolize(std::vector<double>{1, 2}, 3, BinStrategy::equal_frequency), ConfigError);
    EXPECT_THROW(symbolize(std::vector<double>{}, 2, BinStrategy::equal_width), ConfigError);
    EXPECT_THROW(from_symbols({0, 3}, 3), ConfigError);
}

TEST(Symbolize, DefaultBinCount) {
    EXPECT_EQ(default_bin_count(4), 2);
    EXPECT_EQ(default_bin_count(100), 5);
    EXPECT_EQ(default_bin_count(8143), 16);
}

TEST(Symbolize, AutoCategoricalForBinaryColumn) {
    SymbolizeOptions opts;
    opts.n_bins = 8;
    const auto s = symbolize_column(std::vector<double>{0, 1, 1, 0, 0, 0, 1, 0, 1, 1}, opts);
    EXPECT_EQ(s.binning.strategy, BinStrategy::categorical);
    EXPECT_EQ(s.n_bins, 2);
}

TEST(Entropy, HandExamples) {
    EXPECT_DOUBLE_EQ(entropy(seq({0, 0, 0, 0})), 0.0);
    EXPECT_NEAR(entropy(seq({0, 1, 0, 1})), 1.0, 1e-15);
    // -(1/2) log2(1/2) - 2 (1/4) log2(1/4)
    EXPECT_NEAR(entropy(seq({0, 0, 1, 2})), 1.5, 1e-15);
}

TEST(Entropy, BoundedByLogAlphabet) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 8);
        const auto s = seq(random_symbols(rng, 1 + rng() % 60, k), k);
        const double h = entropy(s);
        EXPECT_GE(h, 0.0);
        EXPECT_LE(h, std::log2(k) + 1e-12);
    }
}

TEST(MutualInformation, HandExamples) {
    EXPECT_NEAR(mutual_information(seq({0, 1, 0, 1}), seq({0, 1, 0, 1})), 1.0, 1e-15);
    EXPECT_NEAR(mutual_information(seq({0, 0, 1, 1}), seq({0, 1, 0, 1})), 0.0, 1e-15);
}

TEST(MutualInformation, ThreeByTwoAgainstTripleLoop) {
    const std::vector<int> a{0, 0, 1, 1, 2, 2};
    const std::vector<int> b{1, 1, 0, 0, 1, 1};
    double brute = 0.0;
    const double n = 6.0;
    for (int u = 0; u < 3; ++u) {
        for (int v = 0; v < 2; ++v) {
            double puv = 0.0;
            double pu = 0.0;
            double pv = 0.0;
            for (std::size_t t = 0; t < a.size(); ++t) {
                puv += (a[t] == u && b[t] == v) / n;
                pu += (a[t] == u) / n;
                pv += (b[t] == v) / n;
            }
            if (puv > 0) brute += puv * std::log2(puv / (pu * pv));
        }
    }
    // b is a function of a, so I(a; b) = H(b) = H(1/3, 2/3).
    EXPECT_NEAR(brute, -(1.0 / 3) * std::log2(1.0 / 3) - (2.0 / 3) * std::log2(2.0 / 3), 1e-15);
    EXPECT_NEAR(mutual_information(seq(a), seq(b, 2)), brute, 1e-12);
    EXPECT_NEAR(synth::oracle::mutual_information(seq(a), seq(b, 2)), brute, 1e-12);
}

TEST(MutualInformation, LengthMismatch) {
    EXPECT_THROW(mutual_information(seq({0, 1}), seq({0, 1, 1})), ConfigError);
    EXPECT_THROW(synth::oracle::mutual_information(seq({0, 1}), seq({0, 1, 1})), ConfigError);
}

TEST(MutualInformation, PropertySymmetryAndSelfInformation) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + rng() % 100;
        const int ka = 1 + static_cast<int>(rng() % 6);
        const int kb = 1 + static_cast<int>(rng() % 6);
        const auto a = seq(random_symbols(rng, n, ka), ka);
        const auto b = seq(random_symbols(rng, n, kb), kb);
        EXPECT_EQ(mutual_information(a, b), mutual_information(b, a));
        EXPECT_NEAR(mutual_information(a, a), entropy(a), 1e-12);
        EXPECT_GE(mutual_information(a, b), 0.0);
    }
}

TEST(MutualInformation, PropertyMergingBinsNeverIncreasesMi) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng() % 200;
        const int k = 2 + static_cast<int>(rng() % 7);
        const auto fine = random_symbols(rng, n, k);
        const auto other = seq(random_symbols(rng, n, 4), 4);
        const int merge_at = static_cast<int>(rng() % static_cast<unsigned>(k - 1));
        std::vector<int> coarse(fine);
        for (auto& s : coarse) {
            if (s > merge_at) --s;
        }
        EXPECT_LE(mutual_information(seq(coarse, k - 1), other), mutual_information(seq(fine, k), other) + 1e-12);
    }
}

TEST(MutualInformation, PropertyRelabelingInvariance) {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng() % 150;
        const int k = 2 + static_cast<int>(rng() % 6);
        const auto a = random_symbols(rng, n, k);
        const auto b = seq(random_symbols(rng, n, 3), 3);
        std::vector<int> perm(static_cast<std::size_t>(k));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> relabeled(a.size());
        for (std::size_t t = 0; t < a.size(); ++t) relabeled[t] = perm[static_cast<std::size_t>(a[t])];
        EXPECT_NEAR(mutual_information(seq(relabeled, k), b), mutual_information(seq(a, k), b), 1e-12);
        if (entropy(seq(a, k)) > 0 && entropy(b) > 0) {
            EXPECT_NEAR(nmi_sqrt(seq(relabeled, k), b), nmi_sqrt(seq(a, k), b), 1e-12);
        }
    }
}

TEST(MutualInformation, OracleEquivalenceShortSequences) {
    // Every pair of length <= 5 over three symbols.
    for (std::size_t n = 1; n <= 5; ++n) {
        std::size_t total = 1;
        for (std::size_t i = 0; i < n; ++i) total *= 3;
        std::vector<SymbolSequence> all;
        for (std::size_t code = 0; code < total; ++code) {
            std::vector<int> s(n);
            std::size_t c = code;
            for (auto& v : s) {
                v = static_cast<int>(c % 3);
                c /= 3;
            }
            all.push_back(seq(s));
        }
        for (const auto& a : all) {
            for (const auto& b : all) {
                ASSERT_NEAR(mutual_information(a, b), synth::oracle::mutual_information(a, b), 1e-12);
            }
        }
    }
}

TEST(MutualInformation, OracleEquivalenceEveryJointTableToLengthTwelve) {
    // MI sees a pair only through its joint count table, so visiting every
    // table of n samples over 3 x 3 cells covers every pair of length n.
    std::mt19937 rng(12);
    for (int n = 1; n <= 12; ++n) {
        std::vector<int> counts(9, 0);
        auto visit = [&](auto&& self, int cell, int left) -> void {
            if (cell == 8) {
                counts[8] = left;
                std::vector<std::pair<int, int>> pairs;
                for (int c = 0; c < 9; ++c) {
                    for (int r = 0; r < counts[static_cast<std::size_t>(c)]; ++r) pairs.emplace_back(c / 3, c % 3);
                }
                std::shuffle(pairs.begin(), pairs.end(), rng);
                std::vector<int> xa, xb;
                for (const auto& [u, v] : pairs) {
                    xa.push_back(u);
                    xb.push_back(v);
                }
                const auto a = seq(xa, 3);
                const auto b = seq(xb, 3);
                ASSERT_NEAR(mutual_information(a, b), synth::oracle::mutual_information(a, b), 1e-12);
                return;
            }
            for (int c = 0; c <= left; ++c) {
                counts[static_cast<std::size_t>(cell)] = c;
                self(self, cell + 1, left - c);
            }
        };
        visit(visit, 0, n);
    }
}

TEST(NmiSqrt, Examples) {
    const auto a = seq({0, 1, 2, 0, 1, 2, 2});
    EXPECT_NEAR(nmi_sqrt(a, a), 1.0, 1e-15);
    EXPECT_NEAR(nmi_sqrt(seq({0, 0, 1, 1}), seq({0, 1, 0, 1})), 0.0, 1e-15);
    EXPECT_THROW(nmi_sqrt(seq({0, 0, 0}), seq({0, 1, 0})), NumericalError);
}

TEST(NmiSqrt, PropertyBoundsAndBaseInvariance) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 2 + rng() % 100;
        const auto a = seq(random_symbols(rng, n, 4), 4);
        const auto b = seq(random_symbols(rng, n, 5), 5);
        if (entropy(a) == 0.0 || entropy(b) == 0.0) continue;
        const double v = nmi_sqrt(a, b);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        EXPECT_NEAR(v, nmi_sqrt(a, b, LogBase::natural), 1e-12);
        EXPECT_EQ(v, nmi_sqrt(b, a));
    }
}

TEST(NmiSqrt, PropertyMonotoneTransformInvariance) {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = uniform_noise(rng, 400);
        auto y = uniform_noise(rng, 400);
        for (std::size_t t = 0; t < y.size(); ++t) y[t] += x[t];
        std::vector<double> fx(x.size());
        std::transform(x.begin(), x.end(), fx.begin(), [](double v) { return std::pow(v, 3) + 2.0 * v; });
        const auto sy = symbolize(y, 8, BinStrategy::equal_frequency);
        EXPECT_EQ(nmi_sqrt(symbolize(fx, 8, BinStrategy::equal_frequency), sy),
                  nmi_sqrt(symbolize(x, 8, BinStrategy::equal_frequency), sy));
    }
}

TEST(DependencyMatrix, IdenticalColumns) {
    std::mt19937_64 rng(31);
    const auto x = uniform_noise(rng, 200);
    const auto m = dependency_matrix(make_table({{"a", x}, {"b", x}}), {}, Metric::nmi_sqrt);
    EXPECT_DOUBLE_EQ(m.values(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(m.values(1, 1), 0.0);
    EXPECT_NEAR(m.values(0, 1), 1.0, 1e-12);
    EXPECT_NEAR(m.at("b", "a"), 1.0, 1e-12);
}

TEST(DependencyMatrix, IndependentNoiseStaysNearZero) {
    std::mt19937_64 rng(37);
    const std::size_t n = 10000;
    const auto t = make_table({{"x", uniform_noise(rng, n)}, {"y", uniform_noise(rng, n)}, {"z", uniform_noise(rng, n)}});
    SymbolizeOptions opts;
    opts.n_bins = 10;
    const auto m = dependency_matrix(t, opts, Metric::nmi_sqrt);

    // Surrogate reference: NMI after destroying any dependence by shuffling.
    auto shuffled = std::vector<double>(t.values("y").begin(), t.values("y").end());
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto sx = symbolize(t.values("x"), 10, BinStrategy::equal_frequency);
    const double surrogate = nmi_sqrt(sx, symbolize(shuffled, 10, BinStrategy::equal_frequency));
    for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) {
            if (i == j) continue;
            EXPECT_LT(m.values(i, j), 0.05);
            EXPECT_LT(m.values(i, j), 5.0 * surrogate + 1e-3);
        }
    }
}

TEST(DependencyMatrix, PropertySymmetricAndBounded) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 50 + rng() % 400;
        const auto base = uniform_noise(rng, n);
        auto mix = uniform_noise(rng, n);
        for (std::size_t t = 0; t < n; ++t) mix[t] = 0.5 * mix[t] + base[t];
        const auto table = make_table({{"a", base}, {"b", mix}, {"c", uniform_noise(rng, n)}});
        for (auto metric : {Metric::mi, Metric::nmi_sqrt}) {
            const auto m = dependency_matrix(table, {}, metric);
            EXPECT_LE((m.values - m.values.transpose()).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_EQ(m.values.diagonal().cwiseAbs().maxCoeff(), 0.0);
            if (metric == Metric::nmi_sqrt) {
                EXPECT_LE(m.values.maxCoeff(), 1.0);
                EXPECT_GE(m.values.minCoeff(), 0.0);
            }
        }
    }
}

TEST(DependencyMatrix, DegenerateColumnFlagged) {
    const auto t = make_table({{"y", {1, 2, 3, 4, 5, 6}}, {"c", {2, 2, 2, 2, 2, 2}}, {"x", {6, 5, 4, 3, 2, 1}}});
    const auto m = dependency_matrix(t, {}, Metric::nmi_sqrt);
    EXPECT_TRUE(m.degenerate(0, 1));
    EXPECT_TRUE(m.degenerate(1, 2));
    EXPECT_FALSE(m.degenerate(0, 2));
    EXPECT_DOUBLE_EQ(m.values(0, 1), 0.0);
}

TEST(DependencyMatrix, ScheduleIndependent) {
    std::mt19937_64 rng(43);
    std::vector<std::pair<std::string, std::vector<double>>> cols;
    for (int j = 0; j < 6; ++j) cols.push_back({"c" + std::to_string(j), uniform_noise(rng, 777)});
    const auto t = make_table(cols);
    const auto first = dependency_matrix(t, {}, Metric::nmi_sqrt);
    for (int rep = 0; rep < 5; ++rep) {
        const auto again = dependency_matrix(t, {}, Metric::nmi_sqrt);
        EXPECT_TRUE((first.values.array() == again.values.array()).all());
    }
}

TEST(RankInputs, StableTieBreak) {
    DependencyMatrix m;
    m.labels = {"T", "A", "B", "C"};
    m.values = Eigen::MatrixXd::Zero(4, 4);
    m.degenerate = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(4, 4, false);
    m.values(0, 1) = m.values(1, 0) = 0.3;
    m.values(0, 2) = m.values(2, 0) = 0.1;
    m.values(0, 3) = m.values(3, 0) = 0.3;
    const auto r = rank_inputs(m, "T");
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[0].name, "A");
    EXPECT_EQ(r[1].name, "C");
    EXPECT_EQ(r[2].name, "B");
    EXPECT_THROW(rank_inputs(m, "nope"), ConfigError);
}

TEST(RankInputs, AllEqualKeepsColumnOrder) {
    DependencyMatrix m;
    m.labels = {"T", "x3", "x1", "x2"};
    m.values = Eigen::MatrixXd::Constant(4, 4, 0.2);
    m.values.diagonal().setZero();
    m.degenerate = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(4, 4, false);
    const auto r = rank_inputs(m, "T");
    EXPECT_EQ(r[0].name, "x3");
    EXPECT_EQ(r[1].name, "x1");
    EXPECT_EQ(r[2].name, "x2");
}
