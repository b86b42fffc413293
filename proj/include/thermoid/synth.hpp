#pragma once

#include "thermoid/dataset.hpp"
#include "thermoid/infotheory.hpp"
#include "thermoid/linmodels.hpp"
#include "thermoid/statespace.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace thermoid::synth {

/// Seeded source used by every generator. Uniforms come from std::mt19937_64
/// (whose output sequence is fixed by the C++ standard) as
/// (next() >> 11) * 2^-53; normals use the Box-Muller transform, consuming two
/// uniforms per pair and returning the cosine branch first. Nothing depends
/// on the implementation-defined std distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform();
    double normal();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct InputProcess {
    enum class Kind { white_noise, random_binary, sinusoid, step_schedule };

    Kind kind = Kind::white_noise;
    double mean = 0.0;
    /// Standard deviation (white noise), level (binary), amplitude (sinusoid).
    double amplitude = 1.0;
    double period = 50.0;
    /// Per-sample probability that a random binary signal flips.
    double switch_probability = 0.1;
    /// (start sample, level) pairs for step schedules, sorted by start.
    std::vector<std::pair<std::size_t, double>> steps;

    static Kind parse_kind(const std::string& text);
};

std::string to_string(InputProcess::Kind kind);

using TrueModel = std::variant<linmodels::PolyModel, statespace::SSModel>;

struct GeneratorSpec {
    TrueModel model;
    std::vector<InputProcess> inputs;
    double noise_std = 0.0;
    std::size_t n_samples = 1000;
    std::size_t warmup = 200;
    std::uint64_t seed = 0;
    bool allow_unstable = false;
    double sample_period = 1.0;
};

struct Generated {
    dataset::TimeSeriesTable table;
    GeneratorSpec truth;
};

/// Runs the model forward with seeded Gaussian noise of std `noise_std`,
/// drops the first `warmup` samples and returns the rest. Zero history
/// before the first generated sample. Throws ConfigError for an unstable
/// model unless allow_unstable is set.
Generated generate(const GeneratorSpec& spec);

/// Generates one input sequence of length n.
std::vector<double> generate_input(const InputProcess& process, std::size_t n, Rng& rng);

/// The standard recovery fixture: a = [-1.5, 0.7], b = [1.0, 0.5], c = [0.3],
/// delay 1, white-noise input, noise std 0.1.
GeneratorSpec canonical_armax_fixture(std::size_t n_samples, std::uint64_t seed);

/// Random stable polynomial model with poles drawn inside radius `max_radius`.
linmodels::PolyModel random_stable_model(Rng& rng, int na, int nb, int nc, int n_inputs,
                                         double max_radius = 0.9);

namespace oracle {

/// Mutual information in bits by explicit joint-count table and direct
/// double loop. Deliberately naive; used to cross-check infotheory.
double mutual_information(const infotheory::SymbolSequence& a, const infotheory::SymbolSequence& b);

/// Sample-by-sample difference-equation recursion with the noise term zero.
std::vector<double> simulate(const linmodels::PolyModel& model,
                             const std::vector<std::vector<double>>& inputs,
                             const std::vector<double>& init);

} // namespace oracle

} // namespace thermoid::synth
