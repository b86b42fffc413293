#include "thermoid/synth.hpp"

#include "thermoid/error.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <set>

namespace thermoid::synth {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
}

InputProcess::Kind InputProcess::parse_kind(const std::string& text) {
    if (text == "white_noise") return Kind::white_noise;
    if (text == "random_binary") return Kind::random_binary;
    if (text == "sinusoid") return Kind::sinusoid;
    if (text == "step_schedule") return Kind::step_schedule;
    throw ConfigError("unknown input process '" + text + "'");
}

std::string to_string(InputProcess::Kind kind) {
    switch (kind) {
    case InputProcess::Kind::white_noise: return "white_noise";
    case InputProcess::Kind::random_binary: return "random_binary";
    case InputProcess::Kind::sinusoid: return "sinusoid";
    case InputProcess::Kind::step_schedule: return "step_schedule";
    }
    return "white_noise";
}

std::vector<double> generate_input(const InputProcess& p, std::size_t n, Rng& rng) {
    std::vector<double> x(n);
    switch (p.kind) {
    case InputProcess::Kind::white_noise:
        for (auto& v : x) v = p.mean + p.amplitude * rng.normal();
        break;
    case InputProcess::Kind::random_binary: {
        bool high = rng.uniform() < 0.5;
        for (auto& v : x) {
            if (rng.uniform() < p.switch_probability) high = !high;
            v = p.mean + (high ? p.amplitude : 0.0);
        }
        break;
    }
    case InputProcess::Kind::sinusoid:
        if (!(p.period > 0.0)) throw ConfigError("sinusoid period must be positive");
        for (std::size_t t = 0; t < n; ++t) {
            x[t] = p.mean + p.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / p.period);
        }
        break;
    case InputProcess::Kind::step_schedule: {
        double level = p.mean;
        std::size_t next = 0;
        for (std::size_t t = 0; t < n; ++t) {
            while (next < p.steps.size() && p.steps[next].first <= t) level = p.steps[next++].second;
            x[t] = level;
        }
        break;
    }
    }
    return x;
}

namespace {

std::string default_name(const std::vector<std::string>& names, std::size_t j) {
    return j < names.size() && !names[j].empty() ? names[j] : "u" + std::to_string(j + 1);
}

} // namespace

Generated generate(const GeneratorSpec& spec) {
    if (spec.n_samples < 2) throw ConfigError("generator needs at least 2 samples");
    if (spec.noise_std < 0.0) throw ConfigError("noise_std must be nonnegative");
    const std::size_t total = spec.warmup + spec.n_samples;
    Rng rng(spec.seed);

    std::size_t m = 0;
    std::vector<std::string> input_names;
    std::string output_name;
    if (const auto* pm = std::get_if<linmodels::PolyModel>(&spec.model)) {
        pm->validate();
        if (!spec.allow_unstable && !linmodels::check_stability(*pm).stable) {
            throw ConfigError("generator model is unstable; set allow_unstable to override");
        }
        m = pm->n_inputs();
        input_names = pm->input_names;
        output_name = pm->output_name;
    } else {
        const auto& ss = std::get<statespace::SSModel>(spec.model);
        ss.validate();
        if (!spec.allow_unstable && ss.spectral_radius() >= 1.0) {
            throw ConfigError("generator model is unstable; set allow_unstable to override");
        }
        m = static_cast<std::size_t>(ss.n_inputs());
        input_names = ss.input_names;
        output_name = ss.output_name;
    }
    if (spec.inputs.size() != m) {
        throw ConfigError("generator has " + std::to_string(spec.inputs.size()) +
                          " input processes for a model with " + std::to_string(m) + " inputs");
    }

    std::vector<std::vector<double>> u;
    for (const auto& p : spec.inputs) u.push_back(generate_input(p, total, rng));
    std::vector<double> e(total);
    for (auto& v : e) v = spec.noise_std * rng.normal();

    std::vector<double> y(total, 0.0);
    if (const auto* pm = std::get_if<linmodels::PolyModel>(&spec.model)) {
        for (std::size_t t = 0; t < total; ++t) {
            double acc = e[t];
            for (std::size_t i = 1; i <= pm->na() && i <= t; ++i) acc -= pm->a[i - 1] * y[t - i];
            for (std::size_t i = 1; i <= pm->nc() && i <= t; ++i) acc += pm->c[i - 1] * e[t - i];
            for (std::size_t j = 0; j < m; ++j) {
                const auto d = static_cast<std::size_t>(pm->delays[j]);
                for (std::size_t k = 0; k < pm->b[j].size(); ++k) {
                    if (t >= d + k) acc += pm->b[j][k] * u[j][t - d - k];
                }
            }
            y[t] = acc;
        }
    } else {
        const auto& ss = std::get<statespace::SSModel>(spec.model);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(ss.order());
        Eigen::VectorXd ut(static_cast<Eigen::Index>(m));
        for (std::size_t t = 0; t < total; ++t) {
            for (std::size_t j = 0; j < m; ++j) ut(static_cast<Eigen::Index>(j)) = u[j][t];
            y[t] = (ss.C * x)(0) + (ss.D * ut)(0) + e[t];
            x = ss.A * x + ss.B * ut + ss.K.col(0) * e[t];
        }
    }

    const auto skip = static_cast<std::ptrdiff_t>(spec.warmup);
    std::vector<dataset::Column> cols;
    cols.push_back({output_name.empty() ? "y" : output_name, {y.begin() + skip, y.end()}, ""});
    for (std::size_t j = 0; j < m; ++j) {
        cols.push_back({default_name(input_names, j), {u[j].begin() + skip, u[j].end()}, ""});
    }
    return {dataset::TimeSeriesTable(std::move(cols), spec.sample_period), spec};
}

GeneratorSpec canonical_armax_fixture(std::size_t n_samples, std::uint64_t seed) {
    linmodels::PolyModel m;
    m.a = {-1.5, 0.7};
    m.b = {{1.0, 0.5}};
    m.c = {0.3};
    m.delays = {1};
    m.input_names = {"u"};
    m.output_name = "y";
    m.noise_variance = 0.01;
    GeneratorSpec spec;
    spec.model = m;
    spec.inputs = {InputProcess{}};
    spec.noise_std = 0.1;
    spec.n_samples = n_samples;
    spec.seed = seed;
    return spec;
}

namespace {

std::vector<double> random_stable_poly(Rng& rng, int degree, double max_radius) {
    std::vector<std::complex<double>> roots;
    while (static_cast<int>(roots.size()) < degree) {
        const double r = max_radius * rng.uniform();
        if (degree - static_cast<int>(roots.size()) >= 2 && rng.uniform() < 0.5) {
            const double phi = std::numbers::pi * rng.uniform();
            roots.push_back(std::polar(r, phi));
            roots.push_back(std::polar(r, -phi));
        } else {
            roots.emplace_back(rng.uniform() < 0.5 ? -r : r, 0.0);
        }
    }
    std::vector<std::complex<double>> poly{1.0};
    for (const auto& z : roots) {
        std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            next[i] += poly[i];
            next[i + 1] -= z * poly[i];
        }
        poly = std::move(next);
    }
    std::vector<double> out;
    for (std::size_t i = 1; i < poly.size(); ++i) out.push_back(poly[i].real());
    return out;
}

} // namespace

linmodels::PolyModel random_stable_model(Rng& rng, int na, int nb, int nc, int n_inputs,
                                         double max_radius) {
    linmodels::PolyModel m;
    m.a = random_stable_poly(rng, na, max_radius);
    m.c = random_stable_poly(rng, nc, max_radius);
    m.output_name = "y";
    for (int j = 0; j < n_inputs; ++j) {
        std::vector<double> bj(static_cast<std::size_t>(nb) + 1);
        for (auto& v : bj) v = rng.normal();
        m.b.push_back(std::move(bj));
        m.delays.push_back(static_cast<int>(rng.uniform() * 3.0));
        m.input_names.push_back("u" + std::to_string(j + 1));
    }
    return m;
}

namespace oracle {

double mutual_information(const infotheory::SymbolSequence& a, const infotheory::SymbolSequence& b) {
    if (a.symbols.size() != b.symbols.size()) throw ConfigError("oracle_mi: length mismatch");
    if (a.symbols.empty()) throw ConfigError("oracle_mi: empty sequences");
    const double n = static_cast<double>(a.symbols.size());
    std::map<std::pair<int, int>, int> joint;
    std::map<int, int> pa;
    std::map<int, int> pb;
    for (std::size_t t = 0; t < a.symbols.size(); ++t) {
        joint[{a.symbols[t], b.symbols[t]}] += 1;
        pa[a.symbols[t]] += 1;
        pb[b.symbols[t]] += 1;
    }
    double mi = 0.0;
    for (const auto& [u, cu] : pa) {
        for (const auto& [v, cv] : pb) {
            auto it = joint.find({u, v});
            if (it == joint.end()) continue;
            const double puv = it->second / n;
            mi += puv * std::log2(puv / ((cu / n) * (cv / n)));
        }
    }
    return mi;
}

std::vector<double> simulate(const linmodels::PolyModel& model,
                             const std::vector<std::vector<double>>& inputs,
                             const std::vector<double>& init) {
    const std::size_t n = inputs.empty() ? init.size() : inputs[0].size();
    std::vector<double> y;
    y.reserve(n);
    auto past_y = [&](long t) { return t < 0 ? 0.0 : y[static_cast<std::size_t>(t)]; };
    auto past_x = [&](std::size_t j, long t) {
        return t < 0 ? 0.0 : inputs[j][static_cast<std::size_t>(t)];
    };
    for (long t = 0; t < static_cast<long>(n); ++t) {
        if (t < static_cast<long>(init.size())) {
            y.push_back(init[static_cast<std::size_t>(t)]);
            continue;
        }
        double ar = 0.0;
        for (long i = 0; i < static_cast<long>(model.a.size()); ++i) {
            ar += model.a[static_cast<std::size_t>(i)] * past_y(t - 1 - i);
        }
        double ex = 0.0;
        for (std::size_t j = 0; j < model.b.size(); ++j) {
            for (long k = 0; k < static_cast<long>(model.b[j].size()); ++k) {
                ex += model.b[j][static_cast<std::size_t>(k)] * past_x(j, t - model.delays[j] - k);
            }
        }
        y.push_back(ex - ar);
    }
    return y;
}

} // namespace oracle

} // namespace thermoid::synth
