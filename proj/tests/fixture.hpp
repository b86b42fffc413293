#pragma once

// The synthetic fixture shipped in configs/: a temperature-like output driven
// strongly by "heater", weakly by "fan" and not at all by "noise".

#include "thermoid/io.hpp"
#include "thermoid/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

namespace thermoid::testing {

inline std::filesystem::path source_path(const std::string& relative) {
    return std::filesystem::path(THERMOID_SOURCE_DIR) / relative;
}

inline synth::GeneratorSpec fixture_generator(std::optional<std::uint64_t> seed = std::nullopt) {
    auto spec = io::generator_from_json(io::read_json(source_path("configs/fixture_generator.json")));
    if (seed) spec.seed = *seed;
    return spec;
}

/// Writes synth.csv and fixture.json into `dir`; returns the config path.
inline std::filesystem::path write_fixture(const std::filesystem::path& dir,
                                           std::optional<std::uint64_t> seed = std::nullopt) {
    const auto gen = synth::generate(fixture_generator(seed));
    io::write_file(dir / "synth.csv", io::table_csv(gen.table));
    std::filesystem::copy_file(source_path("configs/fixture.json"), dir / "fixture.json",
                               std::filesystem::copy_options::overwrite_existing);
    return dir / "fixture.json";
}

} // namespace thermoid::testing
