#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "occ/calibrate.hpp"
#include "occ/ingest.hpp"
#include "occ/model.hpp"

namespace occ {

/// The single serialized source of truth for a run. One global seed is
/// derived into per-component seeds so that every stage is reproducible.
struct RunConfig {
    std::uint64_t seed = 42;

    struct Paths {
        std::filesystem::path data;
        std::filesystem::path label_space;
        std::filesystem::path transliteration;  // empty -> built-in table
        std::filesystem::path hiscam;           // empty -> SES report skipped
        std::filesystem::path checkpoint;
        std::filesystem::path output_dir = "out";
    } paths;

    ModelConfig model;
    TrainConfig train;

    CombinationPolicy combine;
    std::vector<std::string> combine_sources;

    SplitSpec split;
    GridSpec grid;

    double finetune_val_frac = 0.1;
    TrainConfig finetune;

    /// Parses and structurally validates a config JSON document. Unknown
    /// keys fail fast; docs/config_schema.json documents the layout.
    static RunConfig from_file(const std::filesystem::path& path);
    static RunConfig from_json(const nlohmann::json& j);
};

/// Seed-derivation keys, one per seeded component.
enum class SeedStream : std::uint64_t {
    split = 1,
    combine = 2,
    train = 3,
    augment = 4,
    finetune = 5,
    review = 6,
};

std::uint64_t component_seed(std::uint64_t global_seed, SeedStream stream);

}  // namespace occ
