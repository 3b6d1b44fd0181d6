#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "modrec/arch.hpp"
#include "modrec/signal.hpp"
#include "modrec/tensor.hpp"

namespace modrec {

// One labeled IQ frame: row 0 holds I, row 1 holds Q; normalized to unit
// mean power.
struct LabeledExample {
    Tensorf iq;  // [2 x frame_len]
    std::uint8_t class_idx = 0;
    std::int8_t snr_db = 0;

    bool operator==(const LabeledExample&) const = default;
};

// Generation provenance; kept in memory only, the file format is the
// examples plus the class table.
struct GenMeta {
    std::uint64_t seed = 0;
    std::string profile;
    std::size_t frames_per_cell = 0;
};

struct Dataset {
    std::vector<std::string> class_names;
    std::vector<LabeledExample> examples;
    GenMeta meta;

    std::size_t size() const { return examples.size(); }
    std::vector<int> snr_values() const;  // sorted, unique
};

struct GenConfig {
    std::string profile = "paper";
    std::size_t frames_per_cell = 800;
    std::size_t frame_len = 128;
    int snr_min = -20;
    int snr_max = 18;
    int snr_step = 2;
    std::uint64_t seed = 0;
    SynthConfig synth;
    std::vector<Scheme> schemes = all_schemes();
    std::size_t threads = 0;

    std::vector<int> snr_grid() const;
    void validate() const;
};

// paper: 800 frames per (class, snr) cell -> 160,000 examples.
// smoke-paper: 100 per cell -> 20,000. smoke: 5 per cell -> 1,000.
GenConfig profile_config(const std::string& name);

// Synthesizes one long impaired signal per (class, snr) cell, cuts
// non-overlapping frame_len windows, and normalizes each frame to unit
// mean power. Fully determined by (cfg, seed) regardless of threads.
Dataset build_dataset(const GenConfig& cfg);

struct Splits {
    Dataset train, val, test;
};

// Stratified 60/20/20 split per (class, snr) cell after a seeded
// within-cell shuffle.
Splits split(const Dataset& d, std::uint64_t seed);

void write_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

// FNV-1a over the serialized byte image.
std::uint64_t dataset_hash(const Dataset& d);

void write_model(const Network<float>& net, const std::filesystem::path& path);
Network<float> read_model(const std::filesystem::path& path);

}  // namespace modrec
