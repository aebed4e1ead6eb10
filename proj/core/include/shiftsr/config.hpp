#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "shiftsr/dataio.hpp"
#include "shiftsr/models.hpp"
#include "shiftsr/schedule.hpp"
#include "shiftsr/trainer.hpp"

namespace shiftsr {

struct DatasetConfig {
    std::string dir = "data/train";
    std::string val_dir = "data/val";
    int patch = 64;
    bool resample_each_epoch = false;
    // synthesis parameters used by make-dataset
    int count = 240;
    int val_count = 24;
    int image_size = 128;
};

struct ModelsConfig {
    std::string codec = "identity";  // identity | tiny_ae
    int latent_channels = 3;
    int base_channels = 16;
    int temb_dim = 32;
    int groups = 4;
    int disc_base_channels = 32;
    int ae_base_channels = 16;
    int codec_iterations = 300;
    double codec_lr = 1e-3;
    EmbedderConfig embedder{.image_channels = 3, .input_size = 64, .base_channels = 16,
                            .dim = 64, .seed = 77};
};

struct MetricsConfig {
    double rho = 0.5;
    double lowpass_frac = 0.25;
    int analyze_images = 4;
};

struct RunPaths {
    std::string teacher_checkpoint;
    std::string student_checkpoint;
    std::string input_dir;
    std::string method = "student";  // student | teacher | bicubic
};

/// Fully resolved experiment description. Every run directory receives its
/// canonical serialization, and checkpoints embed it in their manifests.
struct ExperimentConfig {
    DatasetConfig dataset;
    DegradeParams degrade;
    ScheduleConfig schedule;
    ModelsConfig models;
    TrainConfig train;  // train.schedule mirrors the schedule section
    MetricsConfig metrics;
    RunPaths run;
    std::string out_dir = "runs";
    std::uint64_t seed = 0;

    void validate() const;
};

/// The full schema with default values.
nlohmann::json default_config_json();

/// Strict deserialization: unknown keys are rejected with their dotted path,
/// type mismatches name the offending key.
ExperimentConfig parse_config(const nlohmann::json& j);

nlohmann::json to_json(const ExperimentConfig& c);

/// Canonical text form (sorted keys, stable float formatting).
std::string canonical_config_text(const ExperimentConfig& c);

/// Short hex digest of the canonical text.
std::string config_digest(const std::string& canonical_text);

/// Applies "dotted.path=value" onto a config JSON tree; the value is parsed
/// as JSON when possible and treated as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& key_value);

/// Reads a JSON config file, layers overrides, then optional seed/out flags.
/// An empty path starts from the defaults.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                             std::optional<std::uint64_t> seed_flag = std::nullopt,
                             const std::optional<std::string>& out_flag = std::nullopt);

}  // namespace shiftsr
