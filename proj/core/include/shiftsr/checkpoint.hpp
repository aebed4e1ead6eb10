#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "shiftsr/nn/layers.hpp"
#include "shiftsr/nn/tensor.hpp"

namespace shiftsr {

// On-disk model state: a binary tensor blob (params.bin) plus a JSON manifest
// (manifest.json) carrying the compatibility contract - tensor names, shapes,
// dtype, schedule etas as decimal strings, RNG state, and counters.
struct Checkpoint {
    std::string kind;
    std::int64_t iteration = 0;
    /// Exact resolved experiment config (verbatim text); the manifest also
    /// records a short digest of it for quick comparison.
    std::string config_text;
    std::vector<double> etas;
    double kappa = 0.0;
    std::string rng_state;
    std::map<std::string, nn::Tensor> tensors;
    std::map<std::string, nn::Tensor> opt_tensors;
    std::int64_t opt_iterations = 0;
};

void save_checkpoint(const std::string& dir, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& dir);

std::map<std::string, nn::Tensor> export_params(const nn::ParamRegistry& reg);

// Strict import: every registry parameter must be present with its exact
// shape; unknown names in `t` are rejected.
void import_params(nn::ParamRegistry& reg, const std::map<std::string, nn::Tensor>& t);

// Order-sensitive digest over names and values of all registered parameters.
std::uint64_t params_checksum(const nn::ParamRegistry& reg);

std::string rng_to_string(const std::mt19937_64& rng);
std::mt19937_64 rng_from_string(const std::string& s);

}  // namespace shiftsr
