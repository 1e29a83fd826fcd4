#pragma once

#include "autotcl/augment.hpp"
#include "autotcl/encoder.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace autotcl {

using json = nlohmann::json;

/// Training pipeline variants: the full method, its ablations and the static baselines.
enum class Variant { autotcl, wo_h, wo_g, wo_dv, wo_aug, cutout, jitter, random_aug, adversarial };

Variant parse_variant(const std::string& name);
std::string to_string(Variant v);

/// Variants whose views come from the parametric augmentation network.
bool uses_augmentation_network(Variant v);
bool uses_static_augmentation(Variant v);

struct DataConfig {
    std::string path;
    std::string format = "ett_csv";
    std::string setting = "univariate";  // univariate: target (last) channel only
};

struct ExperimentConfig {
    EncoderConfig encoder;
    AugmentationConfig aug;
    double beta = 0.1;
    double lambda = 0.1;
    double alpha = 0.5;
    int M = 1;
    int epochs = 20;
    int batch_size = 8;
    double lr_encoder = 1e-3;
    double lr_aug = 1e-3;
    std::uint64_t seed = 0;
    int T = 200;             // training window length (0: classification instance length)
    int L = 20;              // local-contrast segment length
    double temperature = 1.0;
    int window_stride = 50;  // stride between training windows
    int eval_window = 0;     // window length for feature extraction (0: T)
    int checkpoint_every = 0;
    Variant variant = Variant::autotcl;
    double static_param = 0.5;  // cutout fraction or jitter sigma for the static variants
    DataConfig data;

    /// Throws ConfigError naming the offending key.
    void validate() const;
};

json to_json(const ExperimentConfig& cfg);

/// Strict parse: unknown keys and wrong types raise ConfigError with the key path.
ExperimentConfig config_from_json(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form: sorted keys, fixed indentation.
std::string canonical_config_text(const ExperimentConfig& cfg);

/// git-style object hash (sha1 of "blob <len>\0<canonical text>"), hex encoded.
std::string config_hash(const ExperimentConfig& cfg);

std::string sha1_hex(const std::string& bytes);

}  // namespace autotcl
