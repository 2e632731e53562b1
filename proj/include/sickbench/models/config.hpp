#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace sickbench::models {

// Dilated-causal-convolution residual stack; dilations grow as
// dilation_base^i per block (1, 2, 4, 8, 16 with the defaults).
struct DeepTcnConfig {
    std::size_t residual_blocks = 5;
    std::size_t kernel_size = 3;
    std::size_t channels = 32;
    std::size_t dilation_base = 2;
    double dropout = 0.2;
    std::size_t classes = 4;

    void validate() const;
    nlohmann::json to_json() const;
    static DeepTcnConfig from_json(const nlohmann::json& j);
};

struct TransformerConfig {
    std::size_t d_model = 64;
    std::size_t heads = 4;
    std::size_t encoder_layers = 2;
    std::size_t ff_dim = 256;
    double dropout = 0.2;
    std::size_t classes = 4;
    std::string positional_encoding = "sinusoidal";

    void validate() const;
    nlohmann::json to_json() const;
    static TransformerConfig from_json(const nlohmann::json& j);
};

struct TrainConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 300;
    std::size_t early_stop_patience = 30;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

}  // namespace sickbench::models
