#include "sickbench/models/config.hpp"

#include <stdexcept>

namespace sickbench::models {

namespace {

template <typename T>
void get_if_present(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw std::invalid_argument(std::string(where) + ": unknown key '" + it.key() + "'");
    }
}

}  // namespace

void DeepTcnConfig::validate() const {
    if (residual_blocks < 1) throw std::invalid_argument("deeptcn: residual_blocks must be >= 1");
    if (kernel_size < 1) throw std::invalid_argument("deeptcn: kernel_size must be >= 1");
    if (channels < 1) throw std::invalid_argument("deeptcn: channels must be >= 1");
    if (dilation_base < 1) throw std::invalid_argument("deeptcn: dilation_base must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw std::invalid_argument("deeptcn: dropout must be in [0,1)");
    if (classes != 4) throw std::invalid_argument("deeptcn: classes must be 4");
}

nlohmann::json DeepTcnConfig::to_json() const {
    return {{"residual_blocks", residual_blocks}, {"kernel_size", kernel_size},
            {"channels", channels},               {"dilation_base", dilation_base},
            {"dropout", dropout},                 {"classes", classes}};
}

DeepTcnConfig DeepTcnConfig::from_json(const nlohmann::json& j) {
    reject_unknown(j, {"residual_blocks", "kernel_size", "channels", "dilation_base", "dropout",
                       "classes"},
                   "deeptcn config");
    DeepTcnConfig c;
    get_if_present(j, "residual_blocks", c.residual_blocks);
    get_if_present(j, "kernel_size", c.kernel_size);
    get_if_present(j, "channels", c.channels);
    get_if_present(j, "dilation_base", c.dilation_base);
    get_if_present(j, "dropout", c.dropout);
    get_if_present(j, "classes", c.classes);
    c.validate();
    return c;
}

void TransformerConfig::validate() const {
    if (d_model < 1 || heads < 1 || encoder_layers < 1 || ff_dim < 1)
        throw std::invalid_argument("transformer: dimensions must be >= 1");
    if (d_model % heads != 0)
        throw std::invalid_argument("transformer: d_model must be divisible by heads");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw std::invalid_argument("transformer: dropout must be in [0,1)");
    if (classes != 4) throw std::invalid_argument("transformer: classes must be 4");
    if (positional_encoding != "sinusoidal")
        throw std::invalid_argument("transformer: unsupported positional encoding '" +
                                    positional_encoding + "'");
}

nlohmann::json TransformerConfig::to_json() const {
    return {{"d_model", d_model},
            {"heads", heads},
            {"encoder_layers", encoder_layers},
            {"ff_dim", ff_dim},
            {"dropout", dropout},
            {"classes", classes},
            {"positional_encoding", positional_encoding}};
}

TransformerConfig TransformerConfig::from_json(const nlohmann::json& j) {
    reject_unknown(j, {"d_model", "heads", "encoder_layers", "ff_dim", "dropout", "classes",
                       "positional_encoding"},
                   "transformer config");
    TransformerConfig c;
    get_if_present(j, "d_model", c.d_model);
    get_if_present(j, "heads", c.heads);
    get_if_present(j, "encoder_layers", c.encoder_layers);
    get_if_present(j, "ff_dim", c.ff_dim);
    get_if_present(j, "dropout", c.dropout);
    get_if_present(j, "classes", c.classes);
    get_if_present(j, "positional_encoding", c.positional_encoding);
    c.validate();
    return c;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
    if (early_stop_patience > max_epochs)
        throw std::invalid_argument("train: patience must be <= max_epochs");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate},
            {"beta1", beta1},
            {"beta2", beta2},
            {"epsilon", epsilon},
            {"batch_size", batch_size},
            {"max_epochs", max_epochs},
            {"early_stop_patience", early_stop_patience},
            {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    reject_unknown(j, {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "max_epochs",
                       "early_stop_patience", "seed"},
                   "train config");
    TrainConfig c;
    get_if_present(j, "learning_rate", c.learning_rate);
    get_if_present(j, "beta1", c.beta1);
    get_if_present(j, "beta2", c.beta2);
    get_if_present(j, "epsilon", c.epsilon);
    get_if_present(j, "batch_size", c.batch_size);
    get_if_present(j, "max_epochs", c.max_epochs);
    get_if_present(j, "early_stop_patience", c.early_stop_patience);
    get_if_present(j, "seed", c.seed);
    c.validate();
    return c;
}

}  // namespace sickbench::models
