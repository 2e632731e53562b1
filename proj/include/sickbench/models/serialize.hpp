#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "sickbench/models/model.hpp"

namespace sickbench::models {

// Container: 8-byte magic, u64 little-endian header length, JSON header
// (family, config, schema, stats, history, weight names/shapes, format
// version), then the raw little-endian 64-bit float weight blob (trainable
// weights in store order followed by batch-norm running stats).
// load(save(m)) is bit-identical.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path,
                        std::optional<std::string> expected_family = std::nullopt);

void save_model_stream(const TrainedModel& model, std::ostream& out);
TrainedModel load_model_stream(std::istream& in,
                               std::optional<std::string> expected_family = std::nullopt);

// FNV-1a over the serialized container; stable for identical weights.
std::string model_hash(const TrainedModel& model);

}  // namespace sickbench::models
