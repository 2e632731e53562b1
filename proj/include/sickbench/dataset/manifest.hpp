#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "sickbench/dataset/schema.hpp"

namespace sickbench::dataset {

// JSON description of a set of stream files plus the preprocessing applied
// to them. `space` distinguishes raw sensor units from normalized model
// input space.
struct DatasetManifest {
    int format_version = 1;
    FeatureSchema schema;
    std::vector<std::string> stream_files;  // relative to the manifest
    std::string space = "raw";
    nlohmann::json preprocessing = nlohmann::json::object();

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
};

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

nlohmann::json schema_to_json(const FeatureSchema& s);
FeatureSchema schema_from_json(const nlohmann::json& j);
nlohmann::json stats_to_json(const ChannelStats& s);
ChannelStats stats_from_json(const nlohmann::json& j);

}  // namespace sickbench::dataset
