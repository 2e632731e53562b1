#include "sickbench/dataset/manifest.hpp"

#include <fstream>

namespace sickbench::dataset {

nlohmann::json schema_to_json(const FeatureSchema& s) {
    return {{"name", s.name}, {"channels", s.channels}, {"units", s.units}};
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
    FeatureSchema s;
    s.name = j.at("name").get<std::string>();
    s.channels = j.at("channels").get<std::vector<std::string>>();
    s.units = j.value("units", std::vector<std::string>{});
    s.validate();
    return s;
}

nlohmann::json stats_to_json(const ChannelStats& s) {
    return {{"mean", s.mean}, {"stddev", s.stddev}, {"min", s.min}, {"max", s.max}};
}

ChannelStats stats_from_json(const nlohmann::json& j) {
    ChannelStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    s.min = j.at("min").get<std::vector<double>>();
    s.max = j.at("max").get<std::vector<double>>();
    return s;
}

nlohmann::json DatasetManifest::to_json() const {
    return {{"format_version", format_version},
            {"schema", schema_to_json(schema)},
            {"streams", stream_files},
            {"space", space},
            {"preprocessing", preprocessing}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != 1)
        throw std::runtime_error("unsupported dataset manifest version " +
                                 std::to_string(m.format_version));
    m.schema = schema_from_json(j.at("schema"));
    m.stream_files = j.at("streams").get<std::vector<std::string>>();
    m.space = j.value("space", "raw");
    m.preprocessing = j.value("preprocessing", nlohmann::json::object());
    return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
    out << m.to_json().dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read manifest: " + path.string());
    nlohmann::json j;
    in >> j;
    return DatasetManifest::from_json(j);
}

}  // namespace sickbench::dataset
