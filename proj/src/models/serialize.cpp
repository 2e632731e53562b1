#include "sickbench/models/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sickbench/dataset/manifest.hpp"

namespace sickbench::models {

static_assert(std::endian::native == std::endian::little,
              "model container assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'B', 'M', 'O', 'D', 'L', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_model_stream(const TrainedModel& model, std::ostream& out) {
    nlohmann::json header;
    header["format_version"] = 1;
    header["family"] = model.family;
    header["config"] =
        model.family == "deeptcn" ? model.tcn.to_json() : model.transformer.to_json();
    header["schema"] = dataset::schema_to_json(model.schema);
    header["stats"] = dataset::stats_to_json(model.stats);
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& row : model.history)
        hist.push_back({row.epoch, row.train_loss, row.val_loss, row.val_acc});
    header["history"] = hist;
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& e : model.weights.entries)
        weights.push_back({{"name", e.name}, {"shape", e.value.shape}});
    header["weights"] = weights;
    nlohmann::json bn = nlohmann::json::array();
    for (const auto& s : model.bn_stats) bn.push_back({{"channels", s.mean.numel()}});
    header["bn_stats"] = bn;

    const std::string header_bytes = header.dump();
    out.write(kMagic, sizeof(kMagic));
    write_u64(out, header_bytes.size());
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    auto write_array = [&out](const Array& a) {
        out.write(reinterpret_cast<const char*>(a.data.data()),
                  static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    };
    for (const auto& e : model.weights.entries) write_array(e.value);
    for (const auto& s : model.bn_stats) {
        write_array(s.mean);
        write_array(s.var);
    }
    if (!out) throw std::runtime_error("model write failed");
}

TrainedModel load_model_stream(std::istream& in, std::optional<std::string> expected_family) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a model file (bad magic)");
    const std::uint64_t header_len = read_u64(in);
    if (!in || header_len == 0 || header_len > (1ULL << 30))
        throw std::runtime_error("model header length corrupted");
    std::string header_bytes(header_len, '\0');
    in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw std::runtime_error("model header truncated");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_bytes);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("model header corrupted: ") + e.what());
    }
    const int version = header.at("format_version").get<int>();
    if (version != 1)
        throw std::runtime_error("unsupported model format version " + std::to_string(version));

    TrainedModel m;
    m.family = header.at("family").get<std::string>();
    if (m.family != "deeptcn" && m.family != "transformer")
        throw std::runtime_error("unknown model family '" + m.family + "'");
    if (expected_family && m.family != *expected_family)
        throw std::runtime_error("model family is '" + m.family + "', expected '" +
                                 *expected_family + "'");
    if (m.family == "deeptcn")
        m.tcn = DeepTcnConfig::from_json(header.at("config"));
    else
        m.transformer = TransformerConfig::from_json(header.at("config"));
    m.schema = dataset::schema_from_json(header.at("schema"));
    m.stats = dataset::stats_from_json(header.at("stats"));
    for (const auto& row : header.at("history")) {
        m.history.push_back({row.at(0).get<std::size_t>(), row.at(1).get<double>(),
                             row.at(2).get<double>(), row.at(3).get<double>()});
    }

    auto read_array = [&in](Array& a) {
        in.read(reinterpret_cast<char*>(a.data.data()),
                static_cast<std::streamsize>(a.data.size() * sizeof(double)));
        if (!in) throw std::runtime_error("model weight blob truncated");
    };
    for (const auto& w : header.at("weights")) {
        const auto name = w.at("name").get<std::string>();
        const auto shape = w.at("shape").get<std::vector<std::size_t>>();
        Array a(shape);
        read_array(a);
        m.weights.add(name, std::move(a));
    }
    for (const auto& s : header.at("bn_stats")) {
        const std::size_t ch = s.at("channels").get<std::size_t>();
        diffcore::RunningStats rs{Array({ch}), Array({ch})};
        read_array(rs.mean);
        read_array(rs.var);
        m.bn_stats.push_back(std::move(rs));
    }
    // Trailing garbage means the container does not match its header.
    in.peek();
    if (!in.eof()) throw std::runtime_error("model file has trailing bytes");
    return m;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path.string());
    save_model_stream(model, out);
}

TrainedModel load_model(const std::filesystem::path& path,
                        std::optional<std::string> expected_family) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path.string());
    return load_model_stream(in, std::move(expected_family));
}

std::string model_hash(const TrainedModel& model) {
    std::ostringstream buf(std::ios::binary);
    save_model_stream(model, buf);
    const std::string bytes = buf.str();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

}  // namespace sickbench::models
