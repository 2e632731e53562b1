#include "sickbench/dataset/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sickbench::dataset {

namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_double(const std::string& cell, double& out) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
    if (begin == end) return false;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

std::string exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

Stream load_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                std::size_t* rejected) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open csv file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv file: " + path.string());
    auto header = split_row(line);
    for (auto& h : header) {
        while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
    }

    const std::size_t c = schema.channel_count();
    std::vector<std::size_t> channel_col(c, header.size());
    std::size_t ts_col = header.size(), fms_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "timestamp") {
            ts_col = i;
            continue;
        }
        if (header[i] == "fms") {
            fms_col = i;
            continue;
        }
        bool known = false;
        for (std::size_t j = 0; j < c; ++j) {
            if (header[i] == schema.channels[j]) {
                channel_col[j] = i;
                known = true;
                break;
            }
        }
        if (!known)
            throw std::runtime_error("csv column '" + header[i] + "' not in schema '" +
                                     schema.name + "'");
    }
    if (ts_col == header.size())
        throw std::runtime_error("csv missing required column 'timestamp'");
    for (std::size_t j = 0; j < c; ++j)
        if (channel_col[j] == header.size())
            throw std::runtime_error("csv missing schema column '" + schema.channels[j] + "'");

    Stream frames;
    std::size_t dropped = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_row(line);
        if (cells.size() != header.size()) {
            ++dropped;
            continue;
        }
        SensorFrame f;
        f.values.resize(c);
        bool ok = parse_double(cells[ts_col], f.timestamp);
        for (std::size_t j = 0; ok && j < c; ++j) ok = parse_double(cells[channel_col[j]], f.values[j]);
        if (ok && fms_col != header.size()) {
            double fv;
            if (!parse_double(cells[fms_col], fv))
                ok = false;
            else
                f.fms = fv;
        }
        if (!ok) {
            ++dropped;
            continue;
        }
        if (!frames.empty() && f.timestamp <= frames.back().timestamp)
            throw std::runtime_error("csv timestamps not strictly increasing at line " +
                                     std::to_string(line_no) + " of " + path.string());
        frames.push_back(std::move(f));
    }
    if (rejected) *rejected = dropped;
    return frames;
}

void write_csv(const std::filesystem::path& path, const Stream& stream,
               const FeatureSchema& schema) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write csv file: " + path.string());
    const bool has_fms = !stream.empty() && stream.front().fms.has_value();
    out << "timestamp";
    for (const auto& ch : schema.channels) out << ',' << ch;
    if (has_fms) out << ",fms";
    out << '\n';
    for (const auto& f : stream) {
        if (f.values.size() != schema.channel_count())
            throw std::runtime_error("frame channel count does not match schema");
        out << exact(f.timestamp);
        for (double v : f.values) out << ',' << exact(v);
        if (has_fms) out << ',' << exact(f.fms.value_or(0.0));
        out << '\n';
    }
}

}  // namespace sickbench::dataset
