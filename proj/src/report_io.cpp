#include "nsavg/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nsavg {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

void atomic_write_file(const std::string& path, const std::string& bytes) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) {
        std::filesystem::create_directories(target.parent_path());
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream ss;
    for (size_t i = 0; i < header.size(); ++i) {
        if (i > 0) ss << ',';
        ss << header[i];
    }
    ss << '\n';
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i > 0) ss << ',';
            ss << row[i];
        }
        ss << '\n';
    }
    atomic_write_file(path, ss.str());
}

void write_json(const std::string& path, const nlohmann::json& doc) {
    atomic_write_file(path, doc.dump(2) + "\n");
}

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const std::string& path, const RunManifest& m) {
    nlohmann::json doc{
        {"command", m.command},           {"config_path", m.config_path},
        {"config_hash", m.config_hash},   {"started_at", m.started_at},
        {"finished_at", m.finished_at},   {"outputs", m.outputs},
        {"exit_status", m.exit_status},
    };
    write_json(path, doc);
}

}  // namespace nsavg
