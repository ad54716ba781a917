#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace nsavg {

inline constexpr const char* kCodeVersion = "0.1.0";

// Shortest round-trippable decimal form; deterministic for equal doubles.
std::string format_double(double v);

// Atomic write-then-rename; partial files never appear under the final name.
void atomic_write_file(const std::string& path, const std::string& bytes);

// CSV with a fixed header row.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_json(const std::string& path, const nlohmann::json& doc);

// Run metadata written at the end of every CLI command.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::string config_hash;
    std::string started_at;   // wall clock, ISO-8601 UTC
    std::string finished_at;
    std::vector<std::string> outputs;
    int exit_status = 0;
};

std::string timestamp_utc();
void write_manifest(const std::string& path, const RunManifest& m);

}  // namespace nsavg
