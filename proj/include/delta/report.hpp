#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "delta/trace.hpp"

namespace delta {

// Provenance block embedded in every emitted report: a run is reproducible
// from seed + config hash + data checksum.
struct RunManifest {
  std::string artifact_version = "0.1.0";
  std::string command;
  std::string config_hash;
  std::string data_checksum;  // empty when the run read no dataset
  std::uint64_t seed = 0;
  std::string started_at;   // ISO-8601 UTC
  std::string finished_at;  // ISO-8601 UTC
  std::vector<std::string> outputs;
};

std::string iso8601_utc_now();

nlohmann::json manifest_json(const RunManifest& m);

// {"schema_version": 1, "manifest": {...}, "results": body}. Doubles are
// emitted with shortest round-trip precision; keys sort alphabetically, so
// re-emitting the same results is byte-identical modulo the timestamps.
void write_json_report(const std::string& path, const RunManifest& manifest,
                       const nlohmann::json& body);

// Manifest as leading `# key = value` comment lines, then a header row and
// one line per row. Fields containing commas, quotes or newlines are quoted.
void write_csv_report(const std::string& path, const RunManifest& manifest,
                      const std::vector<std::string>& columns,
                      const std::vector<std::vector<std::string>>& rows);

// JSON array of attention rows, each exactly
// {"layer": int, "stage": string, "position": int, "weights": [doubles]}.
void export_attention_trace(const std::string& path,
                            const AttentionTrace& trace);

}  // namespace delta
