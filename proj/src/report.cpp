#include "delta/report.hpp"

#include <ctime>
#include <fstream>

#include "delta/common.hpp"

namespace delta {

std::string iso8601_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return std::string(buf);
}

nlohmann::json manifest_json(const RunManifest& m) {
  nlohmann::json j;
  j["artifact_version"] = m.artifact_version;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["data_checksum"] = m.data_checksum;
  j["seed"] = m.seed;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["outputs"] = m.outputs;
  return j;
}

void write_json_report(const std::string& path, const RunManifest& manifest,
                       const nlohmann::json& body) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["manifest"] = manifest_json(manifest);
  doc["results"] = body;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report '" + path + "'");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("short write on report '" + path + "'");
}

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += "\"\"";
    else q += ch;
  }
  q += "\"";
  return q;
}

}  // namespace

void write_csv_report(const std::string& path, const RunManifest& manifest,
                      const std::vector<std::string>& columns,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report '" + path + "'");
  out << "# schema_version = 1\n";
  out << "# artifact_version = " << manifest.artifact_version << "\n";
  out << "# command = " << manifest.command << "\n";
  out << "# config_hash = " << manifest.config_hash << "\n";
  out << "# data_checksum = " << manifest.data_checksum << "\n";
  out << "# seed = " << manifest.seed << "\n";
  out << "# started_at = " << manifest.started_at << "\n";
  out << "# finished_at = " << manifest.finished_at << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i)
    out << (i ? "," : "") << csv_quote(columns[i]);
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw ContractError("csv report: row width " +
                          std::to_string(row.size()) + " does not match " +
                          std::to_string(columns.size()) + " columns");
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << csv_quote(row[i]);
    out << "\n";
  }
  if (!out) throw IoError("short write on report '" + path + "'");
}

void export_attention_trace(const std::string& path,
                            const AttentionTrace& trace) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : trace.entries) {
    nlohmann::json r;
    r["layer"] = e.layer;
    r["stage"] = stage_name(e.stage);
    r["position"] = e.position;
    r["weights"] = e.weights;
    rows.push_back(std::move(r));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace '" + path + "'");
  out << rows.dump(2) << "\n";
  if (!out) throw IoError("short write on trace '" + path + "'");
}

}  // namespace delta
