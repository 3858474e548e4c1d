#pragma once

#include <cstdint>
#include <string>

#include "delta/model.hpp"
#include "delta/train.hpp"

namespace delta {

// Everything a run needs beyond the dataset itself. Model dimensions that
// come from the data (variable count) are filled in later.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  bool global_zscore = true;
  std::string loss = "mse";
};

// Flat `key = value` text, `#` starts a comment, blank lines ignored,
// whitespace around key and value stripped. Unknown keys and malformed
// values raise ConfigError naming the line.
RunConfig parse_config_text(const std::string& text,
                            const RunConfig& base = RunConfig());
RunConfig load_config_file(const std::string& path,
                           const RunConfig& base = RunConfig());

// Applies one key/value pair; the grammar shared by files and CLI flags.
void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value);

// Every key in a fixed order, one `key = value` line each. Hash input and
// the canonical dump embedded in reports.
std::string canonical_config(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace delta
