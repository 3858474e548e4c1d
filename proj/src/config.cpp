#include "delta/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace delta {

namespace {

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int x = 0;
  try {
    x = std::stoi(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
  }
  if (used != v.size())
    throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v +
                      "' is not an unsigned integer");
  }
  if (used != v.size())
    throw ConfigError("key '" + key + "': '" + v +
                      "' is not an unsigned integer");
  return x;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  }
  if (used != v.size())
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "arch") {
    ArchSpec spec = parse_arch(value);
    cfg.model.arch = spec.kind;
    cfg.model.funnel_in_op = spec.funnel_in_op;
    cfg.model.funnel_out_op = spec.funnel_out_op;
  } else if (key == "lookback") {
    cfg.model.lookback = parse_int(key, value);
  } else if (key == "horizon") {
    cfg.model.horizon = parse_int(key, value);
  } else if (key == "patch_length") {
    cfg.model.patch_len = parse_int(key, value);
  } else if (key == "d_patch") {
    cfg.model.d_patch = parse_int(key, value);
  } else if (key == "layers") {
    cfg.model.layers = parse_int(key, value);
  } else if (key == "heads") {
    cfg.model.heads = parse_int(key, value);
  } else if (key == "expansion_factor") {
    cfg.model.expansion = parse_double(key, value);
  } else if (key == "funnel_out_mode") {
    cfg.model.funnel_out_mode = parse_funnel_out_mode(value);
  } else if (key == "funnel_in_op") {
    cfg.model.funnel_in_op = parse_funnel_op(value);
  } else if (key == "funnel_out_op") {
    cfg.model.funnel_out_op = parse_funnel_op(value);
  } else if (key == "learned_projections") {
    cfg.model.learned_projections = parse_bool(key, value);
  } else if (key == "outer_residual") {
    cfg.model.outer_residual = parse_bool(key, value);
  } else if (key == "revin_affine") {
    cfg.model.revin_affine = parse_bool(key, value);
  } else if (key == "global_zscore") {
    cfg.global_zscore = parse_bool(key, value);
  } else if (key == "learning_rate") {
    cfg.train.lr = parse_double(key, value);
  } else if (key == "batch_size") {
    cfg.train.batch_size = parse_int(key, value);
  } else if (key == "epochs") {
    cfg.train.epochs = parse_int(key, value);
  } else if (key == "seed") {
    cfg.train.seed = parse_u64(key, value);
    cfg.model.seed = cfg.train.seed;
  } else if (key == "loss") {
    if (value != "mse")
      throw ConfigError("key 'loss': only 'mse' is available, got '" + value +
                        "'");
    cfg.loss = value;
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

RunConfig parse_config_text(const std::string& text, const RunConfig& base) {
  RunConfig cfg = base;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string body = strip(line);
    if (body.empty()) continue;
    std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value', got '" + body + "'");
    std::string key = strip(body.substr(0, eq));
    std::string value = strip(body.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty key");
    try {
      apply_config_entry(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), base);
}

std::string canonical_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "arch = " << arch_name(cfg.model.arch) << "\n";
  out << "lookback = " << cfg.model.lookback << "\n";
  out << "horizon = " << cfg.model.horizon << "\n";
  out << "patch_length = " << cfg.model.patch_len << "\n";
  out << "d_patch = " << cfg.model.d_patch << "\n";
  out << "layers = " << cfg.model.layers << "\n";
  out << "heads = " << cfg.model.heads << "\n";
  out << "expansion_factor = " << fmt_double(cfg.model.expansion) << "\n";
  out << "funnel_out_mode = " << funnel_out_mode_name(cfg.model.funnel_out_mode)
      << "\n";
  out << "funnel_in_op = " << funnel_op_name(cfg.model.funnel_in_op) << "\n";
  out << "funnel_out_op = " << funnel_op_name(cfg.model.funnel_out_op) << "\n";
  out << "learned_projections = "
      << (cfg.model.learned_projections ? "true" : "false") << "\n";
  out << "outer_residual = " << (cfg.model.outer_residual ? "true" : "false")
      << "\n";
  out << "revin_affine = " << (cfg.model.revin_affine ? "true" : "false")
      << "\n";
  out << "global_zscore = " << (cfg.global_zscore ? "true" : "false") << "\n";
  out << "learning_rate = " << fmt_double(cfg.train.lr) << "\n";
  out << "batch_size = " << cfg.train.batch_size << "\n";
  out << "epochs = " << cfg.train.epochs << "\n";
  out << "seed = " << cfg.train.seed << "\n";
  out << "loss = " << cfg.loss << "\n";
  return out.str();
}

std::uint64_t config_hash(const RunConfig& cfg) {
  std::string text = canonical_config(cfg);
  return fnv1a(text.data(), text.size());
}

}  // namespace delta
