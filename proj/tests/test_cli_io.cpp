#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "delta/config.hpp"
#include "delta/dataset.hpp"
#include "delta/report.hpp"

using namespace delta;

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& p) : path(p) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_SUITE_BEGIN("cli_io");

TEST_CASE("csv ingestion transposes to variables-major") {
  TempFile f("io_basic.csv");
  write_file(f.path,
             "date,a,b\n"
             "2020-01-01,1.5,10\n"
             "2020-01-02,2.5,20\n"
             "2020-01-03,3.5,30\n");
  auto ds = load_csv_dataset(f.path);
  CHECK(ds.variables() == 2);
  CHECK(ds.length() == 3);
  CHECK(ds.variable_names[0] == "a");
  CHECK(ds.values.data()[0] == 1.5);   // a over time
  CHECK(ds.values.data()[2] == 3.5);
  CHECK(ds.values.data()[3] == 10.0);  // b over time
  CHECK(ds.split_ratios[0] == doctest::Approx(0.7));
}

TEST_CASE("ETT-named files default to 0.6/0.2/0.2 splits") {
  TempFile f("ETTh1.csv");
  write_file(f.path, "date,x\n1,1\n2,2\n");
  auto ds = load_csv_dataset(f.path);
  CHECK(ds.split_ratios[0] == doctest::Approx(0.6));
  CHECK(ds.split_ratios[1] == doctest::Approx(0.2));
  CHECK(ds.frequency == "h");
}

TEST_CASE("a bad cell is reported with its line and column") {
  std::ostringstream text;
  text << "date,temp\n";
  for (int i = 1; i <= 45; ++i) {
    if (i == 41)
      text << i << ",oops\n";  // data row 41 sits on file line 42
    else
      text << i << "," << i * 0.5 << "\n";
  }
  TempFile f("io_badcell.csv");
  write_file(f.path, text.str());
  try {
    load_csv_dataset(f.path);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    std::string msg = e.what();
    CHECK(msg.find("line 42") != std::string::npos);
    CHECK(msg.find("temp") != std::string::npos);
    CHECK(msg.find("oops") != std::string::npos);
  }
}

TEST_CASE("ragged and empty inputs are ingest errors") {
  TempFile ragged("io_ragged.csv");
  write_file(ragged.path, "date,a,b\n1,1,2\n2,3\n");
  CHECK_THROWS_AS(load_csv_dataset(ragged.path), IngestError);

  TempFile empty("io_empty.csv");
  write_file(empty.path, "");
  CHECK_THROWS_AS(load_csv_dataset(empty.path), IngestError);

  TempFile headeronly("io_headeronly.csv");
  write_file(headeronly.path, "date,a\n");
  CHECK_THROWS_AS(load_csv_dataset(headeronly.path), IngestError);

  CHECK_THROWS_AS(load_csv_dataset("io_does_not_exist.csv"), IngestError);
}

TEST_CASE("config text parses keys and rejects unknown ones") {
  RunConfig cfg = parse_config_text(
      "# comment\n"
      "arch = variate_only\n"
      "lookback = 48\n"
      "patch_length = 8\n"
      "learning_rate = 0.005\n"
      "seed = 99\n");
  CHECK(cfg.model.arch == ArchKind::variate_only);
  CHECK(cfg.model.lookback == 48);
  CHECK(cfg.model.patch_len == 8);
  CHECK(cfg.train.lr == doctest::Approx(0.005));
  CHECK(cfg.train.seed == 99);
  CHECK(cfg.model.seed == 99);

  try {
    parse_config_text("arch = delta\nnot_a_key = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("not_a_key") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_config_text("lookback = soon\n"), ConfigError);
}

TEST_CASE("canonical config is stable and drives the hash") {
  RunConfig a, b;
  auto ca = canonical_config(a);
  // fixed order: arch first, loss last
  CHECK(ca.rfind("arch = ", 0) == 0);
  CHECK(ca.find("\nloss = mse\n") != std::string::npos);
  CHECK(config_hash(a) == config_hash(b));
  apply_config_entry(b, "epochs", "11");
  CHECK(config_hash(a) != config_hash(b));
  // the canonical text round-trips through the parser to the same hash
  RunConfig back = parse_config_text(canonical_config(b));
  CHECK(config_hash(back) == config_hash(b));
}

TEST_CASE("json reports keep full double precision") {
  RunManifest m;
  m.command = "test";
  m.config_hash = "abc";
  m.seed = 5;
  m.started_at = "2026-01-01T00:00:00Z";
  m.finished_at = "2026-01-01T00:00:01Z";
  nlohmann::json body;
  body["mse"] = 0.385;
  body["precise"] = 0.1234567890123456789;
  TempFile f("io_report.json");
  write_json_report(f.path, m, body);
  auto text = read_file(f.path);
  CHECK(text.find("\"mse\": 0.385") != std::string::npos);
  CHECK(text.find("\"schema_version\": 1") != std::string::npos);
  auto parsed = nlohmann::json::parse(text);
  CHECK(parsed["results"]["precise"].get<double>() ==
        0.1234567890123456789);
  CHECK(parsed["manifest"]["seed"].get<std::uint64_t>() == 5);
}

TEST_CASE("identical payloads emit byte-identical reports") {
  RunManifest m;
  m.command = "synth-keyretrieval";
  m.config_hash = "feed";
  m.seed = 1;
  m.started_at = "2026-01-01T00:00:00Z";  // pinned so the whole file repeats
  m.finished_at = "2026-01-01T00:00:02Z";
  nlohmann::json body;
  body["values"] = {1.0, 0.25, 3.5e-7};
  TempFile f1("io_rep1.json"), f2("io_rep2.json");
  write_json_report(f1.path, m, body);
  write_json_report(f2.path, m, body);
  CHECK(read_file(f1.path) == read_file(f2.path));
}

TEST_CASE("csv reports carry the manifest as comments and quote fields") {
  RunManifest m;
  m.command = "noise-sweep";
  m.config_hash = "0011";
  m.seed = 2;
  m.started_at = "2026-01-01T00:00:00Z";
  m.finished_at = "2026-01-01T00:00:01Z";
  TempFile f("io_rows.csv");
  write_csv_report(f.path, m, {"arch", "C_or_p", "seed", "metric", "value"},
                   {{"delta", "0.4", "1", "mse", "0.5"},
                    {"we,ird", "0", "2", "mse", "1"}});
  auto text = read_file(f.path);
  CHECK(text.find("# command = noise-sweep") != std::string::npos);
  CHECK(text.find("arch,C_or_p,seed,metric,value\n") != std::string::npos);
  CHECK(text.find("\"we,ird\"") != std::string::npos);

  CHECK_THROWS_AS(
      write_csv_report(f.path, m, {"a", "b"}, {{"only-one-cell"}}),
      ContractError);
}

TEST_CASE("attention traces export the documented row schema") {
  AttentionTrace trace;
  trace.enabled = true;
  TraceEntry e;
  e.layer = 1;
  e.stage = TraceStage::funnel_in;
  e.position = 3;
  e.weights = {0.5, 0.5};
  trace.entries.push_back(e);
  TempFile f("io_trace.json");
  export_attention_trace(f.path, trace);
  auto parsed = nlohmann::json::parse(read_file(f.path));
  REQUIRE(parsed.is_array());
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0]["layer"] == 1);
  CHECK(parsed[0]["stage"] == "funnel_in");
  CHECK(parsed[0]["position"] == 3);
  CHECK(parsed[0]["weights"].size() == 2);
  CHECK(parsed[0].size() == 4);  // exactly the four keys
}

TEST_SUITE_END();
