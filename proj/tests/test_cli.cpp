#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "kspec/io.hpp"
#include "kspec/runner.hpp"
#include "kspec/types.hpp"

using namespace kspec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kspec_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json small_config(const std::string& command, const fs::path& root) {
  return {{"command", command},
          {"output_dir", (root / "out").string()},
          {"cache_dir", (root / "cache").string()},
          {"basis", {{"N", 3}}},
          {"symbols", {{"n_x", 10}, {"n_eta", 10}}}};
}

// Every emitted file is listed once in the manifest with its content hash.
void check_manifest(const fs::path& out) {
  const json m = json::parse(read_text(out / "manifest.json"));
  REQUIRE(m.contains("files"));
  CHECK(m.contains("inputs"));
  CHECK(m["inputs"].contains("config"));
  CHECK(m.contains("parameters"));
  std::set<std::string> listed;
  for (const auto& f : m["files"]) {
    const std::string rel = f["path"];
    CHECK(listed.insert(rel).second);
    REQUIRE(fs::exists(out / rel));
    CHECK(f["sha256"] == sha256_hex(read_text(out / rel)));
  }
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), out).generic_string();
    if (rel == "manifest.json") continue;
    CHECK_MESSAGE(listed.count(rel) == 1, rel);
  }
}

}  // namespace

TEST_CASE("schema and config resolution") {
  const json schema = json::parse(config_schema());
  CHECK(schema["type"] == "object");
  CHECK(schema["properties"].contains("kernel"));
  CHECK_NOTHROW(validate_against_schema(json{{"command", "spectrum"}}));
  CHECK_THROWS_AS(validate_against_schema(json{{"command", "bogus"}}), ConfigError);
  CHECK_THROWS_AS(validate_against_schema(json{{"command", "spectrum"}, {"unknown", 1}}), ConfigError);
  CHECK_THROWS_AS(validate_against_schema(json::object()), ConfigError);
  CHECK_THROWS_AS(validate_against_schema(json{{"command", "spectrum"}, {"kernel", {{"s", 1.2}}}}), ConfigError);

  const json cfg = resolve_config(json{{"command", "spectrum"}});
  CHECK(cfg["kernel"]["d"] == 3);
  CHECK(cfg["basis"]["N"] == 6);
  CHECK_THROWS_AS(resolve_config(json{{"command", "spectrum"}, {"kernel", {{"gamma", -1.5}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config(json{{"command", "spectrum"}, {"kernel", {{"d", 2}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config(json{{"command", "nonlinear"}, {"nonlinear", {{"m", 1.0}}}}), ConfigError);
}

TEST_CASE("assemble writes a manifest and reuses the operator cache") {
  const fs::path root = scratch("assemble");
  std::ostringstream log;
  const RunResult a = run(small_config("assemble", root), RunOverrides{}, log);
  CHECK(a.exit_code == kExitOk);
  CHECK(a.summary["cache_hit"] == false);
  check_manifest(a.out_dir);
  const std::string L1 = read_text(a.out_dir / "L.kspc");
  const std::string man1 = read_text(a.out_dir / "manifest.json");

  const RunResult b = run(small_config("assemble", root), RunOverrides{}, log);
  CHECK(b.summary["cache_hit"] == true);
  CHECK(read_text(b.out_dir / "L.kspc") == L1);
  CHECK(read_text(b.out_dir / "manifest.json") == man1);
  fs::remove_all(root);
}

TEST_CASE("every command runs on a small basis") {
  const fs::path root = scratch("commands");
  for (const char* cmd : {"spectrum", "branches", "gapscan", "propagate", "decay", "norms", "nonlinear"}) {
    CAPTURE(cmd);
    json cfg = small_config(cmd, root);
    cfg["output_dir"] = (root / cmd).string();
    cfg["decay"] = {{"t_lo", 5.0}, {"t_hi", 20.0}, {"n_times", 7}};
    cfg["nonlinear"] = {{"T", 2.0}, {"n_iter", 4}};
    cfg["norms"] = {{"refine", false}};
    std::ostringstream log;
    const RunResult r = run(cfg, RunOverrides{}, log);
    CHECK(r.exit_code == kExitOk);
    check_manifest(r.out_dir);
  }
  fs::remove_all(root);
}

TEST_CASE("guarded runner maps errors to exit codes") {
  const fs::path root = scratch("errors");
  std::ostringstream log, err;

  json bad = small_config("spectrum", root);
  bad["kernel"] = {{"gamma", -1.5}};
  write_json(root / "bad.json", bad);
  CHECK(run_guarded(root / "bad.json", RunOverrides{}, log, err) == kExitConfig);
  REQUIRE(fs::exists(root / "out" / "error.json"));
  const json e = json::parse(read_text(root / "out" / "error.json"));
  CHECK(e["error"] == "config");
  CHECK(e["exit_code"] == kExitConfig);
  CHECK(err.str().find("\"config\"") != std::string::npos);

  CHECK(run_guarded(root / "missing.json", RunOverrides{}, log, err) == kExitConfig);

  std::ofstream(root / "broken.json") << "{ not json";
  CHECK(run_guarded(root / "broken.json", RunOverrides{}, log, err) == kExitConfig);

  // A later successful run clears the stale error file.
  write_json(root / "good.json", small_config("assemble", root));
  CHECK(run_guarded(root / "good.json", RunOverrides{}, log, err) == kExitOk);
  CHECK_FALSE(fs::exists(root / "out" / "error.json"));
  fs::remove_all(root);
}

TEST_CASE("overrides take precedence over the config") {
  const fs::path root = scratch("overrides");
  RunOverrides ov;
  ov.command = "assemble";
  ov.out_dir = root / "elsewhere";
  ov.cache_dir = root / "cache2";
  ov.seed = 7;
  std::ostringstream log;
  const RunResult r = run(small_config("spectrum", root), ov, log);
  CHECK(r.out_dir == root / "elsewhere");
  CHECK(fs::exists(root / "elsewhere" / "L.kspc"));
  CHECK(fs::exists(root / "cache2"));
  const json m = json::parse(read_text(root / "elsewhere" / "manifest.json"));
  CHECK(m["parameters"]["config"]["seed"] == 7);
  CHECK(m["parameters"]["config"]["command"] == "assemble");
  fs::remove_all(root);
}
