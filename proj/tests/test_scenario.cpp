#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "quartic/scenario.hpp"

using namespace quartic;
using nlohmann::json;

namespace {

const std::filesystem::path root = QUARTIC_SOURCE_DIR;

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json free_config() { return read_json(root / "configs" / "free.json"); }

// A free run small enough for unit tests.
json tiny_free_config() {
  json j = free_config();
  j["name"] = "tiny";
  j["t_grid"] = {{"t_min", 1.0}, {"t_max", 10.0}, {"points", 8}};
  j["sigma_list"] = {0.0, 2.0};
  j["lambda_max"] = 10.0;
  return j;
}

void expect_config_error(const json& j, const std::string& fragment) {
  try {
    ScenarioConfig::from_json(j);
    ADD_FAILURE() << "accepted: " << j.dump();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

class TempDir {
 public:
  TempDir() : path_(std::filesystem::temp_directory_path() /
                    ("quartic_test_" + std::to_string(::getpid()) + "_" + std::to_string(count_++))) {
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int count_ = 0;
  std::filesystem::path path_;
};

}  // namespace

TEST(ScenarioConfig, ShippedConfigsLoad) {
  const ScenarioConfig f = ScenarioConfig::load(root / "configs" / "free.json");
  EXPECT_EQ(f.name, "free");
  EXPECT_EQ(f.potential.family, PotentialFamily::zero);
  const ScenarioConfig r = ScenarioConfig::load(root / "configs" / "regular.json");
  EXPECT_EQ(r.potential.family, PotentialFamily::gaussian_bump);
  ASSERT_TRUE(r.coupling.has_value());
  const ScenarioConfig s = ScenarioConfig::load(root / "configs" / "resonant.json");
  EXPECT_FALSE(s.coupling.has_value());
  EXPECT_EQ(s.tune.bracket, std::make_pair(0.1, 20.0));
  EXPECT_EQ(s.lambda_max, 120.0);
  for (const ScenarioConfig* c : {&f, &r, &s}) {
    EXPECT_LE(c->t_grid.t_max, 1e4);
    EXPECT_EQ(c->lambda0, 1.25);
  }
}

TEST(ScenarioConfig, JsonRoundTrip) {
  for (const char* name : {"free", "regular", "resonant"}) {
    const ScenarioConfig c = ScenarioConfig::load(root / "configs" / (std::string(name) + ".json"));
    const json once = c.to_json();
    EXPECT_EQ(ScenarioConfig::from_json(once).to_json(), once) << name;
  }
}

TEST(ScenarioConfig, EveryRequiredKeyIsEnforced) {
  const json schema = read_json(root / "schemas" / "scenario.schema.json");
  const json base = free_config();
  ASSERT_NO_THROW(ScenarioConfig::from_json(base));
  for (const auto& key : schema.at("required")) {
    json j = base;
    j.erase(key.get<std::string>());
    expect_config_error(j, key.get<std::string>());
  }
  // Every key the parser accepts is declared in the schema.
  for (const auto& [key, _] : base.items()) EXPECT_TRUE(schema.at("properties").contains(key)) << key;
  for (const char* key : {"tune", "scan", "ker_tol"})
    EXPECT_TRUE(schema.at("properties").contains(key)) << key;
}

TEST(ScenarioConfig, MalformedValuesNameTheKey) {
  json j = free_config();
  j["t_grid"]["t_max"] = 2e4;
  expect_config_error(j, "t_grid.t_max");

  j = free_config();
  j["unexpected"] = 1;
  expect_config_error(j, "unexpected");

  j = free_config();
  j["lambda_max"] = "forty";
  expect_config_error(j, "lambda_max");

  j = free_config();
  j["coupling"] = "auto";
  expect_config_error(j, "coupling");

  j = free_config();
  j["coupling"] = "tune";
  expect_config_error(j, "coupling");  // nothing to tune for V = 0

  j = free_config();
  j["schema_version"] = 2;
  expect_config_error(j, "schema_version");

  j = free_config();
  j["name"] = "../escape";
  expect_config_error(j, "name");

  j = free_config();
  j["grid"]["points_per_axis"] = 17;
  expect_config_error(j, "grid.points_per_axis");

  j = free_config();
  j["t_grid"]["points"] = 5;
  expect_config_error(j, "t_grid.points");

  j = free_config();
  j["sigma_list"] = {0.0, -1.0};
  expect_config_error(j, "sigma_list");

  j = free_config();
  j["cutoff"]["profile"] = 1;
  expect_config_error(j, "cutoff.profile");

  j = read_json(root / "configs" / "resonant.json");
  j["potential"]["amplitude"] = 5.0;
  expect_config_error(j, "potential.amplitude");

  j = read_json(root / "configs" / "resonant.json");
  j["tune"]["bracket"] = {3.0, 1.0};
  expect_config_error(j, "tune.bracket");

  j = free_config();
  j["potential"]["family"] = "square_well";
  expect_config_error(j, "square_well");
}

TEST(ScenarioConfig, LoadErrors) {
  TempDir dir;
  const auto bad = dir.path() / "bad.json";
  std::ofstream(bad) << "{ \"name\": ";
  EXPECT_THROW(ScenarioConfig::load(bad), ConfigError);
  EXPECT_THROW(ScenarioConfig::load(dir.path() / "missing.json"), ConfigError);
}

TEST(ScenarioConfig, CsvPathIsRelativeToConfig) {
  TempDir dir;
  json j = free_config();
  j["potential"] = {{"family", "custom"}, {"csv", "table.csv"}};
  std::ofstream(dir.path() / "custom.json") << j.dump();
  const ScenarioConfig c = ScenarioConfig::load(dir.path() / "custom.json");
  EXPECT_EQ(std::filesystem::path(c.potential.csv_path), dir.path() / "table.csv");
}

TEST(Scenario, DecayTargets) {
  EXPECT_EQ(decay_target(0.0, false), 0.75);
  EXPECT_EQ(decay_target(2.0, false), 0.75);
  EXPECT_EQ(decay_target(0.0, true), 0.75);
  EXPECT_EQ(decay_target(0.5, true), 1.0);
  EXPECT_EQ(decay_target(1.0, true), 1.25);
  EXPECT_EQ(decay_target(3.0, true), 1.25);
}

TEST(Scenario, FreeRunIsDeterministicAndGated) {
  const ScenarioConfig c = ScenarioConfig::from_json(tiny_free_config());
  const ScenarioResult a = run_scenario(c);
  const ScenarioResult b = run_scenario(c);
  EXPECT_TRUE(a.free);
  EXPECT_EQ(to_csv(a), to_csv(b));

  // One report without and one with the constant t^{-3/4} K(0) removed.
  ASSERT_EQ(a.reports.size(), 2u);
  EXPECT_EQ(a.reports[1].first, Subtraction::free_origin);
  const std::string csv = to_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scenario,t,sigma,subtract_Ft,weighted_sup,error_estimate");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 8 * 2);
  for (const ExponentCheck& chk : a.checks)
    if (chk.subtraction == Subtraction::none && chk.sigma == 0.0) {
      EXPECT_EQ(chk.rule, "approx");
      EXPECT_NEAR(chk.fit.exponent, 0.75, 0.05);
    }

  TempDir dir;
  const auto paths = write_outputs(a, dir.path());
  const auto again = write_outputs(b, dir.path() / "second");
  ASSERT_EQ(paths.size(), 3u);
  EXPECT_EQ(read_text(paths[0]), read_text(again[0]));
  for (const auto& entry : std::filesystem::directory_iterator(dir.path()))
    EXPECT_NE(entry.path().extension(), ".tmp");

  const json summary = read_json(paths[1]);
  EXPECT_EQ(summary.at("schema_version"), summary_schema_version);
  EXPECT_EQ(summary.at("classification"), "Free");
  EXPECT_EQ(summary.at("passed"), a.passed());
  const std::string report = read_text(paths[2]);
  EXPECT_NE(report.find("classification  Free"), std::string::npos);
  EXPECT_NE(report.find("0.750"), std::string::npos);
}

TEST(Scenario, WriteAtomicReplacesContent) {
  TempDir dir;
  const auto p = dir.path() / "x.txt";
  write_atomic(p, "one");
  write_atomic(p, "two");
  EXPECT_EQ(read_text(p), "two");
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "x.txt.tmp"));
}
