#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "geobridge/config.hpp"
#include "geobridge/output.hpp"
#include "geobridge/scenarios.hpp"

namespace geobridge {
namespace {

namespace fs = std::filesystem;

Config sample_config() {
  return Config({{"N", std::int64_t{1000}},
                 {"tol", 1e-10},
                 {"name", std::string("x")},
                 {"flag", false},
                 {"y", std::vector<double>{1.0}},
                 {"outputs", std::vector<std::string>{"report"}},
                 {"grid.n", std::int64_t{64}}});
}

fs::path temp_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("geobridge_test_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Config, TypedOverrides) {
  Config c = sample_config();
  c.set_from_string("N", "200");
  c.set_from_string("tol", "1e-8");
  c.set_from_string("name", "\"abc\"");
  c.set_from_string("flag", "true");
  c.set_from_string("y", "[0.5, 2]");
  c.set_from_string("outputs", "report,frames");
  EXPECT_EQ(c.integer("N"), 200);
  EXPECT_EQ(c.number("tol"), 1e-8);
  EXPECT_EQ(c.text("name"), "abc");
  EXPECT_TRUE(c.flag("flag"));
  EXPECT_EQ(c.numbers("y"), (std::vector<double>{0.5, 2.0}));
  EXPECT_EQ(c.words("outputs"), (std::vector<std::string>{"report", "frames"}));
  c.set_from_string("y", "3");
  EXPECT_EQ(c.numbers("y"), (std::vector<double>{3.0}));
}

TEST(Config, IntegersAndNumbersInterconvert) {
  Config c = sample_config();
  c.set("tol", std::int64_t{2});
  EXPECT_EQ(c.number("tol"), 2.0);
  c.set("N", 300.0);
  EXPECT_EQ(c.integer("N"), 300);
  EXPECT_THROW(c.set("N", 2.5), ConfigError);
}

TEST(Config, RejectsUnknownKeysAndWrongTypes) {
  Config c = sample_config();
  EXPECT_THROW(c.set_from_string("bogus", "1"), ConfigError);
  EXPECT_THROW(c.set_from_string("N", "fast"), ConfigError);
  EXPECT_THROW(c.set_from_string("flag", "1"), ConfigError);
  EXPECT_THROW(c.set_from_string("y", "[\"a\"]"), ConfigError);
  EXPECT_THROW(c.number("N"), ConfigError);
  EXPECT_THROW(split_assignment("novalue"), ConfigError);
  EXPECT_THROW(split_assignment("=1"), ConfigError);
  const auto [k, v] = split_assignment("grid.n=a=b");
  EXPECT_EQ(k, "grid.n");
  EXPECT_EQ(v, "a=b");
}

TEST(Config, TomlTablesGiveDottedKeys) {
  Config c = sample_config();
  const toml::table doc = toml::parse(R"(
scenario = "demo"
N = 50
[grid]
n = 128
)");
  EXPECT_EQ(c.apply_toml(doc), "demo");
  EXPECT_EQ(c.integer("N"), 50);
  EXPECT_EQ(c.integer("grid.n"), 128);

  Config d = sample_config();
  EXPECT_THROW(d.apply_toml(toml::parse("[grid]\nm = 3\n")), ConfigError);
  EXPECT_THROW(d.apply_toml(toml::parse("scenario = 3\n")), ConfigError);
}

TEST(Config, TomlSyntaxErrorIsConfigError) {
  const fs::path dir = temp_dir("toml");
  const fs::path f = dir / "bad.toml";
  std::ofstream(f) << "N = = 3\n";
  EXPECT_THROW(load_toml_file(f.string()), ConfigError);
  EXPECT_THROW(load_toml_file((dir / "missing.toml").string()), ConfigError);
}

TEST(Config, EchoKeepsDeclarationOrder) {
  const Json j = sample_config().to_json();
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"N", "tol", "name", "flag", "y", "outputs", "grid.n"}));
}

TEST(Output, TwelveSignificantDigits) {
  EXPECT_EQ(num(1.3888009710195).dump(), "1.38880097102");
  EXPECT_EQ(num(0.1).dump(), "0.1");
  EXPECT_EQ(num(1e-300).dump(), "1e-300");
  EXPECT_TRUE(num(std::nan("")).is_null());
  EXPECT_TRUE(num(HUGE_VAL).is_null());
  EXPECT_EQ(fmt12(2.0 / 3.0), "0.666666666667");
  Json j = {{"a", 2.0 / 3.0}, {"b", Json::array({1.0 / 7.0, 5})}};
  EXPECT_EQ(rounded(j).dump(), R"({"a":0.666666666667,"b":[0.142857142857,5]})");
}

TEST(Output, CheckSerialization) {
  const Json j = check_json(check_le("gap", 2e-7, 1e-6, false));
  EXPECT_EQ(j.dump(), R"({"name":"gap","value":2e-07,"tolerance":1e-06,"pass":true,"expected":"fail"})");
}

TEST(Output, AtomicWriteReplacesWholeFile) {
  const fs::path dir = temp_dir("atomic");
  const fs::path f = dir / "sub" / "out.json";
  write_atomic(f, "first\n");
  write_atomic(f, "second\n");
  EXPECT_EQ(slurp(f), "second\n");
  EXPECT_FALSE(fs::exists(f.string() + ".tmp"));
}

TEST(Output, CsvTable) {
  EXPECT_EQ(csv_table({"t", "q"}, {{0.0, 1.0}, {0.5, 1.0 / 3.0}}),
            "t,q\n0,1\n0.5,0.333333333333\n");
}

TEST(Scenarios, RegistryListsRequiredNames) {
  std::set<std::string> names;
  for (const auto& s : scenario_registry()) {
    EXPECT_FALSE(s.description.empty());
    EXPECT_FALSE(s.anchor.empty());
    names.insert(s.name);
    EXPECT_EQ(&find_scenario(s.name), &s);
  }
  EXPECT_GE(names.size(), 8u);
  for (const char* n : {"quadratic-bridge", "cone-entropy-bridge", "geodesic", "linear-potential",
                        "sphere-assumption-check", "gaussian-sinkhorn", "uniform-sinkhorn",
                        "porous-medium"}) {
    EXPECT_TRUE(names.count(n)) << n;
  }
  EXPECT_THROW(find_scenario("nope"), ConfigError);
}

TEST(Scenarios, DefaultsCarrySeedAndOutputs) {
  for (const auto& s : scenario_registry()) {
    const Config c = s.defaults();
    EXPECT_TRUE(c.has("seed")) << s.name;
    EXPECT_TRUE(c.has("outputs")) << s.name;
  }
}

TEST(Scenarios, UniformRunIsDeterministicAndPasses) {
  const auto a = run_scenario("uniform-sinkhorn");
  const auto b = run_scenario("uniform-sinkhorn");
  EXPECT_TRUE(a.as_expected());
  EXPECT_EQ(outcome_json(a).dump(2), outcome_json(b).dump(2));
  const Json j = outcome_json(a);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"scenario", "config_echo", "results", "checks",
                                            "timings"}));
  // frames: [t, rho_0 .. rho_{n-1}]
  ASSERT_TRUE(j["results"].contains("frames"));
  EXPECT_EQ(j["results"]["frames"][0].size(), 65u);
}

TEST(Scenarios, CheckModeOmitsArtifacts) {
  RunOptions opt;
  opt.artifacts = false;
  const auto o = run_scenario("uniform-sinkhorn", opt);
  EXPECT_FALSE(outcome_json(o)["results"].contains("frames"));
  EXPECT_TRUE(o.files.empty());
}

TEST(Scenarios, UnknownOutputRejected) {
  const ScenarioInfo& info = find_scenario("uniform-sinkhorn");
  Config c = info.defaults();
  c.set_from_string("outputs", "report,plots");
  EXPECT_THROW(run_scenario(info, c), ConfigError);
}

TEST(Scenarios, GeodesicTrajectoryRows) {
  const ScenarioInfo& info = find_scenario("geodesic");
  Config c = info.defaults();
  c.set_from_string("N", "50");
  c.set_from_string("random_paths.count", "5");
  c.set_from_string("outputs", "trajectory,csv");
  const auto o = run_scenario(info, c);
  EXPECT_TRUE(o.as_expected());
  const Json rows = outcome_json(o)["results"]["trajectory"];
  ASSERT_EQ(rows.size(), 51u);
  EXPECT_EQ(rows[0].size(), 5u);  // t, q0, q1, phi0, phi1
  EXPECT_EQ(rows[50][1].get<double>(), 1.0);
  ASSERT_EQ(o.files.size(), 1u);
  EXPECT_EQ(o.files[0].first, "trajectory.csv");
  EXPECT_EQ(o.files[0].second.substr(0, 19), "t,q0,q1,phi0,phi1\n0");
}

}  // namespace
}  // namespace geobridge
