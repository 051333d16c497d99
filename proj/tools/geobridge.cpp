// geobridge: scenario runner.
//
//   geobridge list
//   geobridge run <scenario> [--config F] [--set k=v]... [--out DIR] [--seed N]
//   geobridge check <scenario> [...]        checks only, writes nothing
//   geobridge run-all [--out DIR] [--workers N] [--seed N]
//
// Exit codes: 0 all checks as expected, 1 some check not as expected,
// 2 configuration error, 3 solver did not converge, 4 domain error.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "geobridge/config.hpp"
#include "geobridge/errors.hpp"
#include "geobridge/output.hpp"
#include "geobridge/scenarios.hpp"

namespace gb = geobridge;

namespace {

struct Settings {
  std::string scenario;
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "geobridge-out";
  int workers = 0;
  std::optional<std::int64_t> seed;
  bool timings = false;
};

// Result of one scenario, rendered but not yet written.
struct Job {
  std::string name;
  int code = 0;
  std::string error;  // empty unless an exception escaped
  gb::ScenarioOutcome outcome;
  std::string json;
};

int exit_code(const std::exception& e) {
  if (dynamic_cast<const gb::ConfigError*>(&e)) return 2;
  if (dynamic_cast<const gb::ConvergenceError*>(&e)) return 3;
  if (dynamic_cast<const gb::DomainError*>(&e)) return 4;
  return 4;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const gb::ConfigError*>(&e)) return "config error";
  if (dynamic_cast<const gb::ConvergenceError*>(&e)) return "no convergence";
  if (dynamic_cast<const gb::HypothesisError*>(&e)) return "hypotheses not met";
  if (dynamic_cast<const gb::DomainError*>(&e)) return "domain error";
  return "error";
}

std::string output_dir(const Settings& s) {
  const char* env = std::getenv("GEOBRIDGE_OUT");
  return env && *env ? env : s.out_dir;
}

// Defaults, then the TOML file, then --set overrides, then --seed.
gb::Config build_config(const gb::ScenarioInfo& info, const Settings& s,
                        const std::optional<toml::table>& doc) {
  gb::Config cfg = info.defaults();
  if (doc) cfg.apply_toml(*doc);
  for (const auto& kv : s.sets) {
    const auto [key, value] = gb::split_assignment(kv);
    cfg.set_from_string(key, value);
  }
  if (s.seed) cfg.set("seed", *s.seed);
  return cfg;
}

// Resolves the scenario from the positional name and/or the config file.
const gb::ScenarioInfo& resolve(const Settings& s, std::optional<toml::table>& doc) {
  std::string name = s.scenario;
  if (!s.config_path.empty()) {
    doc = gb::load_toml_file(s.config_path);
    if (auto node = (*doc)["scenario"].value<std::string>()) {
      if (!name.empty() && name != *node) {
        throw gb::ConfigError("config file is for scenario '" + *node + "', not '" + name + "'");
      }
      name = *node;
    }
  }
  if (name.empty()) throw gb::ConfigError("no scenario given");
  return gb::find_scenario(name);
}

Job execute(const gb::ScenarioInfo& info, const gb::Config& cfg, bool artifacts, bool timings) {
  Job job;
  job.name = info.name;
  try {
    gb::RunOptions opt;
    opt.artifacts = artifacts;
    opt.wall_clock = timings;
    job.outcome = gb::run_scenario(info, cfg, opt);
    job.json = gb::outcome_json(job.outcome).dump(2) + "\n";
    job.code = job.outcome.as_expected() ? 0 : 1;
  } catch (const std::exception& e) {
    job.code = exit_code(e);
    job.error = std::string(error_kind(e)) + ": " + e.what();
  }
  return job;
}

void write_job(const Job& job, const std::filesystem::path& dir) {
  if (!job.error.empty()) return;
  gb::write_atomic(dir / (job.name + ".json"), job.json);
  for (const auto& [suffix, content] : job.outcome.files) {
    gb::write_atomic(dir / (job.name + "." + suffix), content);
  }
}

void print_checks(const Job& job, bool all) {
  for (const auto& c : job.outcome.checks) {
    if (!all && c.as_expected()) continue;
    std::printf("  %-4s %-34s value %-14s tol %-10s expected %s%s\n", c.pass ? "pass" : "FAIL",
                c.name.c_str(), gb::fmt12(c.value).c_str(), gb::fmt12(c.tolerance).c_str(),
                c.expect_pass ? "pass" : "fail", c.as_expected() ? "" : "  <-- unexpected");
  }
}

void print_summary(const Job& job, const std::string& where) {
  if (!job.error.empty()) {
    std::printf("%-24s exit %d  %s\n", job.name.c_str(), job.code, job.error.c_str());
    return;
  }
  std::size_t unexpected = 0;
  for (const auto& c : job.outcome.checks) unexpected += c.as_expected() ? 0 : 1;
  std::printf("%-24s exit %d  %zu checks, %zu not as expected%s\n", job.name.c_str(), job.code,
              job.outcome.checks.size(), unexpected, where.c_str());
}

int cmd_list() {
  for (const auto& s : gb::scenario_registry()) {
    std::printf("%-24s %s\n%-24s   [%s]\n", s.name.c_str(), s.description.c_str(), "",
                s.anchor.c_str());
  }
  return 0;
}

int cmd_run(const Settings& s, bool artifacts) {
  std::optional<toml::table> doc;
  const gb::ScenarioInfo& info = resolve(s, doc);
  const gb::Config cfg = build_config(info, s, doc);
  const Job job = execute(info, cfg, artifacts, s.timings);
  if (!job.error.empty()) {
    std::fprintf(stderr, "geobridge: %s: %s\n", job.name.c_str(), job.error.c_str());
    return job.code;
  }
  std::string where;
  if (artifacts) {
    const std::filesystem::path dir = output_dir(s);
    write_job(job, dir);
    where = " -> " + (dir / (job.name + ".json")).string();
  }
  print_summary(job, where);
  print_checks(job, !artifacts);
  return job.code;
}

int cmd_run_all(const Settings& s) {
  if (!s.config_path.empty() || !s.sets.empty()) {
    throw gb::ConfigError("run-all uses scenario defaults; use `run` for --config / --set");
  }
  const auto& registry = gb::scenario_registry();
  std::vector<gb::Config> configs;
  for (const auto& info : registry) configs.push_back(build_config(info, s, std::nullopt));

  std::vector<Job> jobs(registry.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < registry.size(); i = next++) {
      jobs[i] = execute(registry[i], configs[i], true, s.timings);
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_workers =
      std::min<std::size_t>(s.workers > 0 ? s.workers : hw, registry.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // Written and reported in registry order, whatever the completion order.
  const std::filesystem::path dir = output_dir(s);
  int code = 0;
  gb::Json summary = gb::Json::array();
  for (const auto& job : jobs) {
    write_job(job, dir);
    print_summary(job, "");
    print_checks(job, false);
    code = std::max(code, job.code);
    summary.push_back({{"scenario", job.name},
                       {"exit_code", job.code},
                       {"error", job.error}});
  }
  gb::write_atomic(dir / "run-all.json", gb::Json{{"scenarios", summary}}.dump(2) + "\n");
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geobridge: bridge problems on chart manifolds and periodic grids"};
  app.require_subcommand(1);
  Settings s;

  auto add_common = [&s](CLI::App* cmd) {
    cmd->add_option("--out", s.out_dir, "output directory (GEOBRIDGE_OUT overrides)");
    cmd->add_option("--seed", s.seed, "seed for random sample points");
    cmd->add_flag("--timings", s.timings, "add wall-clock seconds to timings");
  };
  auto add_scenario = [&s, &add_common](CLI::App* cmd) {
    cmd->add_option("scenario", s.scenario, "scenario name (or taken from --config)");
    cmd->add_option("--config", s.config_path, "TOML config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", s.sets, "override, key=value (repeatable)");
    add_common(cmd);
  };

  CLI::App* list = app.add_subcommand("list", "list scenarios");
  CLI::App* run = app.add_subcommand("run", "run a scenario and write its results");
  CLI::App* check = app.add_subcommand("check", "run a scenario's checks without writing files");
  CLI::App* run_all = app.add_subcommand("run-all", "run every scenario");
  add_scenario(run);
  add_scenario(check);
  add_common(run_all);
  run_all->add_option("--workers", s.workers, "concurrent scenarios (default: hardware threads)")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*list) return cmd_list();
    if (*run) return cmd_run(s, true);
    if (*check) return cmd_run(s, false);
    if (*run_all) return cmd_run_all(s);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "geobridge: %s: %s\n", error_kind(e), e.what());
    return exit_code(e);
  }
  return 2;
}
