// qdmd command-line tool. Talks to the library only through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qdmd/qdmd.h"

namespace {

struct Failure {
  qdmd_status status;
  std::string message;
};

void check(qdmd_status st) {
  if (st != QDMD_OK) throw Failure{st, qdmd_last_error()};
}

int exit_code(qdmd_status st) { return st == QDMD_ERROR_IO ? 2 : 1; }

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Config = Handle<qdmd_config, qdmd_config_free>;
using Pool = Handle<qdmd_pool, qdmd_pool_free>;
using Diagnostics = Handle<qdmd_diagnostics, qdmd_diagnostics_free>;

std::string take(char* s) {
  std::string out(s);
  qdmd_string_free(s);
  return out;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{QDMD_ERROR_IO, "cannot open '" + path + "' for writing"};
  out << text;
  if (!out.flush()) throw Failure{QDMD_ERROR_IO, "failed writing '" + path + "'"};
}

std::string join(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += items[i];
  }
  return out + "]";
}

struct Overrides {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<int> threads;
  std::optional<std::string> seed;
  std::optional<std::string> tau, k, rule, signal, onset_threshold, early_gen_step, n_boot;
  std::optional<std::vector<std::string>> calibration_runs, test_runs;
};

// Defaults, then the config file, then --set pairs, then dedicated flags.
void build_config(qdmd_config* cfg, const Overrides& o) {
  if (!o.config_file.empty()) check(qdmd_config_load(cfg, o.config_file.c_str()));
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw Failure{QDMD_ERROR_VALIDATION, "--set expects key=value, got '" + kv + "'"};
    }
    check(qdmd_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  const std::vector<std::pair<const char*, const std::optional<std::string>*>> flags = {
      {"seed", &o.seed},
      {"alarm.tau", &o.tau},
      {"alarm.K", &o.k},
      {"alarm.rule", &o.rule},
      {"eval.signal", &o.signal},
      {"label.onset_threshold", &o.onset_threshold},
      {"label.early_gen_step", &o.early_gen_step},
      {"eval.n_boot", &o.n_boot},
  };
  for (const auto& [key, value] : flags) {
    if (*value) check(qdmd_config_set(cfg, key, (*value)->c_str()));
  }
  if (o.calibration_runs) {
    check(qdmd_config_set(cfg, "eval.calibration_runs", join(*o.calibration_runs).c_str()));
  }
  if (o.test_runs) check(qdmd_config_set(cfg, "eval.test_runs", join(*o.test_runs).c_str()));
  if (o.threads) check(qdmd_config_set(cfg, "threads", std::to_string(*o.threads).c_str()));
  check(qdmd_config_validate(cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributional Hankel-DMD diagnostics for training dynamics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", qdmd_version());

  Overrides o;
  app.add_option("--config", o.config_file, "Config file (section/key = value)");
  app.add_option("--set", o.sets, "Override a config key: section.key=value");
  app.add_option("--threads", o.threads, "Worker threads, 0 = auto (never affects output)");
  app.add_option("--seed", o.seed, "Top-level random seed");
  app.add_option("--tau", o.tau, "Alarm threshold multiplier");
  app.add_option("--K", o.k, "Consecutive exceedances for the sustained rule");
  app.add_option("--rule", o.rule, "sustained | instantaneous");
  app.add_option("--signal", o.signal, "residual or an aux signal name");
  app.add_option("--onset-threshold", o.onset_threshold, "Test accuracy defining onset");
  app.add_option("--early-gen-step", o.early_gen_step, "Onsets at or before this are early");
  app.add_option("--n-boot", o.n_boot, "Bootstrap replicates");
  app.add_option("--calibration-runs", o.calibration_runs, "Runs used to fix the threshold")
      ->delimiter(',');
  app.add_option("--test-runs", o.test_runs, "Held-out runs the threshold is applied to")
      ->delimiter(',');
  app.fallthrough();

  std::string input, output, diag_a, diag_b, run_a, run_b;
  int window_a = 0, window_b = 0;

  auto* synth = app.add_subcommand("synth", "Write a synthetic labeled run pool");
  synth->add_option("--output", output, "Output directory")->required();

  auto* embed = app.add_subcommand("embed", "Quantile coordinates of every snapshot");
  embed->add_option("--input", input, "Run directory or log file")->required();
  embed->add_option("--output", output, "Quantile CSV")->required();

  auto* dmd = app.add_subcommand("dmd", "Windowed Hankel-DMD diagnostics");
  dmd->add_option("--input", input, "Run directory or log file")->required();
  dmd->add_option("--output", output, "Diagnostics CSV")->required();

  auto* alarm = app.add_subcommand("alarm", "Per-run residual alarms");
  alarm->add_option("--diagnostics", diag_a, "Diagnostics CSV")->required();
  alarm->add_option("--output", output, "Report JSON (stdout if omitted)");

  auto* evaluate = app.add_subcommand("evaluate", "Pool-level detection report");
  evaluate->add_option("--runs", input, "Run directory or log file")->required();
  evaluate->add_option("--diagnostics", diag_a, "Diagnostics CSV");
  evaluate->add_option("--output", output, "Report JSON (stdout if omitted)");

  auto* compare = app.add_subcommand("compare-spectra", "Spectral distance with shuffle control");
  compare->add_option("--diagnostics-a", diag_a, "Diagnostics CSV of the first window")
      ->required();
  compare->add_option("--diagnostics-b", diag_b, "Diagnostics CSV of the second window");
  compare->add_option("--run-a", run_a, "Run of the first window")->required();
  compare->add_option("--run-b", run_b, "Run of the second window")->required();
  compare->add_option("--window-a", window_a, "Window index in run A")->required();
  compare->add_option("--window-b", window_b, "Window index in run B")->required();
  compare->add_option("--output", output, "Report JSON (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    Config cfg;
    check(qdmd_config_new(cfg.out()));
    build_config(cfg.get(), o);

    if (synth->parsed()) {
      Pool pool;
      check(qdmd_pool_synthesize(cfg.get(), pool.out()));
      check(qdmd_pool_write(pool.get(), output.c_str()));
    } else if (embed->parsed()) {
      Pool pool;
      check(qdmd_pool_load(input.c_str(), pool.out()));
      check(qdmd_embed_write(pool.get(), cfg.get(), output.c_str()));
    } else if (dmd->parsed()) {
      Pool pool;
      check(qdmd_pool_load(input.c_str(), pool.out()));
      Diagnostics diags;
      check(qdmd_diagnose(pool.get(), cfg.get(), diags.out()));
      check(qdmd_diagnostics_write(diags.get(), cfg.get(), output.c_str()));
    } else if (alarm->parsed()) {
      Diagnostics diags;
      check(qdmd_diagnostics_read(diag_a.c_str(), diags.out()));
      char* json = nullptr;
      check(qdmd_alarm_report(diags.get(), cfg.get(), &json));
      emit(take(json), output);
    } else if (evaluate->parsed()) {
      Pool pool;
      check(qdmd_pool_load(input.c_str(), pool.out()));
      Diagnostics diags;
      if (!diag_a.empty()) check(qdmd_diagnostics_read(diag_a.c_str(), diags.out()));
      char* json = nullptr;
      check(qdmd_evaluate_report(pool.get(), diags.get(), cfg.get(), &json));
      emit(take(json), output);
    } else if (compare->parsed()) {
      Diagnostics a, b;
      check(qdmd_diagnostics_read(diag_a.c_str(), a.out()));
      const std::string path_b = diag_b.empty() ? diag_a : diag_b;
      check(qdmd_diagnostics_read(path_b.c_str(), b.out()));
      char* json = nullptr;
      check(qdmd_compare_spectra(a.get(), run_a.c_str(), window_a, b.get(), run_b.c_str(),
                                 window_b, cfg.get(), &json));
      emit(take(json), output);
    }
  } catch (const Failure& f) {
    std::cerr << "qdmd: " << f.message << "\n";
    return exit_code(f.status);
  }
  return 0;
}
