#include "qdmd/trajectory_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qdmd/errors.hpp"

namespace qdmd {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(RunKind kind) {
  switch (kind) {
    case RunKind::grok: return "grok";
    case RunKind::non_grok: return "non_grok";
    case RunKind::early_gen: return "early_gen";
  }
  return "unknown";
}

std::string RunMeta::value(const std::string& key) const {
  if (key == "seed") return seed ? std::to_string(*seed) : "";
  if (key == "weight_decay") return weight_decay ? format_double(*weight_decay) : "";
  if (key == "task") return task.value_or("");
  return "";
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kObservableSuffix = ".observable.jsonl";
constexpr const char* kAccuracySuffix = ".accuracy.jsonl";
constexpr const char* kMetaSuffix = ".meta.json";
constexpr const char* kAuxSuffix = ".aux.csv";
constexpr const char* kAuxHeader = "run_id,signal_name,step,value";

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string where(const fs::path& file, std::size_t line) {
  return file.string() + ":" + std::to_string(line);
}

void check_run_id(const std::string& id, const std::string& loc) {
  if (id.empty() || id.find_first_of(",\"\n\r/\\") != std::string::npos) {
    throw ValidationError(loc + ": invalid run_id '" + id + "'");
  }
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <typename T>
T parse_number(const std::string& text, const std::string& loc) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ValidationError(loc + ": cannot parse number '" + text + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ValidationError(loc + ": non-finite value '" + text + "'");
  }
  return value;
}

struct PoolBuilder {
  std::map<std::string, RunRecord> runs;
  std::map<std::string, std::set<std::int64_t>> obs_steps, acc_steps;
  std::map<std::string, std::map<std::string, std::set<std::int64_t>>> aux_steps;

  RunRecord& run(const std::string& id) {
    auto& r = runs[id];
    r.run_id = id;
    return r;
  }

  void read_jsonl(const fs::path& file) {
    auto in = open_in(file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string loc = where(file, lineno);
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw ValidationError(loc + ": malformed line (" + e.what() + ")");
      }
      if (!j.is_object() || !j.contains("run_id") || !j["run_id"].is_string() ||
          !j.contains("step") || !j["step"].is_number_integer()) {
        throw ValidationError(loc + ": malformed line (need string run_id and integer step)");
      }
      const auto id = j["run_id"].get<std::string>();
      check_run_id(id, loc);
      const auto step = j["step"].get<std::int64_t>();
      if (step < 0) throw ValidationError(loc + ": negative step");

      if (j.contains("samples")) {
        const auto& s = j["samples"];
        if (!s.is_array() || s.empty()) {
          throw ValidationError(loc + ": samples must be a non-empty array");
        }
        ObservableRecord rec{id, step, {}};
        rec.samples.reserve(s.size());
        for (const auto& v : s) {
          if (!v.is_number()) throw ValidationError(loc + ": non-numeric sample value");
          const double x = v.get<double>();
          if (!std::isfinite(x)) throw ValidationError(loc + ": non-finite sample value");
          rec.samples.push_back(x);
        }
        if (!obs_steps[id].insert(step).second) {
          throw ValidationError(loc + ": duplicate observable record for run '" + id +
                                "' step " + std::to_string(step));
        }
        run(id).observable.push_back(std::move(rec));
      } else if (j.contains("test_acc")) {
        if (!j["test_acc"].is_number()) throw ValidationError(loc + ": test_acc must be numeric");
        const double acc = j["test_acc"].get<double>();
        if (!(acc >= 0.0 && acc <= 1.0)) {
          throw ValidationError(loc + ": test_acc outside [0, 1]");
        }
        if (!acc_steps[id].insert(step).second) {
          throw ValidationError(loc + ": duplicate accuracy record for run '" + id +
                                "' step " + std::to_string(step));
        }
        run(id).test_acc.push_back({step, acc});
      } else {
        throw ValidationError(loc + ": malformed line (neither samples nor test_acc)");
      }
    }
  }

  void read_aux_csv(const fs::path& file) {
    auto in = open_in(file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::string loc = where(file, lineno);
      if (lineno == 1) {
        if (line != kAuxHeader) {
          throw ValidationError(loc + ": expected header '" + std::string(kAuxHeader) + "'");
        }
        continue;
      }
      const auto cells = split_csv(line);
      if (cells.size() != 4) throw ValidationError(loc + ": expected 4 columns");
      check_run_id(cells[0], loc);
      if (cells[1].empty()) throw ValidationError(loc + ": empty signal name");
      const auto step = parse_number<std::int64_t>(cells[2], loc);
      const auto value = parse_number<double>(cells[3], loc);
      if (!aux_steps[cells[0]][cells[1]].insert(step).second) {
        throw ValidationError(loc + ": duplicate step for signal '" + cells[1] + "'");
      }
      run(cells[0]).aux_signals[cells[1]].push_back({step, value});
    }
  }

  void read_meta(const fs::path& dir, const std::string& id, bool required) {
    const fs::path path = dir / (id + kMetaSuffix);
    if (!fs::exists(path)) {
      if (required) throw IoError("missing metadata file '" + path.string() + "'");
      return;
    }
    auto in = open_in(path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ": malformed metadata (" + e.what() + ")");
    }
    if (!j.is_object()) throw ValidationError(path.string() + ": metadata must be an object");
    if (j.contains("run_id") && j["run_id"] != id) {
      throw ValidationError(path.string() + ": run_id does not match file name");
    }
    RunMeta meta;
    if (j.contains("seed")) {
      if (!j["seed"].is_number_integer()) throw ValidationError(path.string() + ": seed must be an integer");
      meta.seed = j["seed"].get<std::int64_t>();
    }
    if (j.contains("weight_decay")) {
      if (!j["weight_decay"].is_number()) throw ValidationError(path.string() + ": weight_decay must be numeric");
      meta.weight_decay = j["weight_decay"].get<double>();
    }
    if (j.contains("task")) {
      if (!j["task"].is_string()) throw ValidationError(path.string() + ": task must be a string");
      meta.task = j["task"].get<std::string>();
    }
    run(id).meta = meta;
  }

  std::vector<RunRecord> finish(const fs::path& meta_dir) {
    std::vector<RunRecord> out;
    for (auto& [id, r] : runs) {
      read_meta(meta_dir, id, !r.observable.empty());
      std::sort(r.observable.begin(), r.observable.end(),
                [](const auto& a, const auto& b) { return a.step < b.step; });
      std::sort(r.test_acc.begin(), r.test_acc.end(),
                [](const auto& a, const auto& b) { return a.step < b.step; });
      for (auto& [name, pts] : r.aux_signals) {
        std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
      }
      if (!r.observable.empty()) {
        const std::size_t m = r.observable.front().samples.size();
        for (const auto& rec : r.observable) {
          if (rec.samples.size() != m) {
            throw ValidationError("run '" + id + "': probe count changes from " +
                                  std::to_string(m) + " to " +
                                  std::to_string(rec.samples.size()) + " at step " +
                                  std::to_string(rec.step));
          }
        }
      }
      out.push_back(std::move(r));
    }
    return out;
  }
};

}  // namespace

std::vector<RunRecord> load_runs(const fs::path& path, LogFormat format) {
  if (!fs::exists(path)) throw IoError("path '" + path.string() + "' does not exist");
  PoolBuilder builder;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string name = f.filename().string();
      if (ends_with(name, ".jsonl")) builder.read_jsonl(f);
      else if (ends_with(name, kAuxSuffix)) builder.read_aux_csv(f);
    }
    return builder.finish(path);
  }
  if (format == LogFormat::jsonl) builder.read_jsonl(path);
  else builder.read_aux_csv(path);
  return builder.finish(path.parent_path());
}

void write_runs(std::span<const RunRecord> runs, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());

  for (const auto& r : runs) {
    check_run_id(r.run_id, "write_runs");
    {
      auto out = open_out(dir / (r.run_id + kMetaSuffix));
      ordered_json meta;
      meta["run_id"] = r.run_id;
      if (r.meta.seed) meta["seed"] = *r.meta.seed;
      if (r.meta.weight_decay) meta["weight_decay"] = *r.meta.weight_decay;
      if (r.meta.task) meta["task"] = *r.meta.task;
      out << meta.dump() << '\n';
    }
    if (!r.observable.empty()) {
      auto out = open_out(dir / (r.run_id + kObservableSuffix));
      for (const auto& rec : r.observable) {
        ordered_json line;
        line["run_id"] = r.run_id;
        line["step"] = rec.step;
        line["samples"] = rec.samples;
        out << line.dump() << '\n';
      }
    }
    if (!r.test_acc.empty()) {
      auto out = open_out(dir / (r.run_id + kAccuracySuffix));
      for (const auto& p : r.test_acc) {
        ordered_json line;
        line["run_id"] = r.run_id;
        line["step"] = p.step;
        line["test_acc"] = p.accuracy;
        out << line.dump() << '\n';
      }
    }
    if (!r.aux_signals.empty()) {
      auto out = open_out(dir / (r.run_id + kAuxSuffix));
      out << kAuxHeader << '\n';
      for (const auto& [name, pts] : r.aux_signals) {
        for (const auto& p : pts) {
          out << r.run_id << ',' << name << ',' << p.step << ',' << format_double(p.value) << '\n';
        }
      }
    }
  }
}

RunLabel label_run(const RunRecord& run, const LabelPolicy& policy) {
  if (!(policy.onset_threshold > 0.0 && policy.onset_threshold <= 1.0)) {
    throw ValidationError("label.onset_threshold must be in (0, 1]");
  }
  if (run.test_acc.empty()) {
    throw ValidationError("run '" + run.run_id + "' has no test accuracy trace to label");
  }
  RunLabel label;
  for (const auto& p : run.test_acc) {
    if (p.accuracy >= policy.onset_threshold) {
      label.onset_step = p.step;
      break;
    }
  }
  if (!label.onset_step) label.kind = RunKind::non_grok;
  else label.kind = *label.onset_step < policy.early_gen_step ? RunKind::early_gen : RunKind::grok;
  return label;
}

std::string format_diagnostics(std::span<const WindowDiagnostics> diags, int k) {
  std::ostringstream out;
  out << "run_id,window_index,start_step,end_step,residual,r_eff,holdout_rr,persistence_rr";
  for (int i = 1; i <= k; ++i) out << ",eig_re_" << i;
  for (int i = 1; i <= k; ++i) out << ",eig_im_" << i;
  out << '\n';
  for (const auto& d : diags) {
    if (static_cast<int>(d.eigenvalues.size()) > k) {
      throw ValidationError("write_diagnostics: window has more eigenvalues than columns");
    }
    out << d.run_id << ',' << d.window_index << ',' << d.start_step << ',' << d.end_step << ','
        << format_double(d.residual) << ',' << d.r_eff << ',' << format_double(d.holdout_rr)
        << ',' << format_double(d.persistence_rr);
    for (int i = 0; i < k; ++i) {
      out << ',';
      if (i < static_cast<int>(d.eigenvalues.size())) out << format_double(d.eigenvalues[i].real());
    }
    for (int i = 0; i < k; ++i) {
      out << ',';
      if (i < static_cast<int>(d.eigenvalues.size())) out << format_double(d.eigenvalues[i].imag());
    }
    out << '\n';
  }
  return out.str();
}

void write_diagnostics(std::span<const WindowDiagnostics> diags, const fs::path& path, int k) {
  const std::string text = format_diagnostics(diags, k);
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<WindowDiagnostics> read_diagnostics(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  int k = -1;
  std::vector<WindowDiagnostics> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string loc = where(path, lineno);
    const auto cells = split_csv(line);
    if (k < 0) {
      if (cells.size() < 8 || cells[0] != "run_id" || (cells.size() - 8) % 2 != 0) {
        throw ValidationError(loc + ": not a diagnostics header");
      }
      k = static_cast<int>((cells.size() - 8) / 2);
      continue;
    }
    if (cells.size() != static_cast<std::size_t>(8 + 2 * k)) {
      throw ValidationError(loc + ": expected " + std::to_string(8 + 2 * k) + " columns");
    }
    WindowDiagnostics d;
    d.run_id = cells[0];
    check_run_id(d.run_id, loc);
    d.window_index = parse_number<int>(cells[1], loc);
    d.start_step = parse_number<std::int64_t>(cells[2], loc);
    d.end_step = parse_number<std::int64_t>(cells[3], loc);
    d.residual = parse_number<double>(cells[4], loc);
    d.r_eff = parse_number<int>(cells[5], loc);
    d.holdout_rr = parse_number<double>(cells[6], loc);
    d.persistence_rr = parse_number<double>(cells[7], loc);
    for (int i = 0; i < k; ++i) {
      const auto& re = cells[8 + i];
      const auto& im = cells[8 + k + i];
      if (re.empty() != im.empty()) throw ValidationError(loc + ": half-empty eigenvalue");
      if (re.empty()) continue;
      if (static_cast<int>(d.eigenvalues.size()) != i) {
        throw ValidationError(loc + ": eigenvalue columns have gaps");
      }
      d.eigenvalues.emplace_back(parse_number<double>(re, loc), parse_number<double>(im, loc));
    }
    d.degenerate = d.eigenvalues.empty() && d.residual == 0.0;
    out.push_back(std::move(d));
  }
  if (k < 0) throw ValidationError(path.string() + ": empty diagnostics file");
  return out;
}

void write_quantile_csv(std::span<const QuantileTrajectory> trajectories, const fs::path& path) {
  std::ostringstream text;
  text << "run_id,step";
  const std::size_t d = trajectories.empty() ? 0 : trajectories.front().grid.size();
  for (std::size_t i = 1; i <= d; ++i) text << ",q" << i;
  text << '\n';
  for (const auto& traj : trajectories) {
    if (traj.grid.size() != d) throw ValidationError("quantile CSV: runs use different grids");
    for (const auto& p : traj.points) {
      text << traj.run_id << ',' << p.step;
      for (double v : p.values) text << ',' << format_double(v);
      text << '\n';
    }
  }
  auto out = open_out(path);
  out << text.str();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace qdmd
