#include "qdmd/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <string_view>

#include "qdmd/errors.hpp"

namespace qdmd {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

double parse_double(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  double v = 0.0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (t.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw ValidationError("config: " + key + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  std::int64_t v = 0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (t.empty() || res.ec != std::errc() || res.ptr != last) {
    throw ValidationError("config: " + key + ": expected an integer, got '" + text + "'");
  }
  return v;
}

int parse_small_int(const std::string& key, const std::string& text) {
  const auto v = parse_int(key, text);
  if (v < -1'000'000'000 || v > 1'000'000'000) {
    throw ValidationError("config: " + key + ": value out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t parse_seed(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ValidationError("config: " + key + ": expected a non-negative integer, got '" +
                          text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ValidationError("config: " + key + ": expected true or false, got '" + text + "'");
}

// "[a, b, c]" or "a,b,c"; empty string gives an empty list.
std::vector<std::string> parse_list(const std::string& text) {
  auto t = trim(text);
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']') throw ValidationError("config: unterminated list '" + text + "'");
    t = t.substr(1, t.size() - 2);
  }
  std::vector<std::string> items;
  if (trim(t).empty()) return items;
  std::size_t pos = 0;
  while (true) {
    const auto comma = t.find(',', pos);
    const auto item = unquote(trim(std::string_view(t).substr(pos, comma - pos)));
    if (item.empty()) throw ValidationError("config: empty list element in '" + text + "'");
    items.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return items;
}

using Setter = std::function<void(ToolConfig&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"grid.levels",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         std::vector<double> levels;
         for (const auto& item : parse_list(v)) levels.push_back(parse_double(k, item));
         c.grid = QuantileGrid(std::move(levels));
       }},
      {"dmd.delays",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.dmd.delays = parse_small_int(k, v);
       }},
      {"dmd.modes",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.dmd.modes = parse_small_int(k, v);
       }},
      {"dmd.energy_threshold",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.dmd.energy_threshold = parse_double(k, v);
       }},
      {"dmd.segment_steps",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.dmd.segment_steps = parse_int(k, v);
       }},
      {"dmd.holdout_fraction",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.dmd.holdout_fraction = parse_double(k, v);
       }},
      {"dmd.svd_rel_tol",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.dmd.svd_rel_tol = parse_double(k, v);
       }},
      {"alarm.tau",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.alarm.tau = parse_double(k, v);
       }},
      {"alarm.K",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.alarm.k = parse_small_int(k, v);
       }},
      {"alarm.baseline_windows",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.alarm.baseline_windows = parse_small_int(k, v);
       }},
      {"alarm.rule",
       [](ToolConfig& c, const std::string&, const std::string& v) {
         c.alarm.rule = parse_alarm_rule(unquote(trim(v)));
       }},
      {"label.onset_threshold",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.label.onset_threshold = parse_double(k, v);
       }},
      {"label.early_gen_step",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.label.early_gen_step = parse_int(k, v);
       }},
      {"eval.signal",
       [](ToolConfig& c, const std::string&, const std::string& v) {
         c.eval.signal = unquote(trim(v));
       }},
      {"eval.n_boot",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.eval.n_boot = parse_small_int(k, v);
       }},
      {"eval.target_fpr",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.eval.target_fpr = parse_double(k, v);
       }},
      {"eval.group_by",
       [](ToolConfig& c, const std::string&, const std::string& v) {
         c.eval.group_by = unquote(trim(v));
       }},
      {"eval.calibration_runs",
       [](ToolConfig& c, const std::string&, const std::string& v) {
         c.eval.calibration_runs = parse_list(v);
       }},
      {"eval.test_runs",
       [](ToolConfig& c, const std::string&, const std::string& v) {
         c.eval.test_runs = parse_list(v);
       }},
      {"shuffle.n_shuffles",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.shuffle.n_shuffles = parse_int(k, v);
       }},
      {"shuffle.exact",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.shuffle.exact = parse_bool(k, v);
       }},
      {"synth.n_grok",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.synth.n_grok = parse_small_int(k, v);
       }},
      {"synth.n_non",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.synth.n_non = parse_small_int(k, v);
       }},
      {"synth.max_steps",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.synth.shape.max_steps = parse_int(k, v);
       }},
      {"synth.record_every",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.synth.shape.record_every = parse_int(k, v);
       }},
      {"synth.probe_size",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.synth.shape.probe_size = parse_small_int(k, v);
       }},
      {"synth.aux_every",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.synth.shape.aux_every = parse_int(k, v);
       }},
      {"synth.switch_magnitude",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.synth.shape.switch_magnitude = parse_double(k, v);
       }},
      {"seed",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.seed = parse_seed(k, v);
       }},
      {"threads",
       [](ToolConfig& c, const std::string& k, const std::string& v) {
         c.threads = parse_small_int(k, v);
       }},
  };
  return table;
}

}  // namespace

std::vector<std::string> ToolConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, fn] : setters()) out.push_back(key);
  return out;
}

void ToolConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, fn] : setters()) {
    if (name == key) {
      fn(*this, key, value);
      return;
    }
  }
  throw ValidationError("config: unknown key '" + key + "'");
}

void ToolConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto where = path.string() + ":" + std::to_string(line_no);
    // Strip comments outside quotes.
    bool quoted = false;
    char quote = 0;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const char ch = raw[i];
      if (quoted) {
        if (ch == quote) quoted = false;
      } else if (ch == '"' || ch == '\'') {
        quoted = true;
        quote = ch;
      } else if (ch == '#') {
        cut = i;
        break;
      }
    }
    const auto line = trim(std::string_view(raw).substr(0, cut));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ValidationError(where + ": malformed section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
    const auto name = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    if (name.empty()) throw ValidationError(where + ": empty key");
    const auto key = section.empty() ? name : section + "." + name;
    try {
      set(key, value);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  validate();
}

void ToolConfig::validate() const {
  dmd.validate();
  alarm.validate();
  if (!(label.onset_threshold > 0.0 && label.onset_threshold <= 1.0)) {
    throw ValidationError("config: label.onset_threshold must lie in (0, 1]");
  }
  if (label.early_gen_step < 0) {
    throw ValidationError("config: label.early_gen_step must be >= 0");
  }
  if (eval.signal.empty()) throw ValidationError("config: eval.signal must not be empty");
  if (eval.n_boot < 1) throw ValidationError("config: eval.n_boot must be >= 1");
  if (!(eval.target_fpr >= 0.0 && eval.target_fpr <= 1.0)) {
    throw ValidationError("config: eval.target_fpr must lie in [0, 1]");
  }
  if (eval.calibration_runs.empty() != eval.test_runs.empty()) {
    throw ValidationError(
        "config: eval.calibration_runs and eval.test_runs must be given together");
  }
  for (const auto& id : eval.calibration_runs) {
    if (std::find(eval.test_runs.begin(), eval.test_runs.end(), id) != eval.test_runs.end()) {
      throw ValidationError("config: run '" + id + "' is in both calibration and test sets");
    }
  }
  if (shuffle.n_shuffles < 1) throw ValidationError("config: shuffle.n_shuffles must be >= 1");
  if (synth.n_grok < 0 || synth.n_non < 0) {
    throw ValidationError("config: synth pool sizes must be >= 0");
  }
  if (synth.shape.max_steps < 1 || synth.shape.record_every < 1 ||
      synth.shape.probe_size < 1 || synth.shape.aux_every < 1) {
    throw ValidationError("config: synth shape values must be >= 1");
  }
  if (!(synth.shape.switch_magnitude > 0.0 && synth.shape.switch_magnitude <= 1.0)) {
    throw ValidationError("config: synth.switch_magnitude must lie in (0, 1]");
  }
  if (threads < 0) throw ValidationError("config: threads must be >= 0");
}

nlohmann::ordered_json ToolConfig::to_json() const {
  nlohmann::ordered_json j;
  j["grid"]["levels"] = std::vector<double>(grid.levels().begin(), grid.levels().end());
  j["dmd"] = {{"delays", dmd.delays},
              {"modes", dmd.modes},
              {"energy_threshold", dmd.energy_threshold},
              {"segment_steps", dmd.segment_steps},
              {"holdout_fraction", dmd.holdout_fraction},
              {"svd_rel_tol", dmd.svd_rel_tol}};
  j["alarm"] = {{"tau", alarm.tau},
                {"K", alarm.k},
                {"baseline_windows", alarm.baseline_windows},
                {"rule", to_string(alarm.rule)}};
  j["label"] = {{"onset_threshold", label.onset_threshold},
                {"early_gen_step", label.early_gen_step}};
  j["eval"] = {{"signal", eval.signal},
               {"n_boot", eval.n_boot},
               {"target_fpr", eval.target_fpr},
               {"group_by", eval.group_by},
               {"calibration_runs", eval.calibration_runs},
               {"test_runs", eval.test_runs}};
  j["shuffle"] = {{"n_shuffles", shuffle.n_shuffles}, {"exact", shuffle.exact}};
  j["synth"] = {{"n_grok", synth.n_grok},
                {"n_non", synth.n_non},
                {"max_steps", synth.shape.max_steps},
                {"record_every", synth.shape.record_every},
                {"probe_size", synth.shape.probe_size},
                {"aux_every", synth.shape.aux_every},
                {"switch_magnitude", synth.shape.switch_magnitude}};
  j["seed"] = seed;
  return j;
}

}  // namespace qdmd
