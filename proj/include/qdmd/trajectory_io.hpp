#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qdmd/hankel_dmd.hpp"
#include "qdmd/quantile_embed.hpp"
#include "qdmd/run_record.hpp"

namespace qdmd {

enum class LogFormat { jsonl, csv };

// Loads a pool of runs.
//
// A directory is scanned for every *.jsonl file (observable and accuracy
// lines, told apart by their "samples" / "test_acc" keys), every *.aux.csv file
// (aux signals: run_id,signal_name,step,value) and one <run_id>.meta.json
// sidecar per run that has observable records. A single file is parsed with
// the given format; its sidecars are looked up next to it.
//
// Records are sorted by step and runs by run_id. Malformed lines raise
// ValidationError naming file and line; a missing sidecar raises IoError.
std::vector<RunRecord> load_runs(const std::filesystem::path& path,
                                 LogFormat format = LogFormat::jsonl);

// Writes one directory in the layout load_runs reads:
// <id>.observable.jsonl, <id>.accuracy.jsonl, <id>.meta.json, <id>.aux.csv.
void write_runs(std::span<const RunRecord> runs, const std::filesystem::path& dir);

struct LabelPolicy {
  double onset_threshold = 0.99;
  std::int64_t early_gen_step = 2500;
};

RunLabel label_run(const RunRecord& run, const LabelPolicy& policy = {});

// Diagnostics CSV with eig_re_1..k and eig_im_1..k columns; retained
// eigenvalues beyond a window's count are written as empty cells.
void write_diagnostics(std::span<const WindowDiagnostics> diags,
                       const std::filesystem::path& path, int k);
std::string format_diagnostics(std::span<const WindowDiagnostics> diags, int k);
std::vector<WindowDiagnostics> read_diagnostics(const std::filesystem::path& path);

// run_id,step,q1..qd
void write_quantile_csv(std::span<const QuantileTrajectory> trajectories,
                        const std::filesystem::path& path);

// Shortest text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace qdmd
