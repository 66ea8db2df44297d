#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdmd/config.hpp"
#include "qdmd/detection_eval.hpp"
#include "qdmd/hankel_dmd.hpp"
#include "qdmd/run_record.hpp"
#include "qdmd/spectral_compare.hpp"

namespace qdmd {

// Stages of the command-line workflow. Output ordering always follows run_id
// and window index, never completion order.

std::vector<QuantileTrajectory> embed_pool(const std::vector<RunRecord>& runs,
                                           const ToolConfig& cfg);

std::vector<WindowDiagnostics> diagnose_pool(const std::vector<RunRecord>& runs,
                                             const ToolConfig& cfg);

nlohmann::ordered_json alarm_report(const std::vector<WindowDiagnostics>& diags,
                                    const ToolConfig& cfg);

nlohmann::ordered_json evaluate_report(const std::vector<RunRecord>& runs,
                                       const std::vector<WindowDiagnostics>& diags,
                                       const ToolConfig& cfg);

// Eigenvalues of one diagnosed window; throws ValidationError if absent.
Spectrum select_spectrum(const std::vector<WindowDiagnostics>& diags,
                         const std::string& run_id, int window_index);

nlohmann::ordered_json compare_report(const Spectrum& a, const Spectrum& b,
                                      const ToolConfig& cfg);

// JSON text with a trailing newline, as written by every command.
std::string dump_report(const nlohmann::ordered_json& report);

}  // namespace qdmd
