#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathchaos/experiments.hpp"

namespace pathchaos {

// Every report header carries this note.
inline constexpr const char* kPresetNote =
    "preset parameters are implementation choices; no published experiment is reproduced";

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);
RunReport read_report(const std::string& path);

// All floats with 17 significant digits.
void write_table_csv(std::ostream& out, const Table& table);
void write_table_csv(const std::string& path, const Table& table);

// Markdown-style table: scenario, record, value, se, bound, pass.
std::string render_text(const std::vector<RunReport>& reports);

struct EmitResult {
  bool all_pass = false;
  std::vector<std::string> failing;  // "scenario [tag]: record"
  std::vector<std::string> files;
};

// Prints the text summary and, when out_dir is nonempty, writes one JSON per report plus a
// CSV per table. Throws InvalidParameter on an empty report list or a report with no
// records, IoError on write failures.
EmitResult emit_report(const std::vector<RunReport>& reports, const std::string& out_dir,
                       std::ostream& text_out, bool write_csv = true, bool write_json = true);

}  // namespace pathchaos
