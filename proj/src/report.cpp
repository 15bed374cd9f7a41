#include "pathchaos/report.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace pathchaos {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string slug(const RunReport& r) {
  std::string s = r.scenario;
  if (!r.tag.empty()) s += "_" + r.tag;
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.' && c != '_') c = '_';
  return s;
}

double number_or_inf(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

nlohmann::json to_json(const RunReport& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["tag"] = r.tag;
  j["note"] = kPresetNote;
  j["config_hash"] = r.config_hash;
  j["config"] = r.config_text;
  j["seed"] = r.seed;
  j["wall_clock_s"] = r.wall_clock;
  j["all_pass"] = r.all_pass();
  nlohmann::json recs = nlohmann::json::array();
  for (const Record& rec : r.records)
    recs.push_back({{"name", rec.name},
                    {"invariant", rec.invariant},
                    {"value", rec.value},
                    {"se", rec.se},
                    {"bound", rec.bound},
                    {"pass", rec.pass}});
  j["records"] = recs;
  nlohmann::json tables = nlohmann::json::array();
  for (const Table& t : r.tables)
    tables.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", t.rows.size()}});
  j["tables"] = tables;
  return j;
}

RunReport report_from_json(const nlohmann::json& j) {
  try {
    RunReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.tag = j.value("tag", "");
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config_text = j.value("config", "");
    r.seed = j.at("seed").get<std::uint64_t>();
    r.wall_clock = j.value("wall_clock_s", 0.0);
    for (const auto& rec : j.at("records"))
      r.records.push_back(Record{rec.at("name").get<std::string>(),
                                 rec.at("invariant").get<std::string>(),
                                 number_or_inf(rec.at("value")), number_or_inf(rec.at("se")),
                                 number_or_inf(rec.at("bound")), rec.at("pass").get<bool>()});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed report JSON: ") + e.what());
  }
}

RunReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path);
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_table_csv(std::ostream& out, const Table& table) {
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << g17(row[i]);
    out << "\n";
  }
}

void write_table_csv(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_table_csv(out, table);
  if (!out) throw IoError("failed writing " + path);
}

std::string render_text(const std::vector<RunReport>& reports) {
  std::ostringstream o;
  o << "# " << kPresetNote << "\n\n";
  o << "| scenario | record | value | se | bound | pass |\n";
  o << "|---|---|---|---|---|---|\n";
  for (const RunReport& r : reports) {
    const std::string name = r.tag.empty() ? r.scenario : r.scenario + " [" + r.tag + "]";
    for (const Record& rec : r.records)
      o << "| " << name << " | " << rec.name << " | " << g6(rec.value) << " | " << g6(rec.se)
        << " | " << g6(rec.bound) << " | " << (rec.pass ? "PASS" : "FAIL") << " |\n";
  }
  return o.str();
}

EmitResult emit_report(const std::vector<RunReport>& reports, const std::string& out_dir,
                       std::ostream& text_out, bool write_csv, bool write_json) {
  if (reports.empty()) throw InvalidParameter("nothing to report: the report list is empty");
  for (const RunReport& r : reports)
    if (r.records.empty())
      throw InvalidParameter("report '" + r.scenario + "' has no records");
  EmitResult res;
  res.all_pass = true;
  for (const RunReport& r : reports)
    for (const Record& rec : r.records)
      if (!rec.pass) {
        res.all_pass = false;
        res.failing.push_back(r.scenario + (r.tag.empty() ? "" : " [" + r.tag + "]") + ": " + rec.name);
      }
  text_out << render_text(reports);
  for (const std::string& f : res.failing) text_out << "FAILED " << f << "\n";
  text_out << (res.all_pass ? "all checks passed\n" : "some checks failed\n");

  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
    for (const RunReport& r : reports) {
      const std::string base = (std::filesystem::path(out_dir) / slug(r)).string();
      if (write_json) {
        const std::string path = base + ".json";
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        out << to_json(r).dump(2) << "\n";
        if (!out) throw IoError("failed writing " + path);
        res.files.push_back(path);
      }
      if (write_csv)
        for (const Table& t : r.tables) {
          const std::string path = base + "_" + t.name + ".csv";
          write_table_csv(path, t);
          res.files.push_back(path);
        }
    }
  }
  return res;
}

}  // namespace pathchaos
