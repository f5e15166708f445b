// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/analytics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "skilltune/error.hpp"
#include "skilltune/io.hpp"

namespace skilltune {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_usd(const Column& c) { return c.unit == kUsdUnit; }

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".eni") == std::string::npos) s += ".0";
  return s;
}

std::string format_cell(const Cell& cell) {
  struct {
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const { return format_double(v); }
    std::string operator()(Money v) const { return v.to_string(); }
    std::string operator()(const std::string& v) const { return quote(v); }
  } visitor;
  return std::visit(visitor, cell);
}

std::string format_header(const Column& c) {
  std::string text = c.unit.empty() ? c.label : c.label + " (" + c.unit + ")";
  return text.find_first_of(",\"\n\r") == std::string::npos ? text : quote(text);
}

struct Field {
  std::string text;
  bool quoted = false;
};

// RFC 4180 style records; quoted fields may span lines.
std::vector<std::vector<Field>> split_csv(std::string_view csv) {
  std::vector<std::vector<Field>> records;
  std::vector<Field> record;
  Field field;
  bool in_quotes = false;
  bool any = false;
  for (std::size_t i = 0; i < csv.size(); ++i) {
    char c = csv[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < csv.size() && csv[i + 1] == '"') {
          field.text += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.text += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      if (!field.text.empty() || field.quoted) throw Error(ErrorKind::kInvalidArgument, "stray quote in CSV");
      in_quotes = true;
      field.quoted = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field = {};
    } else if (c == '\n') {
      if (!field.text.empty() && field.text.back() == '\r') field.text.pop_back();
      record.push_back(std::move(field));
      field = {};
      records.push_back(std::move(record));
      record.clear();
      any = false;
    } else {
      if (field.quoted) throw Error(ErrorKind::kInvalidArgument, "text after closing quote in CSV");
      field.text += c;
    }
  }
  if (in_quotes) throw Error(ErrorKind::kInvalidArgument, "unterminated quoted CSV field");
  if (any) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

Column parse_header(const std::string& text) {
  std::size_t open = text.rfind(" (");
  if (open != std::string::npos && !text.empty() && text.back() == ')') {
    return {text.substr(0, open), text.substr(open + 2, text.size() - open - 3)};
  }
  return {text, ""};
}

Cell parse_cell(const Field& f, const Column& column) {
  if (f.quoted) return f.text;
  if (is_usd(column)) return Money::parse(f.text);
  const char* first = f.text.data();
  const char* last = first + f.text.size();
  if (f.text.find_first_of(".eEni") != std::string::npos) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && ptr == last) return v;
  } else {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && ptr == last && !f.text.empty()) return v;
  }
  throw Error(ErrorKind::kInvalidArgument, "bad numeric CSV cell '" + f.text + "' in column " + column.label);
}

json cell_to_json(const Cell& cell) {
  struct {
    json operator()(std::int64_t v) const { return v; }
    json operator()(double v) const { return v; }
    json operator()(Money v) const { return v.to_string(); }
    json operator()(const std::string& v) const { return v; }
  } visitor;
  return std::visit(visitor, cell);
}

std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

double as_double(const Cell& cell) {
  if (auto* i = std::get_if<std::int64_t>(&cell)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&cell)) return *d;
  if (auto* m = std::get_if<Money>(&cell)) return static_cast<double>(m->units());
  throw Error(ErrorKind::kInvalidArgument, "text cell in a numeric aggregate");
}

}  // namespace

ReportTable::ReportTable(std::string name, std::vector<Column> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {
  if (columns_.empty()) throw Error(ErrorKind::kInvalidArgument, "a table needs at least one column");
  for (const Column& c : columns_) {
    if (c.label.empty() || c.label.find_first_of("()") != std::string::npos ||
        c.unit.find_first_of("()") != std::string::npos) {
      throw Error(ErrorKind::kInvalidArgument, "bad column '" + c.label + "'");
    }
  }
}

void ReportTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) {
    throw Error(ErrorKind::kInvalidArgument, name_ + ": row has " + std::to_string(row.size()) + " cells, expected " +
                                                 std::to_string(columns_.size()));
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (is_usd(columns_[i]) != std::holds_alternative<Money>(row[i])) {
      throw Error(ErrorKind::kInvalidArgument, name_ + ": column " + columns_[i].label +
                                                   (is_usd(columns_[i]) ? " holds money" : " cannot hold money"));
    }
  }
  rows_.push_back(std::move(row));
}

std::string ReportTable::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) out += (i ? "," : "") + format_header(columns_[i]);
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_cell(row[i]);
    out += '\n';
  }
  return out;
}

ReportTable ReportTable::from_csv(std::string name, std::string_view csv) {
  std::vector<std::vector<Field>> records = split_csv(csv);
  if (records.empty()) throw Error(ErrorKind::kInvalidArgument, "CSV has no header");
  std::vector<Column> columns;
  for (const Field& f : records.front()) columns.push_back(parse_header(f.text));
  ReportTable table(std::move(name), std::move(columns));
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.columns_.size()) {
      throw Error(ErrorKind::kInvalidArgument, "CSV row " + std::to_string(r) + " has the wrong arity");
    }
    std::vector<Cell> row;
    for (std::size_t i = 0; i < records[r].size(); ++i) row.push_back(parse_cell(records[r][i], table.columns_[i]));
    table.add_row(std::move(row));
  }
  return table;
}

json ReportTable::to_json() const {
  json cols = json::array();
  for (const Column& c : columns_) cols.push_back({{"label", c.label}, {"unit", c.unit}});
  json rows = json::array();
  for (const auto& row : rows_) {
    json r = json::array();
    for (const Cell& cell : row) r.push_back(cell_to_json(cell));
    rows.push_back(std::move(r));
  }
  return {{"name", name_}, {"columns", cols}, {"rows", rows}};
}

L3ActivationStats l3_activation(const std::vector<Trajectory>& trajectories, const SkillPackage& skill) {
  L3ActivationStats stats;
  stats.l3_files = skill.resources.size();
  stats.total_tasks = trajectories.size();
  for (const Trajectory& t : trajectories) {
    std::size_t reads = t.count_calls(kReadReferenceTool);
    stats.l3_reads += reads;
    if (reads > 0) ++stats.activated_tasks;
  }
  return stats;
}

ReportTable l3_activation_table(const std::vector<std::pair<std::string, L3ActivationStats>>& rows,
                                std::string name) {
  ReportTable table(std::move(name), {{"skill", ""},
                                      {"l3_files", "files"},
                                      {"l3_reads", "calls"},
                                      {"activated", "tasks"},
                                      {"total", "tasks"},
                                      {"activation_rate", "percent"}});
  for (const auto& [label, s] : rows) {
    double rate = s.total_tasks == 0 ? 0.0 : 100.0 * static_cast<double>(s.activated_tasks) / s.total_tasks;
    table.add_row({label, as_int(s.l3_files), as_int(s.l3_reads), as_int(s.activated_tasks), as_int(s.total_tasks),
                   std::round(rate * 10.0) / 10.0});
  }
  return table;
}

ReportTable structure_series(const RunState& run) {
  ReportTable table("structure", {{"iteration", ""},
                                  {"l2_lines", "lines"},
                                  {"l2_words", "words"},
                                  {"l2_chars", "chars"},
                                  {"l3_files", "files"},
                                  {"l3_words", "words"},
                                  {"l3_chars", "chars"}});
  for (std::size_t t = 0; t < run.snapshots.size(); ++t) {
    LayerMetrics m = layer_metrics(run.snapshots[t]);
    table.add_row({as_int(t), as_int(m.l2_lines), as_int(m.l2_words), as_int(m.l2_chars), as_int(m.l3_files),
                   as_int(m.l3_words), as_int(m.l3_chars)});
  }
  return table;
}

ReportTable dynamics_series(const RunState& run) {
  ReportTable table("dynamics",
                    {{"iteration", ""}, {"cumulative", "patterns"}, {"new", "patterns"}, {"active", "patterns"}});
  const int last = run.current_iteration;
  if (!run.config.ablations.momentum_enabled) {
    for (int t = 1; t <= last; ++t) table.add_row({std::int64_t{t}, std::int64_t{0}, std::int64_t{0}, std::int64_t{0}});
    return table;
  }
  if (run.memories.size() != static_cast<std::size_t>(last)) {
    throw Error(ErrorKind::kMissingArtifacts, "momentum memory missing for some iterations");
  }
  for (const DynamicsRow& r : derived_metrics(run.memories)) {
    table.add_row({std::int64_t{r.iteration}, as_int(r.cumulative), as_int(r.fresh), as_int(r.active)});
  }
  return table;
}

ReportTable magnitude_series(const RunState& run) {
  ReportTable table("magnitude", {{"iteration", ""},
                                  {"words_added", "words"},
                                  {"words_removed", "words"},
                                  {"lines_added", "lines"},
                                  {"lines_removed", "lines"},
                                  {"chars_added", "chars"},
                                  {"chars_removed", "chars"}});
  if (run.snapshots.size() != static_cast<std::size_t>(run.current_iteration) + 1) {
    throw Error(ErrorKind::kMissingArtifacts, "skill snapshots missing for some iterations");
  }
  for (std::size_t t = 1; t < run.snapshots.size(); ++t) {
    PatchMagnitude m = patch_magnitude(run.snapshots[t - 1], run.snapshots[t]);
    table.add_row({as_int(t), as_int(m.words_added), as_int(m.words_removed), as_int(m.lines_added),
                   as_int(m.lines_removed), as_int(m.chars_added), as_int(m.chars_removed)});
  }
  return table;
}

ReportTable cost_series(const RunState& run) {
  std::vector<Column> columns = {{"iteration", ""}};
  for (Stage stage : kAllStages) columns.push_back({std::string(to_string(stage)), std::string(kUsdUnit)});
  columns.push_back({"total", std::string(kUsdUnit)});
  columns.push_back({"cumulative", std::string(kUsdUnit)});
  ReportTable table("costs", std::move(columns));
  Money running;
  for (int t = 1; t <= run.current_iteration; ++t) {
    std::vector<Cell> row = {std::int64_t{t}};
    for (Stage stage : kAllStages) row.push_back(run.ledger.stage_total(t, stage));
    Money total = run.ledger.iteration_total(t);
    running += total;
    row.push_back(total);
    row.push_back(running);
    table.add_row(std::move(row));
  }
  return table;
}

ReportTable training_l3_series(const RunState& run) {
  std::vector<std::pair<std::string, L3ActivationStats>> rows;
  for (int t = 1; t <= run.current_iteration; ++t) {
    fs::path dir = run.config.paths.run_dir / ("iter_" + std::to_string(t)) / "trajectories";
    if (!fs::is_directory(dir)) throw Error(ErrorKind::kMissingArtifacts, "missing " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<Trajectory> trajectories;
    for (const fs::path& f : files) trajectories.push_back(load_trajectory(f));
    rows.emplace_back("iter_" + std::to_string(t), l3_activation(trajectories, run.snapshots.at(t - 1)));
  }
  return l3_activation_table(rows, "training_l3_activation");
}

ReportTable aggregate_seeds(const std::vector<ReportTable>& tables) {
  if (tables.empty()) throw Error(ErrorKind::kInvalidArgument, "nothing to aggregate");
  const ReportTable& first = tables.front();
  for (const ReportTable& t : tables) {
    if (t.columns() != first.columns() || t.rows().size() != first.rows().size()) {
      throw Error(ErrorKind::kInvalidArgument, "tables of " + first.name() + " differ in shape across seeds");
    }
    for (std::size_t r = 0; r < t.rows().size(); ++r) {
      if (t.rows()[r].front() != first.rows()[r].front()) {
        throw Error(ErrorKind::kInvalidArgument, "row keys of " + first.name() + " differ across seeds");
      }
    }
  }
  std::vector<std::size_t> numeric;
  std::vector<Column> columns = {first.columns().front()};
  for (std::size_t c = 1; c < first.columns().size(); ++c) {
    bool text = std::any_of(first.rows().begin(), first.rows().end(),
                            [&](const auto& row) { return std::holds_alternative<std::string>(row[c]); });
    if (text) continue;
    numeric.push_back(c);
    columns.push_back({first.columns()[c].label + "_mean", first.columns()[c].unit});
    columns.push_back({first.columns()[c].label + "_std", first.columns()[c].unit});
  }
  ReportTable out(first.name() + "_aggregate", std::move(columns));
  const double n = static_cast<double>(tables.size());
  for (std::size_t r = 0; r < first.rows().size(); ++r) {
    std::vector<Cell> row = {first.rows()[r].front()};
    for (std::size_t c : numeric) {
      double sum = 0;
      for (const ReportTable& t : tables) sum += as_double(t.rows()[r][c]);
      double mean = sum / n;
      double sq = 0;
      for (const ReportTable& t : tables) sq += (as_double(t.rows()[r][c]) - mean) * (as_double(t.rows()[r][c]) - mean);
      double sd = std::sqrt(sq / n);
      if (is_usd(first.columns()[c])) {
        row.push_back(Money::from_units(std::llround(mean)));
        row.push_back(Money::from_units(std::llround(sd)));
      } else {
        row.push_back(mean);
        row.push_back(sd);
      }
    }
    out.add_row(std::move(row));
  }
  return out;
}

RunState load_for_report(const fs::path& run_dir) {
  try {
    return load_run(run_dir);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kCorruptRunDir) throw;
    throw Error(ErrorKind::kMissingArtifacts, e.what());
  }
}

std::vector<ReportTable> write_reports(const fs::path& run_dir) {
  RunState run = load_for_report(run_dir);
  std::vector<ReportTable> tables = {structure_series(run), dynamics_series(run), magnitude_series(run),
                                     cost_series(run), training_l3_series(run)};
  json combined = json::object();
  for (const ReportTable& t : tables) {
    write_text(run_dir / "reports" / (t.name() + ".csv"), t.to_csv());
    combined[t.name()] = t.to_json();
  }
  write_json(run_dir / "reports" / "report.json", {{"iterations", run.current_iteration}, {"tables", combined}});
  return tables;
}

}  // namespace skilltune
