// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>

#include "skilltune/error.hpp"
#include "skilltune/io.hpp"
#include "skilltune/rng.hpp"

namespace skilltune {

namespace fs = std::filesystem;

Scalar scalar_from_json(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null: return std::monostate{};
    case nlohmann::json::value_t::boolean: return j.get<bool>();
    case nlohmann::json::value_t::number_integer:
    case nlohmann::json::value_t::number_unsigned: return j.get<std::int64_t>();
    case nlohmann::json::value_t::number_float: return j.get<double>();
    case nlohmann::json::value_t::string: return j.get<std::string>();
    default: throw Error(ErrorKind::kUnreadableArtifact, "cell must be a scalar, got " + j.dump());
  }
}

nlohmann::json scalar_to_json(const Scalar& s) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, std::monostate>) {
          return nullptr;
        } else {
          return v;
        }
      },
      s);
}

std::string scalar_repr(const Scalar& s) {
  if (std::holds_alternative<std::monostate>(s)) return "empty";
  return scalar_to_json(s).dump();
}

bool scalar_equal(const Scalar& expected, const Scalar& actual) {
  auto as_number = [](const Scalar& s) -> std::optional<double> {
    if (auto* i = std::get_if<std::int64_t>(&s)) return static_cast<double>(*i);
    if (auto* d = std::get_if<double>(&s)) return *d;
    return std::nullopt;
  };
  if (std::holds_alternative<double>(expected) || std::holds_alternative<double>(actual)) {
    auto a = as_number(expected);
    auto b = as_number(actual);
    return a && b && std::fabs(*a - *b) <= 1e-9;
  }
  return expected == actual;
}

static std::string column_name(int col) {
  std::string out;
  for (int c = col + 1; c > 0; c = (c - 1) / 26) out.insert(out.begin(), static_cast<char>('A' + (c - 1) % 26));
  return out;
}

std::string cell_name(const CellRef& ref) {
  return ref.sheet + "!" + column_name(ref.col) + std::to_string(ref.row + 1);
}

namespace {

std::pair<int, int> parse_cell(std::string_view text, std::string_view whole) {
  auto fail = [&] { return Error(ErrorKind::kInvalidArgument, "bad cell range '" + std::string(whole) + "'"); };
  std::size_t i = 0;
  int col = 0;
  while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) {
    col = col * 26 + (std::toupper(static_cast<unsigned char>(text[i])) - 'A' + 1);
    if (col > 1'000'000) throw fail();
    ++i;
  }
  if (i == 0 || i == text.size()) throw fail();
  int row = 0;
  for (; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) throw fail();
    row = row * 10 + (text[i] - '0');
    if (row > 10'000'000) throw fail();
  }
  if (row == 0) throw fail();
  return {row - 1, col - 1};
}

}  // namespace

CellRange parse_range(std::string_view text, std::string_view default_sheet) {
  CellRange range;
  std::string_view cells = text;
  if (std::size_t bang = text.rfind('!'); bang != std::string_view::npos) {
    range.sheet = std::string(text.substr(0, bang));
    cells = text.substr(bang + 1);
  } else {
    range.sheet = std::string(default_sheet);
  }
  std::size_t colon = cells.find(':');
  auto [r0, c0] = parse_cell(cells.substr(0, colon), text);
  auto [r1, c1] = colon == std::string_view::npos ? std::pair{r0, c0} : parse_cell(cells.substr(colon + 1), text);
  range.row_first = std::min(r0, r1);
  range.row_last = std::max(r0, r1);
  range.col_first = std::min(c0, c1);
  range.col_last = std::max(c0, c1);
  return range;
}

std::string format_range(const CellRange& r) {
  std::string out = r.sheet + "!" + column_name(r.col_first) + std::to_string(r.row_first + 1);
  if (r.row_first != r.row_last || r.col_first != r.col_last) {
    out += ":" + column_name(r.col_last) + std::to_string(r.row_last + 1);
  }
  return out;
}

Grid grid_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("sheets") || !j.at("sheets").is_object()) {
    throw Error(ErrorKind::kUnreadableArtifact, "grid must be an object with a \"sheets\" object");
  }
  Grid grid;
  for (const auto& [sheet, rows] : j.at("sheets").items()) {
    if (!rows.is_array()) throw Error(ErrorKind::kUnreadableArtifact, "sheet '" + sheet + "' must be an array of rows");
    auto& out_rows = grid[sheet];
    for (const auto& row : rows) {
      if (!row.is_array()) throw Error(ErrorKind::kUnreadableArtifact, "rows of '" + sheet + "' must be arrays");
      std::vector<Scalar> cells;
      for (const auto& cell : row) cells.push_back(scalar_from_json(cell));
      out_rows.push_back(std::move(cells));
    }
  }
  return grid;
}

nlohmann::json grid_to_json(const Grid& grid) {
  nlohmann::json sheets = nlohmann::json::object();
  for (const auto& [sheet, rows] : grid) {
    nlohmann::json out_rows = nlohmann::json::array();
    for (const auto& row : rows) {
      nlohmann::json cells = nlohmann::json::array();
      for (const Scalar& s : row) cells.push_back(scalar_to_json(s));
      out_rows.push_back(std::move(cells));
    }
    sheets[sheet] = std::move(out_rows);
  }
  return {{"sheets", std::move(sheets)}};
}

Scalar grid_at(const Grid& grid, const CellRef& ref) {
  auto it = grid.find(ref.sheet);
  if (it == grid.end() || ref.row < 0 || static_cast<std::size_t>(ref.row) >= it->second.size()) return {};
  const auto& row = it->second[static_cast<std::size_t>(ref.row)];
  if (ref.col < 0 || static_cast<std::size_t>(ref.col) >= row.size()) return {};
  return row[static_cast<std::size_t>(ref.col)];
}

std::string GridEnvironment::present(const Task& task) const {
  std::ostringstream out;
  out << "Task id: " << task.id << "\n\n" << task.instruction << "\n\nInput files in the workspace:\n";
  for (const auto& [path, bytes] : task.input_files) out << "- " << path << "\n";
  out << "\nWrite the result to " << kOutputFile
      << " as a JSON object {\"sheets\": {\"<sheet name>\": [[cell, ...], ...]}}. Cells are JSON scalars; rows and "
         "columns start at A1.\nAnswer cells:";
  for (const CellRange& r : task.golden.answer_ranges) out << " " << format_range(r);
  out << "\n";
  return out.str();
}

void GridEnvironment::prepare_workspace(const Task& task, const fs::path& workspace) const {
  try {
    std::error_code ec;
    fs::remove_all(workspace, ec);
    fs::create_directories(workspace);
    for (const auto& [path, bytes] : task.input_files) write_text(workspace / path, bytes);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kWorkspaceSetupFailure, task.id + ": " + e.what());
  }
}

Outcome GridEnvironment::compare(const Task& task, const Grid& output) {
  std::vector<std::string> mismatches;
  std::size_t total = 0;
  for (const auto& [ref, expected] : task.golden.golden_grid) {
    Scalar actual = grid_at(output, ref);
    if (scalar_equal(expected, actual)) continue;
    ++total;
    if (mismatches.size() < kMaxReportedMismatches) {
      mismatches.push_back(cell_name(ref) + ": expected " + scalar_repr(expected) + ", got " + scalar_repr(actual));
    }
  }
  if (total == 0) return {true, ""};
  std::string feedback = std::to_string(total) + " answer cell(s) differ from the reference:\n";
  for (const std::string& m : mismatches) feedback += "- " + m + "\n";
  if (total > mismatches.size()) feedback += "- ... and " + std::to_string(total - mismatches.size()) + " more\n";
  return {false, feedback};
}

Outcome GridEnvironment::evaluate(const Task& task, const fs::path& workspace) const {
  const fs::path output = workspace / kOutputFile;
  if (!fs::is_regular_file(output)) throw Error(ErrorKind::kMissingOutputArtifact, task.id + ": no " + std::string(kOutputFile));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(output));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kUnreadableArtifact, task.id + ": " + e.what());
  }
  return compare(task, grid_from_json(j));
}

Task load_task(const fs::path& dir) {
  nlohmann::json meta = read_json(dir / "task.json");
  Task task;
  try {
    task.id = meta.at("id").get<std::string>();
    task.instruction = meta.at("instruction").get<std::string>();
    task.tags = meta.value("tags", std::vector<std::string>{});
    for (const auto& r : meta.at("answer_ranges")) task.golden.answer_ranges.push_back(parse_range(r.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, dir.string() + "/task.json: " + e.what());
  }
  if (task.golden.answer_ranges.empty()) throw Error(ErrorKind::kInvalidArgument, task.id + ": no answer ranges");
  const fs::path inputs = dir / "inputs";
  if (fs::is_directory(inputs)) {
    for (const auto& entry : fs::recursive_directory_iterator(inputs)) {
      if (!entry.is_regular_file()) continue;
      task.input_files["inputs/" + fs::relative(entry.path(), inputs).generic_string()] = read_text(entry.path());
    }
  }
  Grid golden = grid_from_json(read_json(dir / "golden" / "output.json"));
  for (const CellRange& r : task.golden.answer_ranges) {
    for (int row = r.row_first; row <= r.row_last; ++row) {
      for (int col = r.col_first; col <= r.col_last; ++col) {
        CellRef ref{r.sheet, row, col};
        task.golden.golden_grid[ref] = grid_at(golden, ref);
      }
    }
  }
  return task;
}

void save_task(const Task& task, const Grid& golden, const fs::path& dir) {
  nlohmann::json ranges = nlohmann::json::array();
  for (const CellRange& r : task.golden.answer_ranges) ranges.push_back(format_range(r));
  write_json(dir / "task.json",
             {{"id", task.id}, {"instruction", task.instruction}, {"answer_ranges", ranges}, {"tags", task.tags}});
  for (const auto& [path, bytes] : task.input_files) {
    std::string rel = path.rfind("inputs/", 0) == 0 ? path.substr(7) : path;
    write_text(dir / "inputs" / rel, bytes);
  }
  write_json(dir / "golden" / "output.json", grid_to_json(golden));
}

std::vector<Task> load_task_pool(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::kIoFailure, "task pool " + dir.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / "task.json")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<Task> pool;
  std::set<std::string> ids;
  for (const fs::path& d : dirs) {
    pool.push_back(load_task(d));
    if (!ids.insert(pool.back().id).second) throw Error(ErrorKind::kInvalidArgument, "duplicate task id " + pool.back().id);
  }
  return pool;
}

nlohmann::json SplitSpec::to_json() const {
  return {{"train_pool", train_pool}, {"validation", validation}, {"test", test}, {"unused", unused},
          {"shuffle_seed", shuffle_seed}};
}

SplitSpec SplitSpec::from_json(const nlohmann::json& j) {
  SplitSpec s;
  s.train_pool = j.at("train_pool").get<std::vector<std::string>>();
  s.validation = j.at("validation").get<std::vector<std::string>>();
  s.test = j.at("test").get<std::vector<std::string>>();
  s.unused = j.at("unused").get<std::vector<std::string>>();
  s.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
  return s;
}

SplitSpec make_split(const std::vector<Task>& pool, SplitSizes sizes, std::uint64_t seed) {
  if (pool.size() < sizes.train + sizes.validation + sizes.test) {
    throw Error(ErrorKind::kPoolTooSmall, "pool of " + std::to_string(pool.size()) + " cannot hold " +
                                              std::to_string(sizes.train + sizes.validation + sizes.test));
  }
  SplitSpec split;
  split.shuffle_seed = seed;
  for (std::size_t i = 0; i < sizes.train; ++i) split.train_pool.push_back(pool[i].id);
  std::vector<std::string> held_out;
  for (std::size_t i = sizes.train; i < pool.size(); ++i) held_out.push_back(pool[i].id);
  Rng rng(seed);
  rng.shuffle(held_out);
  auto take = [&, pos = std::size_t{0}](std::size_t n) mutable {
    std::vector<std::string> out(held_out.begin() + static_cast<std::ptrdiff_t>(pos),
                                 held_out.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return out;
  };
  split.validation = take(sizes.validation);
  split.test = take(sizes.test);
  split.unused = take(held_out.size() - sizes.validation - sizes.test);
  return split;
}

std::vector<Task> sample_training_set(const std::vector<Task>& failures, std::size_t n, std::uint64_t seed) {
  if (n > failures.size()) {
    throw Error(ErrorKind::kNotEnoughFailures,
                "need " + std::to_string(n) + " training tasks, failure pool has " + std::to_string(failures.size()));
  }
  std::vector<Task> shuffled = failures;
  Rng rng(seed);
  rng.shuffle(shuffled);
  shuffled.resize(n);
  return shuffled;
}

std::vector<Task> select_tasks(const std::vector<Task>& pool, const std::vector<std::string>& ids) {
  std::vector<Task> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    auto it = std::find_if(pool.begin(), pool.end(), [&](const Task& t) { return t.id == id; });
    if (it == pool.end()) throw Error(ErrorKind::kInvalidArgument, "unknown task id " + id);
    out.push_back(*it);
  }
  return out;
}

}  // namespace skilltune
