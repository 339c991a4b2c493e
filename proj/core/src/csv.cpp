#include "tdfdr/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tdfdr::csv {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t i = 0;; ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(trim(std::string_view(line).substr(start, i - start)));
      if (i == line.size()) break;
      start = i + 1;
    }
  }
  return fields;
}

[[noreturn]] void fail(const std::string& source, std::size_t line_no,
                       const std::string& what) {
  throw InputError(source + ":" + std::to_string(line_no) + ": " + what);
}

double parse_double(const std::string& field, const std::string& source,
                    std::size_t line_no) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    fail(source, line_no, "cannot parse number '" + field + "'");
  }
  return value;
}

std::size_t parse_index(const std::string& field, const std::string& source,
                        std::size_t line_no) {
  std::size_t value = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    fail(source, line_no, "cannot parse index '" + field + "'");
  }
  return value;
}

bool looks_numeric(const std::string& field) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc() && ptr == end;
}

std::ifstream open_or_fail(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open file '" + path.string() + "'");
  }
  return in;
}

} // namespace

std::string format(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_competition(const CompetitionResult& result, std::ostream& out) {
  out << "index,label,score\n";
  for (const auto& v : result.variables()) {
    out << v.index << ',' << to_char(v.label) << ',' << format(v.final_score)
        << '\n';
  }
}

void write_competition(const CompetitionResult& result,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file '" + path.string() + "'");
  write_competition(result, out);
}

CompetitionResult read_competition(std::istream& in,
                                   const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw InputError(source_name + ": empty file, expected header");
  }
  ++line_no;
  auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "index" || header[1] != "label" ||
      header[2] != "score") {
    fail(source_name, line_no, "expected header 'index,label,score'");
  }

  std::vector<ScoredVariable> variables;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 3) {
      fail(source_name, line_no,
           "expected 3 fields, got " + std::to_string(fields.size()));
    }
    ScoredVariable v;
    v.index = parse_index(fields[0], source_name, line_no);
    if (fields[1].size() != 1) {
      fail(source_name, line_no, "label must be T or D, got '" + fields[1] + "'");
    }
    try {
      v.label = label_from_char(fields[1][0]);
    } catch (const InputError& e) {
      fail(source_name, line_no, e.what());
    }
    v.final_score = parse_double(fields[2], source_name, line_no);
    variables.push_back(v);
  }
  return CompetitionResult(std::move(variables));
}

CompetitionResult read_competition(const std::filesystem::path& path) {
  auto in = open_or_fail(path);
  return read_competition(in, path.string());
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path,
                            std::vector<std::string>* column_names) {
  auto in = open_or_fail(path);
  const std::string source = path.string();

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw InputError(source + ": empty file, expected header row");
  }
  ++line_no;
  auto header = split_fields(line);
  if (header.empty()) fail(source, line_no, "empty header row");
  if (column_names) *column_names = header;
  const std::size_t n_cols = header.size();

  std::vector<double> values;
  std::size_t n_rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != n_cols) {
      fail(source, line_no,
           "expected " + std::to_string(n_cols) + " fields, got " +
               std::to_string(fields.size()));
    }
    for (const auto& f : fields) values.push_back(parse_double(f, source, line_no));
    ++n_rows;
  }
  if (n_rows == 0) throw InputError(source + ": no data rows");

  Eigen::MatrixXd m(static_cast<Eigen::Index>(n_rows),
                    static_cast<Eigen::Index>(n_cols));
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          values[r * n_cols + c];
    }
  }
  return m;
}

Eigen::VectorXd read_column(const std::filesystem::path& path) {
  auto in = open_or_fail(path);
  const std::string source = path.string();

  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string field = trim(line);
    if (field.empty()) continue;
    if (first && !looks_numeric(field)) {
      first = false; // header line
      continue;
    }
    first = false;
    values.push_back(parse_double(field, source, line_no));
  }
  if (values.empty()) throw InputError(source + ": no numeric values");
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

std::vector<bool> read_groups(const std::filesystem::path& path) {
  auto in = open_or_fail(path);
  const std::string source = path.string();

  std::vector<bool> is_case;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string field = trim(line);
    if (field.empty()) continue;
    if (field == "control") {
      is_case.push_back(false);
    } else if (field == "case") {
      is_case.push_back(true);
    } else if (first && field == "group") {
      // header line
    } else {
      fail(source, line_no,
           "group entry must be 'control' or 'case', got '" + field + "'");
    }
    first = false;
  }
  if (is_case.empty()) throw InputError(source + ": no group entries");
  return is_case;
}

} // namespace tdfdr::csv
