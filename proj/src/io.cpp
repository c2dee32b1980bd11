#include "dpls/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dpls/error.hpp"

namespace dpls {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Items of "[a, b, c]"; "[]" is empty.
std::vector<std::string_view> array_items(std::string_view value, const std::string& key) {
  value = trim(value);
  if (value.size() < 2 || value.front() != '[' || value.back() != ']') {
    throw DataError("key '" + key + "': expected an array like [1, 2], got '" +
                    std::string(value) + "'");
  }
  const std::string_view inner = trim(value.substr(1, value.size() - 2));
  std::vector<std::string_view> items;
  if (inner.empty()) return items;
  for (std::string_view item : split(inner, ',')) items.push_back(trim(item));
  return items;
}

template <typename Range>
std::string join_numbers(const Range& values) {
  std::string out = "[";
  bool first = true;
  for (double v : values) {
    if (!first) out += ", ";
    out += format_double(v);
    first = false;
  }
  return out + "]";
}

}  // namespace

std::string format_double(double value) {
  if (!std::isfinite(value)) {
    if (std::isnan(value)) return "nan";
    return value > 0 ? "inf" : "-inf";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view what) {
  const std::string_view t = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(value)) {
    throw DataError(std::string(what) + ": '" + std::string(t) + "' is not a finite number");
  }
  return value;
}

long long parse_integer(std::string_view text, std::string_view what) {
  const std::string_view t = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw DataError(std::string(what) + ": '" + std::string(t) + "' is not an integer");
  }
  return value;
}

KvDocument KvDocument::parse(std::string_view text, std::string_view source) {
  KvDocument doc;
  doc.source_ = std::string(source);
  int line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw DataError(doc.source_ + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(t.substr(0, eq)));
    if (key.empty()) {
      throw DataError(doc.source_ + ":" + std::to_string(line_no) + ": empty key");
    }
    if (doc.index_.count(key) != 0) {
      throw DataError(doc.source_ + ":" + std::to_string(line_no) + ": duplicate key '" + key +
                      "'");
    }
    doc.set(key, std::string(trim(t.substr(eq + 1))));
    doc.lines_[key] = line_no;
  }
  return doc;
}

KvDocument KvDocument::load(const std::filesystem::path& path) {
  return parse(read_text(path), path.string());
}

void KvDocument::save(const std::filesystem::path& path) const { write_text(path, to_string()); }

std::string KvDocument::to_string() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + " = " + value + "\n";
  return out;
}

bool KvDocument::contains(const std::string& key) const { return index_.count(key) != 0; }

std::vector<std::string> KvDocument::keys() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& entry : entries_) out.push_back(entry.first);
  return out;
}

void KvDocument::set(const std::string& key, std::string value) {
  const auto it = index_.find(key);
  if (it != index_.end()) {
    entries_[it->second].second = std::move(value);
    return;
  }
  index_[key] = entries_.size();
  entries_.emplace_back(key, std::move(value));
}

void KvDocument::set(const std::string& key, double value) { set(key, format_double(value)); }
void KvDocument::set(const std::string& key, long long value) { set(key, std::to_string(value)); }
void KvDocument::set(const std::string& key, bool value) {
  set(key, std::string(value ? "true" : "false"));
}
void KvDocument::set(const std::string& key, const Vector& values) {
  set(key, join_numbers(values));
}
void KvDocument::set(const std::string& key, const std::vector<double>& values) {
  set(key, join_numbers(values));
}
void KvDocument::set(const std::string& key, const std::vector<int>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(values[i]);
  }
  set(key, out + "]");
}

void KvDocument::set_matrix(const std::string& key, const Matrix& m) {
  set(key + ".rows", static_cast<long long>(m.rows()));
  set(key + ".cols", static_cast<long long>(m.cols()));
  set(key + ".data", join_numbers(m.reshaped<Eigen::RowMajor>()));
}

const std::string& KvDocument::raw(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) throw DataError(source_ + ": missing key '" + key + "'");
  read_[key] = true;
  return entries_[it->second].second;
}

const std::string& KvDocument::get_string(const std::string& key) const { return raw(key); }

double KvDocument::get_double(const std::string& key) const {
  return parse_double(raw(key), source_ + ": key '" + key + "'");
}

long long KvDocument::get_integer(const std::string& key) const {
  return parse_integer(raw(key), source_ + ": key '" + key + "'");
}

bool KvDocument::get_bool(const std::string& key) const {
  const std::string& v = raw(key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw DataError(source_ + ": key '" + key + "': expected true or false, got '" + v + "'");
}

Vector KvDocument::get_vector(const std::string& key) const {
  const auto items = array_items(raw(key), key);
  Vector out(static_cast<Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    out(static_cast<Index>(i)) = parse_double(items[i], source_ + ": key '" + key + "'");
  }
  return out;
}

std::vector<std::string> KvDocument::get_list(const std::string& key) const {
  std::string_view value = trim(raw(key));
  if (!value.empty() && value.front() == '[') {
    std::vector<std::string> out;
    for (std::string_view item : array_items(value, key)) out.emplace_back(item);
    return out;
  }
  std::vector<std::string> out;
  for (std::string_view item : split(value, ',')) {
    const std::string_view t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

Matrix KvDocument::get_matrix(const std::string& key) const {
  const long long rows = get_integer(key + ".rows");
  const long long cols = get_integer(key + ".cols");
  const Vector data = get_vector(key + ".data");
  if (rows < 0 || cols < 0 || data.size() != rows * cols) {
    throw DataError(source_ + ": matrix '" + key + "' has " + std::to_string(data.size()) +
                    " entries, expected " + std::to_string(rows) + " x " + std::to_string(cols));
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = data(i * cols + j);
  }
  return m;
}

std::string KvDocument::get_string(const std::string& key, const std::string& fallback) const {
  return contains(key) ? get_string(key) : fallback;
}
double KvDocument::get_double(const std::string& key, double fallback) const {
  return contains(key) ? get_double(key) : fallback;
}
long long KvDocument::get_integer(const std::string& key, long long fallback) const {
  return contains(key) ? get_integer(key) : fallback;
}
bool KvDocument::get_bool(const std::string& key, bool fallback) const {
  return contains(key) ? get_bool(key) : fallback;
}

std::vector<std::string> KvDocument::unread_keys() const {
  std::vector<std::string> out;
  for (const auto& entry : entries_) {
    if (read_.count(entry.first) == 0) out.push_back(entry.first);
  }
  return out;
}

Dataset parse_csv(std::string_view text, std::string_view source) {
  const std::string src(source);
  std::vector<std::string_view> lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw DataError(src + ": empty file");

  const auto header = split(lines[0], ',');
  Index y_col = -1;
  Index p_col = -1;
  std::vector<Index> z_cols, x_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string_view name = trim(header[c]);
    const auto col = static_cast<Index>(c);
    if (name == "y") {
      if (y_col >= 0) throw DataError(src + ":1: duplicate column 'y'");
      y_col = col;
    } else if (name == "p") {
      if (p_col >= 0) throw DataError(src + ":1: duplicate column 'p'");
      p_col = col;
    } else if (name.substr(0, 2) == "z_") {
      z_cols.push_back(col);
    } else if (name.substr(0, 2) == "x_") {
      x_cols.push_back(col);
    } else {
      throw DataError(src + ":1: column " + std::to_string(c + 1) + " '" + std::string(name) +
                      "' has no role (expected y, p, z_* or x_*)");
    }
  }
  if (y_col < 0) throw DataError(src + ":1: missing column 'y'");
  if (p_col < 0) throw DataError(src + ":1: missing column 'p'");
  if (z_cols.empty()) throw DataError(src + ":1: no instrument columns (z_*)");

  const auto n = static_cast<Index>(lines.size() - 1);
  Vector y(n), p(n);
  Matrix z(n, static_cast<Index>(z_cols.size()));
  Matrix x(n, static_cast<Index>(x_cols.size()));
  Matrix row_values(1, static_cast<Index>(header.size()));
  for (Index i = 0; i < n; ++i) {
    const std::size_t line_no = static_cast<std::size_t>(i) + 2;
    const auto cells = split(lines[static_cast<std::size_t>(i) + 1], ',');
    if (cells.size() != header.size()) {
      throw DataError(src + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      row_values(0, static_cast<Index>(c)) = parse_double(
          cells[c], src + ":" + std::to_string(line_no) + ": column " + std::to_string(c + 1) +
                        " '" + std::string(trim(header[c])) + "'");
    }
    y(i) = row_values(0, y_col);
    p(i) = row_values(0, p_col);
    for (std::size_t j = 0; j < z_cols.size(); ++j) z(i, static_cast<Index>(j)) = row_values(0, z_cols[j]);
    for (std::size_t j = 0; j < x_cols.size(); ++j) x(i, static_cast<Index>(j)) = row_values(0, x_cols[j]);
  }
  return Dataset(std::move(y), std::move(p), std::move(z), std::move(x));
}

Dataset read_csv(const std::filesystem::path& path) {
  return parse_csv(read_text(path), path.string());
}

std::string format_csv(const Dataset& ds) {
  std::string out = "y,p";
  for (Index j = 0; j < ds.m(); ++j) out += ",z_" + std::to_string(j + 1);
  for (Index j = 0; j < ds.k(); ++j) out += ",x_" + std::to_string(j + 1);
  out += '\n';
  for (Index i = 0; i < ds.n(); ++i) {
    out += format_double(ds.y()(i));
    out += ',';
    out += format_double(ds.p()(i));
    for (Index j = 0; j < ds.m(); ++j) {
      out += ',';
      out += format_double(ds.z()(i, j));
    }
    for (Index j = 0; j < ds.k(); ++j) {
      out += ',';
      out += format_double(ds.x()(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  write_text(path, format_csv(ds));
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dpls
