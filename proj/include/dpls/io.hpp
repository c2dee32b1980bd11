#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dpls/dataset.hpp"
#include "dpls/types.hpp"

namespace dpls {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

/// Parses a full decimal token; throws DataError (mentioning `what`) otherwise.
double parse_double(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);

/// Flat "key = value" text. Keys use dotted sections; arrays are written as
/// "[a, b, c]"; a matrix M under key K is stored as K.rows, K.cols and K.data
/// (row-major). '#' starts a comment line. Entries keep insertion order.
class KvDocument {
 public:
  static KvDocument parse(std::string_view text, std::string_view source = "<text>");
  static KvDocument load(const std::filesystem::path& path);

  void save(const std::filesystem::path& path) const;
  std::string to_string() const;

  bool contains(const std::string& key) const;
  std::vector<std::string> keys() const;

  void set(const std::string& key, std::string value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
  void set(const std::string& key, bool value);
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, const Vector& values);
  void set(const std::string& key, const std::vector<double>& values);
  void set(const std::string& key, const std::vector<int>& values);
  void set_matrix(const std::string& key, const Matrix& m);

  const std::string& get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_integer(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  Vector get_vector(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  Matrix get_matrix(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_integer(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Keys never read through a getter; used to reject misspelt config keys.
  std::vector<std::string> unread_keys() const;

 private:
  const std::string& raw(const std::string& key) const;

  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, int> lines_;
  std::string source_;
  mutable std::map<std::string, bool> read_;
};

/// Dataset CSV: header names roles by column: "y", "p", "z_*" and "x_*".
/// Columns of one role keep their file order.
Dataset read_csv(const std::filesystem::path& path);
Dataset parse_csv(std::string_view text, std::string_view source = "<csv>");
void write_csv(const std::filesystem::path& path, const Dataset& ds);
std::string format_csv(const Dataset& ds);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace dpls
