#pragma once

// Deterministic text output: every float printed with 17 significant digits,
// every file stamped with the tool version and a hash of the config that
// produced it.  No timestamps or wall-clock data may enter these files.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "folspec/errors.hpp"
#include "folspec/version.hpp"

namespace folspec {

// shortest representation that round-trips a double
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

inline std::string format_int(long long x) { return std::to_string(x); }

// FNV-1a 64-bit; stable across platforms, used for config and schedule ids
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= static_cast<std::uint64_t>(c);
    hash *= 1099511628211ull;
  }
  return hash;
}

inline std::string hex16(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf);
}

inline std::string hash_of_doubles(const std::vector<double>& values) {
  std::string joined;
  for (double v : values) {
    joined += format_double(v);
    joined += ',';
  }
  return hex16(fnv1a64(joined)).substr(0, 8);
}

struct CsvTable {
  std::vector<std::string> comments;  // emitted as leading '# ...' lines
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline std::string render_csv(const CsvTable& table) {
  std::string out;
  for (const std::string& c : table.comments) {
    out += "# ";
    out += c;
    out += '\n';
  }
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ',';
    out += table.columns[i];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw Error("csv row width " + std::to_string(row.size()) + " != header width " +
                  std::to_string(table.columns.size()));
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream stream(path, std::ios::binary);
  if (!stream) throw Error("cannot open " + path.string() + " for writing");
  stream.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!stream) throw Error("short write to " + path.string());
}

inline void write_csv_file(const std::filesystem::path& path, const CsvTable& table) {
  write_text_file(path, render_csv(table));
}

// nlohmann::json keeps keys sorted, so dump() is deterministic
inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

// stamp shared by every output file of one run
inline std::vector<std::string> file_stamp(const std::string& config_hash, std::uint64_t seed) {
  return {std::string("folspec ") + version_string + " config " + config_hash + " seed " +
          std::to_string(seed)};
}

inline nlohmann::json manifest_base(const std::string& command, const std::string& config_hash,
                                    std::uint64_t seed) {
  nlohmann::json doc;
  doc["tool"] = {{"name", "folspec"}, {"version", version_string}};
  doc["command"] = command;
  doc["config_hash"] = config_hash;
  doc["seed"] = seed;
  return doc;
}

}  // namespace folspec
