#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "goalkp/errors.hpp"

namespace goalkp {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes via a temp file in the same directory, then renames into place.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path() && !path.parent_path().empty())
    fs::create_directories(path.parent_path());
  static std::atomic<unsigned> counter{0};
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp."
           << std::random_device{}() << "." << counter++;
  fs::path tmp = path.has_parent_path() ? path.parent_path() / tmp_name.str()
                                        : fs::path(tmp_name.str());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open temp file for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to temp file: " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Calls fn(line_number, parsed_object) for every non-blank line. Accepts LF
// and CRLF. Parse failures report the 1-based line number.
template <typename Fn>
void for_each_jsonl_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed JSON line: " + e.what());
    }
    fn(line_no, obj);
  }
}

}  // namespace goalkp
