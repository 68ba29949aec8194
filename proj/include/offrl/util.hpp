#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace offrl {

std::string read_file(const std::string& path);  // throws DataError
void write_file(const std::string& path, const std::string& content);
void ensure_dir(const std::string& path);
bool file_exists(const std::string& path);
std::string join_path(const std::string& a, const std::string& b);

// Shortest round-trip decimal formatting ('%.17g' pass shortened); stable
// across runs, used everywhere doubles land in text output.
std::string fmt_double(double v);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

// NO_COLOR / OFFRL_COLOR=0|1 / tty detection, in that order of priority.
bool color_enabled();

std::string sha1_hex(const void* data, size_t n);
// Hash of "blob <len>\0<content>", hex; matches git's object id for a blob.
std::string git_blob_hash(const std::string& content);
std::string git_blob_hash_file(const std::string& path);

}  // namespace offrl
