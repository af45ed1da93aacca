#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bct::io {

// All file traffic in the library goes through these helpers so that a run can be
// audited: which pipeline stage touched which file, and in which mode.
struct AccessRecord {
  std::string stage;  // "" outside any stage
  std::string path;
  char mode;  // 'r' or 'w'
};

void set_stage(const std::string& stage);
std::string current_stage();
void clear_access_log();
std::vector<AccessRecord> access_log();

std::string read_file(const std::string& path);                      // logs 'r'
void write_file(const std::string& path, const std::string& bytes);  // logs 'w'
void write_file(const std::string& path, const void* data, size_t n);
bool file_exists(const std::string& path);

// FNV-1a 64-bit over the raw bytes, as a 16-char lowercase hex string.
std::string hash_bytes(const void* data, size_t n);
std::string hash_bytes(const std::string& bytes);
std::string file_hash(const std::string& path);  // logs 'r'

}  // namespace bct::io
