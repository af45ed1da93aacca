#include "bct/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>

namespace bct::io {

namespace {

std::mutex g_mu;
std::string g_stage;
std::vector<AccessRecord> g_log;

void log_access(const std::string& path, char mode) {
  std::lock_guard<std::mutex> lk(g_mu);
  g_log.push_back({g_stage, path, mode});
}

}  // namespace

void set_stage(const std::string& stage) {
  std::lock_guard<std::mutex> lk(g_mu);
  g_stage = stage;
}

std::string current_stage() {
  std::lock_guard<std::mutex> lk(g_mu);
  return g_stage;
}

void clear_access_log() {
  std::lock_guard<std::mutex> lk(g_mu);
  g_log.clear();
}

std::vector<AccessRecord> access_log() {
  std::lock_guard<std::mutex> lk(g_mu);
  return g_log;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  log_access(path, 'r');
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const void* data, size_t n) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(static_cast<const char*>(data), (std::streamsize)n);
  if (!out) throw std::runtime_error("write failed: " + path);
  log_access(path, 'w');
}

void write_file(const std::string& path, const std::string& bytes) {
  write_file(path, bytes.data(), bytes.size());
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

std::string hash_bytes(const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

std::string hash_bytes(const std::string& bytes) { return hash_bytes(bytes.data(), bytes.size()); }

std::string file_hash(const std::string& path) { return hash_bytes(read_file(path)); }

}  // namespace bct::io
