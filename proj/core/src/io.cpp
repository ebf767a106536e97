#include "gridplan/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridplan/errors.hpp"

namespace gridplan::io {

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_bytes_hex(const std::string& bytes) {
  std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string hash_file_hex(const std::string& path) {
  return hash_bytes_hex(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
  if (!out) throw ValidationError("write failed: " + path);
}

std::string format_double(double v) {
  return nlohmann::json(v).dump();
}

void Manifest::record_input(const std::string& path) {
  inputs[path] = hash_file_hex(path);
}

std::string Manifest::to_json_string() const {
  nlohmann::json j;
  j["inputs"] = inputs;
  j["params"] = params;
  return j.dump();
}

Manifest Manifest::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Manifest m;
  m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  m.params = j.at("params").get<std::map<std::string, std::string>>();
  return m;
}

void Manifest::verify_inputs_unchanged() const {
  for (const auto& [path, hash] : inputs) {
    if (!std::filesystem::exists(path)) continue;
    std::string now = hash_file_hex(path);
    if (now != hash) {
      throw ManifestError("stale upstream artifact: " + path + " changed since it was recorded (" +
                          hash + " -> " + now + ")");
    }
  }
}

void Manifest::require_consistent(const Manifest& a, const Manifest& b) {
  for (const auto& [path, hash] : a.inputs) {
    auto it = b.inputs.find(path);
    if (it != b.inputs.end() && it->second != hash) {
      throw ManifestError("manifests disagree on input " + path + ": " + hash + " vs " + it->second);
    }
  }
}

} // namespace gridplan::io
