#ifndef GRIDPLAN_IO_HPP
#define GRIDPLAN_IO_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gridplan::io {

/// FNV-1a 64-bit over raw bytes, hex-encoded. Used for artifact staleness checks.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string hash_bytes_hex(const std::string& bytes);
std::string hash_file_hex(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Shortest round-trip decimal representation (same formatting JSON output uses),
/// so CSV and JSON artifacts are byte-reproducible.
std::string format_double(double v);

/// Inputs a pipeline stage consumed, with content hashes recorded at read time,
/// plus the stage parameters. Embedded in every stage artifact.
struct Manifest {
  std::map<std::string, std::string> inputs; // path given on the command line -> hash
  std::map<std::string, std::string> params; // parameter name -> printed value

  void record_input(const std::string& path); // hashes the file now

  std::string to_json_string() const;
  static Manifest from_json_string(const std::string& text);

  /// Re-hash every recorded input that still exists on disk; throw ManifestError
  /// on any mismatch (the artifact is stale). Missing files are skipped.
  void verify_inputs_unchanged() const;

  /// Throw ManifestError unless both manifests record the same hash for every
  /// key they share (e.g. two plan runs must reference the same scenario file).
  static void require_consistent(const Manifest& a, const Manifest& b);
};

} // namespace gridplan::io

#endif
