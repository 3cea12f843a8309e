#pragma once

// Line-delimited corpora: one JSON record per line, append-only.
//
// A line either carries a raw completion ("payload") or an already structured
// trajectory ("steps"); both may sit in one file.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dagmath/format.hpp"

namespace dagmath {

enum class RecordStatus { kOk, kFailed };

struct CorpusRecord {
  std::string problem_id;
  std::string model_id;
  std::int64_t sample_index = 0;
  std::optional<std::string> ground_truth;
  std::optional<double> difficulty;
  std::string requested_at;
  std::string completed_at;
  std::string fingerprint;
  RecordStatus status = RecordStatus::kOk;
  std::string error;  // failed records: error code name and message
  int attempts = 0;
  std::optional<std::string> payload;
  // Derived on load; never written back.
  std::optional<Trajectory> parsed;
  std::string parse_error;
  std::vector<FormatDiagnostic> diagnostics;

  TrajectoryMeta meta() const { return {problem_id, model_id, sample_index}; }
};

nlohmann::json record_to_json(const CorpusRecord& r);
// Fills `parsed`, `parse_error` and `diagnostics`. Throws kMalformedStructure
// when the envelope itself is unusable.
CorpusRecord record_from_json(const nlohmann::json& j);

nlohmann::json diagnostic_to_json(const FormatDiagnostic& d);

struct CorpusReadStats {
  std::size_t lines = 0;
  std::size_t blank = 0;
  // Lines holding incomplete JSON (a writer died mid-line); ignored.
  std::size_t torn = 0;
};

// Accepts JSONL, a JSON array of records, or one bare trajectory object.
// Torn lines are skipped; any other unparseable line throws
// kUnreadableCorpus, as does an unreadable file.
std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path, CorpusReadStats* stats = nullptr);

// Serialized appends from any thread. Starts a fresh line if the file ends
// mid-line (a crashed writer), so earlier torn lines never swallow new data.
class CorpusWriter {
 public:
  explicit CorpusWriter(const std::filesystem::path& path);  // throws kIoError
  void append(const CorpusRecord& r);
  void append_json(const nlohmann::json& j);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

std::string sha256_hex(std::string_view bytes);
// Throws kIoError.
std::string sha256_file(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace dagmath
