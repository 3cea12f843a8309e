#include "dagmath/corpus.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <iterator>
#include <sstream>

#include "dagmath/error.hpp"
#include "dagmath/ingestion.hpp"

namespace dagmath {
namespace {

using nlohmann::json;

std::string hex(const unsigned char* data, unsigned len) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 0xF]);
  }
  return out;
}

std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw Error(ErrorCode::kMalformedStructure, "identifier must be a string or integer");
}

// An incomplete line fails with "unexpected end of input"; anything else is
// real garbage.
bool is_torn(const json::parse_error& e) {
  return std::string_view(e.what()).find("unexpected end of input") != std::string_view::npos;
}

void derive_parse(CorpusRecord& r, const json& j) {
  if (r.status == RecordStatus::kFailed) return;
  const TrajectoryMeta meta = r.meta();
  try {
    if (r.payload) {
      auto obj = extract_json_object(*r.payload, "steps");
      if (!obj) {
        r.parse_error = "malformed-structure: no JSON object with a \"steps\" field";
        return;
      }
      r.parsed = parse_trajectory_json(*obj, meta);
      r.parsed->raw_text = r.payload;
    } else if (j.contains("steps")) {
      r.parsed = parse_trajectory_json(j, meta);
    } else {
      r.parse_error = "missing-field: record has neither \"payload\" nor \"steps\"";
      return;
    }
  } catch (const Error& e) {
    r.parse_error = e.what();
    return;
  }
  r.diagnostics = validate_format(*r.parsed);
}

}  // namespace

json diagnostic_to_json(const FormatDiagnostic& d) {
  return json{{"rule", std::string(rule_code_id(d.rule_code))},
              {"name", std::string(rule_code_name(d.rule_code))},
              {"step_id", d.step_id ? json(*d.step_id) : json(nullptr)},
              {"severity", std::string(severity_name(d.severity))},
              {"message", d.message}};
}

json record_to_json(const CorpusRecord& r) {
  json j{{"problem_id", r.problem_id},
         {"model_id", r.model_id},
         {"sample_index", r.sample_index},
         {"status", r.status == RecordStatus::kOk ? "ok" : "failed"},
         {"attempts", r.attempts},
         {"requested_at", r.requested_at},
         {"completed_at", r.completed_at},
         {"fingerprint", r.fingerprint}};
  j["ground_truth"] = r.ground_truth ? json(*r.ground_truth) : json(nullptr);
  j["difficulty"] = r.difficulty ? json(*r.difficulty) : json(nullptr);
  if (r.payload) j["payload"] = *r.payload;
  if (!r.error.empty()) j["error"] = r.error;
  json diags = json::array();
  for (const auto& d : r.diagnostics) diags.push_back(diagnostic_to_json(d));
  j["diagnostics"] = std::move(diags);
  return j;
}

CorpusRecord record_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kMalformedStructure, "corpus record must be an object");
  CorpusRecord r;
  try {
    if (j.contains("problem_id")) r.problem_id = id_string(j["problem_id"]);
    if (j.contains("model_id") && !j["model_id"].is_null()) r.model_id = id_string(j["model_id"]);
    r.sample_index = j.value("sample_index", std::int64_t{0});
    if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
      const auto& g = j["ground_truth"];
      r.ground_truth = g.is_string() ? g.get<std::string>() : g.dump();
    }
    if (j.contains("difficulty") && j["difficulty"].is_number()) r.difficulty = j["difficulty"].get<double>();
    r.requested_at = j.value("requested_at", std::string());
    r.completed_at = j.value("completed_at", std::string());
    r.fingerprint = j.value("fingerprint", std::string());
    r.status = j.value("status", std::string("ok")) == "failed" ? RecordStatus::kFailed : RecordStatus::kOk;
    r.error = j.value("error", std::string());
    r.attempts = j.value("attempts", 0);
    if (j.contains("payload") && j["payload"].is_string()) r.payload = j["payload"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedStructure, e.what());
  }
  derive_parse(r, j);
  return r;
}

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path, CorpusReadStats* stats) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kUnreadableCorpus, e.what());
  }
  CorpusReadStats local;
  CorpusReadStats& st = stats ? *stats : local;
  st = {};
  std::vector<CorpusRecord> out;

  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    json all;
    try {
      all = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kUnreadableCorpus, path.string() + ": " + e.what());
    }
    for (const auto& item : all) {
      ++st.lines;
      try {
        out.push_back(record_from_json(item));
      } catch (const Error& e) {
        throw Error(ErrorCode::kUnreadableCorpus, path.string() + ": " + e.what());
      }
    }
    return out;
  }
  // A pretty-printed single object spans lines; accept it whole.
  if (first != std::string::npos && text[first] == '{' && json::accept(text)) {
    const json one = json::parse(text);
    st.lines = 1;
    try {
      out.push_back(record_from_json(one));
    } catch (const Error& e) {
      throw Error(ErrorCode::kUnreadableCorpus, path.string() + ": " + e.what());
    }
    return out;
  }

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    ++st.lines;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      ++st.blank;
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      if (is_torn(e)) {
        ++st.torn;
        continue;
      }
      throw Error(ErrorCode::kUnreadableCorpus,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      out.push_back(record_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorCode::kUnreadableCorpus,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

CorpusWriter::CorpusWriter(const std::filesystem::path& path) {
  bool needs_newline = false;
  {
    std::ifstream probe(path, std::ios::binary);
    if (probe) {
      probe.seekg(0, std::ios::end);
      if (probe.tellg() > 0) {
        probe.seekg(-1, std::ios::end);
        needs_newline = probe.get() != '\n';
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for appending");
  if (needs_newline) out_ << '\n' << std::flush;
}

void CorpusWriter::append(const CorpusRecord& r) { append_json(record_to_json(r)); }

void CorpusWriter::append_json(const json& j) {
  std::string line = j.dump();
  line.push_back('\n');
  std::lock_guard lock(mu_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw Error(ErrorCode::kIoError, "corpus write failed");
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIoError, "SHA-256 failed");
  }
  return hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
}

}  // namespace dagmath
