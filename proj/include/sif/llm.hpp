#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sif::llm {

/// Greedy decoding with a fixed seed. A temperature may only be set when
/// sampling (greedy == false).
struct DecodingConfig {
  std::uint64_t seed = 0;
  bool greedy = true;
  int max_tokens = 512;
  std::optional<double> temperature;

  /// Throws InvalidDecoding.
  void validate() const;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;

  /// Validates `decoding` and forwards to the backend.
  std::string complete(const std::string& prompt, const DecodingConfig& decoding);

 private:
  virtual std::string do_complete(const std::string& prompt, const DecodingConfig& decoding) = 0;
};

/// FNV-1a 64 over the prompt bytes, 16 lowercase hex digits.
std::string prompt_hash(std::string_view prompt);

struct TranscriptEntry {
  std::string prompt_hash;
  std::string completion;
  std::optional<std::string> prompt;  // kept for auditing, never matched on
};

/// Replays completions keyed by prompt hash. Unknown prompts throw
/// TranscriptMiss. Safe to share between threads once loaded.
class ScriptedMock : public LlmClient {
 public:
  ScriptedMock() = default;
  explicit ScriptedMock(std::vector<TranscriptEntry> entries);

  static ScriptedMock from_json(const nlohmann::json& j);
  static ScriptedMock load(const std::filesystem::path& path);

  void add(const std::string& prompt, std::string completion);
  std::size_t size() const { return by_hash_.size(); }

 private:
  std::string do_complete(const std::string& prompt, const DecodingConfig& decoding) override;

  std::map<std::string, std::string> by_hash_;
};

/// Passes calls through to another client and keeps a transcript of them.
class RecordingClient : public LlmClient {
 public:
  explicit RecordingClient(LlmClient& inner) : inner_(inner) {}

  const std::vector<TranscriptEntry>& entries() const { return entries_; }
  nlohmann::json transcript_json() const;

 private:
  std::string do_complete(const std::string& prompt, const DecodingConfig& decoding) override;

  LlmClient& inner_;
  std::vector<TranscriptEntry> entries_;
};

nlohmann::json transcript_to_json(const std::vector<TranscriptEntry>& entries);

/// OpenAI-compatible `/v1/completions` endpoint over plain HTTP.
class HttpClient : public LlmClient {
 public:
  /// `base_url` like "http://127.0.0.1:8000"; `api_key` may be empty.
  HttpClient(std::string base_url, std::string model, std::string api_key = {}, int timeout_seconds = 120);

 private:
  std::string do_complete(const std::string& prompt, const DecodingConfig& decoding) override;

  std::string base_url_;
  std::string model_;
  std::string api_key_;
  int timeout_seconds_;
};

}  // namespace sif::llm
