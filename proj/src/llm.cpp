#include "sif/llm.hpp"

#include <cstdio>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sif/error.hpp"

namespace sif::llm {

void DecodingConfig::validate() const {
  if (max_tokens <= 0) throw Error(ErrorCode::InvalidDecoding, "max_tokens must be positive");
  if (greedy && temperature) throw Error(ErrorCode::InvalidDecoding, "greedy decoding forbids a temperature");
  if (temperature && !(*temperature >= 0.0)) throw Error(ErrorCode::InvalidDecoding, "temperature must be >= 0");
}

std::string LlmClient::complete(const std::string& prompt, const DecodingConfig& decoding) {
  decoding.validate();
  return do_complete(prompt, decoding);
}

std::string prompt_hash(std::string_view prompt) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : prompt) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

ScriptedMock::ScriptedMock(std::vector<TranscriptEntry> entries) {
  for (auto& e : entries) by_hash_[e.prompt_hash] = std::move(e.completion);
}

ScriptedMock ScriptedMock::from_json(const nlohmann::json& j) {
  std::vector<TranscriptEntry> entries;
  try {
    for (const auto& e : j.at("entries")) {
      TranscriptEntry entry{e.at("prompt_hash").get<std::string>(), e.at("completion").get<std::string>(), {}};
      if (e.contains("prompt")) entry.prompt = e["prompt"].get<std::string>();
      entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedContainer, std::string("transcript: ") + e.what());
  }
  return ScriptedMock(std::move(entries));
}

ScriptedMock ScriptedMock::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read transcript " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedContainer, path.string() + ": " + e.what());
  }
  return from_json(j);
}

void ScriptedMock::add(const std::string& prompt, std::string completion) {
  by_hash_[prompt_hash(prompt)] = std::move(completion);
}

std::string ScriptedMock::do_complete(const std::string& prompt, const DecodingConfig&) {
  auto hash = prompt_hash(prompt);
  auto it = by_hash_.find(hash);
  if (it == by_hash_.end()) {
    auto head = prompt.substr(0, 80);
    throw Error(ErrorCode::TranscriptMiss, "no scripted completion for prompt " + hash + " (\"" + head + "...\")");
  }
  return it->second;
}

std::string RecordingClient::do_complete(const std::string& prompt, const DecodingConfig& decoding) {
  auto completion = inner_.complete(prompt, decoding);
  entries_.push_back({prompt_hash(prompt), completion, prompt});
  return completion;
}

nlohmann::json RecordingClient::transcript_json() const { return transcript_to_json(entries_); }

nlohmann::json transcript_to_json(const std::vector<TranscriptEntry>& entries) {
  auto out = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json item = {{"prompt_hash", e.prompt_hash}, {"completion", e.completion}};
    if (e.prompt) item["prompt"] = *e.prompt;
    out.push_back(std::move(item));
  }
  return {{"entries", out}};
}

HttpClient::HttpClient(std::string base_url, std::string model, std::string api_key, int timeout_seconds)
    : base_url_(std::move(base_url)), model_(std::move(model)), api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {
  if (base_url_.rfind("http://", 0) != 0) {
    throw Error(ErrorCode::ConfigError, "only http:// endpoints are supported: " + base_url_);
  }
}

std::string HttpClient::do_complete(const std::string& prompt, const DecodingConfig& decoding) {
  httplib::Client client(base_url_);
  client.set_read_timeout(timeout_seconds_, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  nlohmann::json body = {{"model", model_},
                         {"prompt", prompt},
                         {"max_tokens", decoding.max_tokens},
                         {"seed", decoding.seed},
                         {"temperature", decoding.greedy ? 0.0 : decoding.temperature.value_or(1.0)}};
  auto response = client.Post("/v1/completions", headers, body.dump(), "application/json");
  if (!response) throw Error(ErrorCode::BackendFailure, "request failed: " + httplib::to_string(response.error()));
  if (response->status != 200) {
    throw Error(ErrorCode::BackendFailure, "HTTP " + std::to_string(response->status) + ": " + response->body.substr(0, 200));
  }
  try {
    auto j = nlohmann::json::parse(response->body);
    return j.at("choices").at(0).at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BackendFailure, std::string("unexpected response: ") + e.what());
  }
}

}  // namespace sif::llm
