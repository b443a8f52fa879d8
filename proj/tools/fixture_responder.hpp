#pragma once

#include <string>
#include <vector>

#include "sif/llm.hpp"

namespace sif::tools {

/// Deterministic stand-in for a model, used only to author the bundled
/// transcripts. Answers every prompt family from a small security lexicon.
class FixtureResponder : public llm::LlmClient {
 public:
  /// A CLIPS request whose artifact list contains `marker` gets a truncated
  /// program back.
  void break_clips_on(std::string marker) { break_marker_ = std::move(marker); }

 private:
  std::string do_complete(const std::string& prompt, const llm::DecodingConfig& decoding) override;

  std::string entities(const std::string& statement) const;
  std::string hyponyms(const std::string& entity) const;
  std::string hypernyms(const std::string& entity) const;
  std::string classify(const std::string& prompt) const;
  std::string clips(const std::string& prompt) const;

  std::string break_marker_;
};

}  // namespace sif::tools
