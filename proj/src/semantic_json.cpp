#include <nlohmann/json.hpp>

#include "sif/error.hpp"
#include "sif/semantic.hpp"

namespace sif::semantic {
namespace {

nlohmann::json ranked(const std::vector<LabelPrediction>& predictions) {
  auto out = nlohmann::json::array();
  for (const auto& p : predictions) out.push_back({{"label", p.label}, {"confidence", p.confidence}, {"rank", p.rank}});
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const DomainEntity& entity) {
  j = {{"surface", entity.surface}, {"start", entity.start}, {"end", entity.end}};
}

void from_json(const nlohmann::json& j, DomainEntity& entity) {
  try {
    entity.surface = j.at("surface").get<std::string>();
    entity.start = j.at("start").get<std::size_t>();
    entity.end = j.at("end").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedContainer, std::string("entity: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const SemanticConcept& concept_) {
  j = {{"entity", concept_.entity},
       {"hyponyms", concept_.hyponyms},
       {"hypernyms", concept_.hypernyms},
       {"confidence", concept_.confidence}};
}

void from_json(const nlohmann::json& j, SemanticConcept& concept_) {
  try {
    concept_.entity = j.at("entity").get<DomainEntity>();
    concept_.hyponyms = j.at("hyponyms").get<std::set<std::string>>();
    concept_.hypernyms = j.at("hypernyms").get<std::set<std::string>>();
    concept_.confidence = j.at("confidence").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedContainer, std::string("concept: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const ClassifyResult& result) {
  j = {{"candidates", ranked(result.candidates)},
       {"predictions", ranked(result.predictions)},
       {"unknown_labels", result.unknown_labels},
       {"warnings", result.warnings}};
}

void to_json(nlohmann::json& j, const StatementAnalysis& analysis) {
  j = {{"entities", analysis.entities},
       {"concepts", analysis.concepts},
       {"classification", analysis.classification},
       {"warnings", analysis.warnings}};
}

}  // namespace sif::semantic
