#include "sif/prediction.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "sif/error.hpp"

namespace sif {

void rank_predictions(std::vector<LabelPrediction>& predictions) {
  std::stable_sort(predictions.begin(), predictions.end(), [](const LabelPrediction& a, const LabelPrediction& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.label < b.label;
  });
  for (std::size_t i = 0; i < predictions.size(); ++i) predictions[i].rank = static_cast<int>(i + 1);
}

void write_predictions(std::ostream& out, const std::vector<StatementPrediction>& predictions) {
  for (const auto& p : predictions) {
    auto predicted = nlohmann::json::array();
    for (const auto& l : p.predicted) predicted.push_back({{"label", l.label}, {"confidence", l.confidence}});
    out << nlohmann::json{{"statement_id", p.statement_id}, {"gold", p.gold}, {"predicted", predicted}}.dump() << '\n';
  }
}

std::vector<StatementPrediction> read_predictions(std::istream& in) {
  std::vector<StatementPrediction> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      StatementPrediction p;
      p.statement_id = j.at("statement_id").get<std::string>();
      for (const auto& g : j.at("gold")) p.gold.insert(g.get<std::string>());
      for (const auto& l : j.at("predicted")) {
        p.predicted.push_back({l.at("label").get<std::string>(), l.at("confidence").get<double>(), 0});
      }
      rank_predictions(p.predicted);
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedContainer, "predictions line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sif
