#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace sif {

struct LabelPrediction {
  std::string label;  // technique id
  double confidence = 0.0;
  int rank = 1;

  bool operator==(const LabelPrediction&) const = default;
};

/// Ranks 1..n in order, confidence non-increasing, ties by label.
void rank_predictions(std::vector<LabelPrediction>& predictions);

struct StatementPrediction {
  std::string statement_id;
  std::set<std::string> gold;
  std::vector<LabelPrediction> predicted;  // ranked

  bool operator==(const StatementPrediction&) const = default;
};

/// One `{statement_id, gold[], predicted[{label, confidence}]}` per line.
void write_predictions(std::ostream& out, const std::vector<StatementPrediction>& predictions);
/// Throws MalformedContainer with the offending line number.
std::vector<StatementPrediction> read_predictions(std::istream& in);

}  // namespace sif
