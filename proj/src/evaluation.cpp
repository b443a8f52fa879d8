#include "sif/evaluation.hpp"

#include <algorithm>
#include <istream>
#include <map>

#include "sif/error.hpp"

namespace sif::evaluation {
namespace {

std::string technique_names(const std::vector<std::string>& ids, const cti::Vocabulary& vocabulary) {
  std::string out;
  for (const auto& id : ids) {
    auto technique = cti::TechniqueId::parse(id);
    std::string name = technique && vocabulary.contains(*technique) ? vocabulary.name(*technique) : id;
    out += (out.empty() ? "" : " ") + name;
  }
  return out;
}

// Splits one CSV record; double quotes group fields and "" escapes a quote.
std::vector<std::string> csv_fields(const std::string& line, int number) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) throw Error(ErrorCode::InvalidRatings, "line " + std::to_string(number) + ": unterminated quote");
  for (auto& f : fields) {
    auto a = f.find_first_not_of(" \t");
    auto b = f.find_last_not_of(" \t");
    f = a == std::string::npos ? "" : f.substr(a, b - a + 1);
  }
  return fields;
}

template <class F>
nlohmann::json guarded(F compute, nlohmann::json& notes, const std::string& what) {
  try {
    return compute();
  } catch (const Error& e) {
    notes[what] = e.what();
    return nullptr;
  }
}

}  // namespace

TextScores text_scores(const std::vector<StatementPrediction>& predictions, const cti::Vocabulary& vocabulary,
                       const metrics::EmbeddingProvider& provider) {
  TextScores scores;
  for (const auto& p : predictions) {
    if (p.gold.empty()) continue;
    ++scores.scored;
    std::vector<std::string> predicted;
    for (const auto& l : p.predicted) predicted.push_back(l.label);
    auto candidate = technique_names(predicted, vocabulary);
    if (candidate.empty()) continue;
    auto reference = technique_names({p.gold.begin(), p.gold.end()}, vocabulary);
    scores.rouge_l += metrics::rouge_l_f1(candidate, reference);
    scores.embedding_f1 += metrics::embedding_score_f1(candidate, reference, provider);
  }
  if (scores.scored > 0) {
    scores.rouge_l /= static_cast<double>(scores.scored);
    scores.embedding_f1 /= static_cast<double>(scores.scored);
  }
  return scores;
}

void attach_gold(std::vector<StatementPrediction>& predictions, const std::vector<cti::CtiReport>& reports) {
  std::map<std::string, std::set<std::string>> gold;
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.statements.size(); ++i) {
      auto& labels = gold[r.id + "#" + std::to_string(i + 1)];
      for (const auto& l : r.statements[i].gold_labels) labels.insert(l.value());
    }
  }
  for (auto& p : predictions) {
    if (auto it = gold.find(p.statement_id); it != gold.end()) p.gold = it->second;
  }
}

nlohmann::json evaluation_report(const std::vector<StatementPrediction>& predictions, const cti::Vocabulary& vocabulary,
                                 std::size_t k, const std::string& method,
                                 const metrics::EmbeddingProvider& provider) {
  std::set<std::string> labels;
  for (const auto& id : vocabulary.ids()) labels.insert(id.value());
  auto text = text_scores(predictions, vocabulary, provider);
  auto optional = [&](double value) { return text.scored > 0 ? nlohmann::json(value) : nlohmann::json(); };
  nlohmann::json row = {{"Method", method},
                        {"F1 w", metrics::weighted_f1(predictions, labels)},
                        {"Acc. w", metrics::weighted_accuracy(predictions, labels)},
                        {"Top-k Acc.", metrics::top_k_accuracy(predictions, k)},
                        {"BERT Score F1", optional(text.embedding_f1)},
                        {"ROUGE L", optional(text.rouge_l)}};
  return {{"columns", {"Method", "F1 w", "Acc. w", "Top-k Acc.", "BERT Score F1", "ROUGE L"}},
          {"rows", {row}},
          {"k", k},
          {"statements", predictions.size()},
          {"text_scored_statements", text.scored},
          {"hamming_loss", metrics::hamming_loss(predictions, labels)}};
}

std::vector<DimensionRatings> read_ratings_csv(std::istream& in, int scale_max) {
  if (scale_max < 1) throw Error(ErrorCode::InvalidRatings, "scale maximum must be positive");
  std::string line;
  int number = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") != std::string::npos) header = csv_fields(line, number);
  }
  if (header != std::vector<std::string>{"dimension", "item", "rater", "score"}) {
    throw Error(ErrorCode::InvalidRatings, "expected header dimension,item,rater,score");
  }

  struct Cells {
    std::vector<std::string> items;
    std::set<std::string> raters;
    std::map<std::pair<std::string, std::string>, int> scores;
  };
  std::vector<std::string> order;
  std::map<std::string, Cells> by_dimension;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = csv_fields(line, number);
    auto where = "line " + std::to_string(number) + ": ";
    if (f.size() != 4) throw Error(ErrorCode::InvalidRatings, where + "expected 4 fields");
    if (f[0].empty() || f[1].empty() || f[2].empty()) throw Error(ErrorCode::InvalidRatings, where + "empty field");
    int score = 0;
    try {
      std::size_t used = 0;
      score = std::stoi(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidRatings, where + "score '" + f[3] + "' is not an integer");
    }
    auto [it, inserted] = by_dimension.try_emplace(f[0]);
    if (inserted) order.push_back(f[0]);
    auto& cells = it->second;
    if (std::find(cells.items.begin(), cells.items.end(), f[1]) == cells.items.end()) cells.items.push_back(f[1]);
    cells.raters.insert(f[2]);
    if (!cells.scores.emplace(std::make_pair(f[1], f[2]), score).second) {
      throw Error(ErrorCode::InvalidRatings, where + "duplicate rating of " + f[1] + " by " + f[2]);
    }
  }
  if (order.empty()) throw Error(ErrorCode::InvalidRatings, "no ratings");

  std::vector<DimensionRatings> out;
  for (const auto& name : order) {
    const auto& cells = by_dimension[name];
    DimensionRatings d{name, cells.items, {cells.raters.begin(), cells.raters.end()}, {scale_max, {}}};
    for (const auto& item : d.items) {
      std::vector<std::optional<int>> row;
      for (const auto& rater : d.raters) {
        auto it = cells.scores.find({item, rater});
        row.push_back(it == cells.scores.end() ? std::nullopt : std::optional<int>(it->second));
      }
      d.ratings.rows.push_back(std::move(row));
    }
    metrics::check_ratings(d.ratings);
    out.push_back(std::move(d));
  }
  return out;
}

nlohmann::json rating_report(const std::vector<DimensionRatings>& dimensions, metrics::AlphaLevel level) {
  using metrics::KappaWeighting;
  auto rows = nlohmann::json::array();
  for (const auto& d : dimensions) {
    nlohmann::json notes = nlohmann::json::object();
    const auto& r = d.ratings;
    nlohmann::json kappa = {
        {"Unweighted", guarded([&] { return metrics::pairwise_cohen_kappa(r, KappaWeighting::Unweighted); }, notes,
                               "kappa_unweighted")},
        {"Linear", guarded([&] { return metrics::pairwise_cohen_kappa(r, KappaWeighting::Linear); }, notes,
                           "kappa_linear")},
        {"Quadratic", guarded([&] { return metrics::pairwise_cohen_kappa(r, KappaWeighting::Quadratic); }, notes,
                              "kappa_quadratic")}};
    nlohmann::json row = {
        {"Dimension", d.dimension},
        {"Krippendorff's alpha", guarded([&] { return metrics::krippendorff_alpha(r, level); }, notes, "alpha")},
        {"Cohen's kappa", kappa},
        {"Spearman's rho", guarded([&] { return metrics::pairwise_spearman_rho(r); }, notes, "rho")},
        {"items", d.items.size()},
        {"raters", d.raters}};
    if (!notes.empty()) row["errors"] = notes;
    rows.push_back(std::move(row));
  }
  return {{"columns", {"Dimension", "Krippendorff's alpha", "Cohen's kappa", "Spearman's rho"}},
          {"kappa_weightings", {"Unweighted", "Linear", "Quadratic"}},
          {"alpha_level", metrics::to_string(level)},
          {"rows", rows}};
}

}  // namespace sif::evaluation
