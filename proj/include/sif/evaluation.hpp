#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sif/cti.hpp"
#include "sif/metrics.hpp"
#include "sif/prediction.hpp"

namespace sif::evaluation {

struct TextScores {
  double rouge_l = 0.0;
  double embedding_f1 = 0.0;
  std::size_t scored = 0;  // statements with a non-empty gold set
};

/// Compares predicted technique names (rank order) with gold technique names
/// (id order), averaged over statements that have gold labels. A statement
/// with no prediction scores 0.
TextScores text_scores(const std::vector<StatementPrediction>& predictions, const cti::Vocabulary& vocabulary,
                       const metrics::EmbeddingProvider& provider);

/// Replaces each prediction's gold set with the corpus labels of the same
/// statement id (`<report id>#<index>`). Unknown ids keep their gold set.
void attach_gold(std::vector<StatementPrediction>& predictions, const std::vector<cti::CtiReport>& reports);

/// Classification report: one row with F1 w, Acc. w, Top-k Acc., BERT Score F1,
/// ROUGE L, plus Hamming loss. Text columns are null when no statement has
/// gold labels.
nlohmann::json evaluation_report(const std::vector<StatementPrediction>& predictions, const cti::Vocabulary& vocabulary,
                                 std::size_t k, const std::string& method,
                                 const metrics::EmbeddingProvider& provider);

struct DimensionRatings {
  std::string dimension;
  std::vector<std::string> items;
  std::vector<std::string> raters;
  metrics::RatingMatrix ratings;  // rows follow `items`, columns follow `raters`
};

/// Long-format CSV with header `dimension,item,rater,score`; a missing row is
/// a missing rating. Dimensions and items keep first-appearance order, raters
/// are sorted by name. Throws InvalidRatings.
std::vector<DimensionRatings> read_ratings_csv(std::istream& in, int scale_max);

/// Rating-agreement report: per dimension Krippendorff's alpha at `level`, mean
/// pairwise Cohen's kappa for the three weightings and mean pairwise
/// Spearman's rho. A statistic that cannot be computed is null with the
/// reason recorded.
nlohmann::json rating_report(const std::vector<DimensionRatings>& dimensions, metrics::AlphaLevel level);

}  // namespace sif::evaluation
