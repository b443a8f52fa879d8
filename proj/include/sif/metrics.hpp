#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sif/prediction.hpp"

namespace sif::metrics {

// ---------------------------------------------------------------------------
// multilabel classification

/// Label space is `vocabulary` plus every label seen in gold or predictions.
/// All three throw EmptyCorpus on an empty prediction set.
double weighted_f1(const std::vector<StatementPrediction>& predictions, const std::set<std::string>& vocabulary);
/// Per-label one-vs-rest accuracy averaged with gold-support weights.
double weighted_accuracy(const std::vector<StatementPrediction>& predictions, const std::set<std::string>& vocabulary);
/// Misassigned (statement, label) cells over all cells.
double hamming_loss(const std::vector<StatementPrediction>& predictions, const std::set<std::string>& vocabulary);

/// Share of statements whose first k ranked predictions hit the gold set.
/// A statement with no gold labels is a miss. Throws PreconditionViolation for k < 1.
double top_k_accuracy(const std::vector<StatementPrediction>& predictions, std::size_t k);

// ---------------------------------------------------------------------------
// text similarity

std::vector<std::string> whitespace_tokens(std::string_view text);

/// Throws EmptyText when either side has no tokens.
double rouge_l_f1(std::string_view candidate, std::string_view reference);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) const = 0;
};

/// Deterministic pseudo-embeddings seeded by a hash of each token.
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dimension = 32, std::uint64_t seed = 0);
  std::size_t dimension() const override { return dimension_; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) const override;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

/// Lookup table; unknown tokens raise ProviderFailure.
class TableEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit TableEmbeddingProvider(std::map<std::string, std::vector<double>> table);
  std::size_t dimension() const override { return dimension_; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) const override;

 private:
  std::map<std::string, std::vector<double>> table_;
  std::size_t dimension_ = 0;
};

/// Greedy cosine matching, BERTScore style. Throws EmptyText or ProviderFailure.
double embedding_score_f1(std::string_view candidate, std::string_view reference, const EmbeddingProvider& provider);

// ---------------------------------------------------------------------------
// inter-rater reliability

/// items x raters; nullopt marks a missing rating. Scores lie in 1..scale_max.
struct RatingMatrix {
  int scale_max = 5;
  std::vector<std::vector<std::optional<int>>> rows;

  std::size_t raters() const { return rows.empty() ? 0 : rows.front().size(); }
};

/// Throws InvalidRatings for ragged rows or out-of-scale scores.
void check_ratings(const RatingMatrix& ratings);

enum class AlphaLevel { Nominal, Ordinal, Interval };
enum class KappaWeighting { Unweighted, Linear, Quadratic };

std::string_view to_string(AlphaLevel level);
std::string_view to_string(KappaWeighting weighting);

/// Throws InsufficientData when fewer than two values are pairable or the
/// expected disagreement is zero.
double krippendorff_alpha(const RatingMatrix& ratings, AlphaLevel level);

/// Two raters, no missing cells. Throws RaterCountMismatch, InvalidRatings,
/// DegenerateMarginals (a constant rater or a zero denominator).
double cohen_kappa(const RatingMatrix& ratings, KappaWeighting weighting);

/// Mean of cohen_kappa over every rater pair, using the items both rated.
double pairwise_cohen_kappa(const RatingMatrix& ratings, KappaWeighting weighting);

/// Average ranks for ties. Throws LengthMismatch, InsufficientData (n < 2),
/// ZeroVariance.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

/// Mean spearman_rho over every rater pair, using the items both rated.
double pairwise_spearman_rho(const RatingMatrix& ratings);

}  // namespace sif::metrics
