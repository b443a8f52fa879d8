#include "sif/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sif/error.hpp"

namespace sif::metrics {
namespace {

struct LabelCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t support() const { return tp + fn; }
};

std::map<std::string, LabelCounts> confusion(const std::vector<StatementPrediction>& predictions,
                                             const std::set<std::string>& vocabulary) {
  if (predictions.empty()) throw Error(ErrorCode::EmptyCorpus, "no statements to score");
  std::set<std::string> space = vocabulary;
  for (const auto& p : predictions) {
    space.insert(p.gold.begin(), p.gold.end());
    for (const auto& l : p.predicted) space.insert(l.label);
  }
  std::map<std::string, LabelCounts> counts;
  for (const auto& label : space) counts[label];
  for (const auto& p : predictions) {
    std::set<std::string> predicted;
    for (const auto& l : p.predicted) predicted.insert(l.label);
    for (auto& [label, c] : counts) {
      bool g = p.gold.count(label) != 0;
      bool h = predicted.count(label) != 0;
      if (g && h) ++c.tp;
      else if (h) ++c.fp;
      else if (g) ++c.fn;
      else ++c.tn;
    }
  }
  return counts;
}

template <class PerLabel>
double support_weighted(const std::map<std::string, LabelCounts>& counts, PerLabel per_label) {
  double total = 0.0, sum = 0.0;
  for (const auto& [label, c] : counts) {
    if (c.support() == 0) continue;
    total += static_cast<double>(c.support());
    sum += static_cast<double>(c.support()) * per_label(c);
  }
  return total == 0.0 ? 0.0 : sum / total;
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (const auto& x : a) {
    std::size_t diagonal = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t above = row[j];
      row[j] = x == b[j - 1] ? diagonal + 1 : std::max(row[j], row[j - 1]);
      diagonal = above;
    }
  }
  return row[b.size()];
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::vector<double>> checked_embed(const EmbeddingProvider& provider, const std::vector<std::string>& tokens) {
  std::vector<std::vector<double>> vectors;
  try {
    vectors = provider.embed(tokens);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ProviderFailure, e.what());
  }
  if (vectors.size() != tokens.size()) throw Error(ErrorCode::ProviderFailure, "provider returned wrong vector count");
  for (auto& v : vectors) {
    if (v.size() != provider.dimension()) throw Error(ErrorCode::ProviderFailure, "provider returned wrong dimension");
    double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (!(norm > 0.0) || !std::isfinite(norm)) throw Error(ErrorCode::ProviderFailure, "provider returned a zero vector");
    for (auto& x : v) x /= norm;
  }
  return vectors;
}

// mean over `from` of the best cosine against `to`
double greedy_match(const std::vector<std::vector<double>>& from, const std::vector<std::vector<double>>& to) {
  double sum = 0.0;
  for (const auto& a : from) {
    double best = -1.0;
    for (const auto& b : to) best = std::max(best, std::inner_product(a.begin(), a.end(), b.begin(), 0.0));
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

// ratings as (value) lists per unit, missing dropped
std::vector<std::vector<int>> pairable_units(const RatingMatrix& ratings) {
  std::vector<std::vector<int>> units;
  for (const auto& row : ratings.rows) {
    std::vector<int> values;
    for (const auto& cell : row)
      if (cell) values.push_back(*cell);
    if (values.size() >= 2) units.push_back(std::move(values));
  }
  return units;
}

RatingMatrix column_pair(const RatingMatrix& ratings, std::size_t a, std::size_t b) {
  RatingMatrix pair{ratings.scale_max, {}};
  for (const auto& row : ratings.rows) {
    if (row[a] && row[b]) pair.rows.push_back({row[a], row[b]});
  }
  return pair;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    double rank = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double weighted_f1(const std::vector<StatementPrediction>& predictions, const std::set<std::string>& vocabulary) {
  return support_weighted(confusion(predictions, vocabulary), [](const LabelCounts& c) {
    double p = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
    double r = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
    return harmonic(p, r);
  });
}

double weighted_accuracy(const std::vector<StatementPrediction>& predictions, const std::set<std::string>& vocabulary) {
  return support_weighted(confusion(predictions, vocabulary), [](const LabelCounts& c) {
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.tp + c.tn + c.fp + c.fn);
  });
}

double hamming_loss(const std::vector<StatementPrediction>& predictions, const std::set<std::string>& vocabulary) {
  auto counts = confusion(predictions, vocabulary);
  double wrong = 0.0;
  for (const auto& [label, c] : counts) wrong += static_cast<double>(c.fp + c.fn);
  return wrong / static_cast<double>(predictions.size() * counts.size());
}

double top_k_accuracy(const std::vector<StatementPrediction>& predictions, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::PreconditionViolation, "k must be at least 1");
  if (predictions.empty()) throw Error(ErrorCode::EmptyCorpus, "no statements to score");
  std::size_t hits = 0;
  for (const auto& p : predictions) {
    for (const auto& l : p.predicted) {
      if (static_cast<std::size_t>(l.rank) <= k && p.gold.count(l.label)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  return tokens;
}

double rouge_l_f1(std::string_view candidate, std::string_view reference) {
  auto c = whitespace_tokens(candidate);
  auto r = whitespace_tokens(reference);
  if (c.empty() || r.empty()) throw Error(ErrorCode::EmptyText, "ROUGE-L needs at least one token on each side");
  auto lcs = static_cast<double>(lcs_length(c, r));
  if (lcs == 0.0) return 0.0;
  return harmonic(lcs / static_cast<double>(c.size()), lcs / static_cast<double>(r.size()));
}

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension == 0) throw Error(ErrorCode::PreconditionViolation, "embedding dimension must be positive");
}

std::vector<std::vector<double>> HashEmbeddingProvider::embed(const std::vector<std::string>& tokens) const {
  std::vector<std::vector<double>> out;
  for (const auto& token : tokens) {
    std::uint64_t state = fnv1a(token) ^ seed_;
    std::vector<double> v(dimension_);
    for (auto& x : v) x = static_cast<double>(splitmix(state) >> 11) / 9007199254740992.0 * 2.0 - 1.0;
    out.push_back(std::move(v));
  }
  return out;
}

TableEmbeddingProvider::TableEmbeddingProvider(std::map<std::string, std::vector<double>> table)
    : table_(std::move(table)) {
  if (!table_.empty()) dimension_ = table_.begin()->second.size();
}

std::vector<std::vector<double>> TableEmbeddingProvider::embed(const std::vector<std::string>& tokens) const {
  std::vector<std::vector<double>> out;
  for (const auto& token : tokens) {
    auto it = table_.find(token);
    if (it == table_.end()) throw Error(ErrorCode::ProviderFailure, "no embedding for '" + token + "'");
    out.push_back(it->second);
  }
  return out;
}

double embedding_score_f1(std::string_view candidate, std::string_view reference, const EmbeddingProvider& provider) {
  auto c = whitespace_tokens(candidate);
  auto r = whitespace_tokens(reference);
  if (c.empty() || r.empty()) throw Error(ErrorCode::EmptyText, "embedding score needs at least one token on each side");
  auto ce = checked_embed(provider, c);
  auto re = checked_embed(provider, r);
  double precision = greedy_match(ce, re);
  double recall = greedy_match(re, ce);
  // negative cosine matches would make the harmonic mean meaningless
  return harmonic(std::max(precision, 0.0), std::max(recall, 0.0));
}

void check_ratings(const RatingMatrix& ratings) {
  if (ratings.scale_max < 1) throw Error(ErrorCode::InvalidRatings, "scale must have at least one point");
  for (std::size_t i = 0; i < ratings.rows.size(); ++i) {
    if (ratings.rows[i].size() != ratings.raters()) {
      throw Error(ErrorCode::InvalidRatings, "row " + std::to_string(i + 1) + " has a different rater count");
    }
    for (const auto& cell : ratings.rows[i]) {
      if (cell && (*cell < 1 || *cell > ratings.scale_max)) {
        throw Error(ErrorCode::InvalidRatings,
                    "score " + std::to_string(*cell) + " outside 1.." + std::to_string(ratings.scale_max));
      }
    }
  }
}

std::string_view to_string(AlphaLevel level) {
  switch (level) {
    case AlphaLevel::Nominal: return "nominal";
    case AlphaLevel::Ordinal: return "ordinal";
    case AlphaLevel::Interval: return "interval";
  }
  return "ordinal";
}

std::string_view to_string(KappaWeighting weighting) {
  switch (weighting) {
    case KappaWeighting::Unweighted: return "unweighted";
    case KappaWeighting::Linear: return "linear";
    case KappaWeighting::Quadratic: return "quadratic";
  }
  return "unweighted";
}

double krippendorff_alpha(const RatingMatrix& ratings, AlphaLevel level) {
  check_ratings(ratings);
  const auto m = static_cast<std::size_t>(ratings.scale_max);
  std::vector<std::vector<double>> o(m + 1, std::vector<double>(m + 1, 0.0));
  for (const auto& values : pairable_units(ratings)) {
    const double weight = 1.0 / static_cast<double>(values.size() - 1);
    for (std::size_t i = 0; i < values.size(); ++i)
      for (std::size_t j = 0; j < values.size(); ++j)
        if (i != j) o[values[i]][values[j]] += weight;
  }
  std::vector<double> n_c(m + 1, 0.0);
  double n = 0.0;
  for (std::size_t c = 1; c <= m; ++c) {
    for (std::size_t k = 1; k <= m; ++k) n_c[c] += o[c][k];
    n += n_c[c];
  }
  if (n < 2.0) throw Error(ErrorCode::InsufficientData, "fewer than two pairable values");

  auto delta = [&](std::size_t c, std::size_t k) {
    switch (level) {
      case AlphaLevel::Nominal: return c == k ? 0.0 : 1.0;
      case AlphaLevel::Interval: return std::pow(static_cast<double>(c) - static_cast<double>(k), 2);
      case AlphaLevel::Ordinal: {
        double s = 0.0;
        for (std::size_t g = std::min(c, k); g <= std::max(c, k); ++g) s += n_c[g];
        return std::pow(s - (n_c[c] + n_c[k]) / 2.0, 2);
      }
    }
    return 0.0;
  };
  double observed = 0.0, expected = 0.0;
  for (std::size_t c = 1; c <= m; ++c) {
    for (std::size_t k = 1; k <= m; ++k) {
      double d = delta(c, k);
      observed += o[c][k] * d;
      expected += n_c[c] * n_c[k] * d;
    }
  }
  observed /= n;
  expected /= n * (n - 1.0);
  if (expected == 0.0) throw Error(ErrorCode::InsufficientData, "no expected disagreement; all values identical");
  return 1.0 - observed / expected;
}

double cohen_kappa(const RatingMatrix& ratings, KappaWeighting weighting) {
  check_ratings(ratings);
  if (ratings.raters() != 2) {
    throw Error(ErrorCode::RaterCountMismatch, "Cohen's kappa needs exactly 2 raters, got " + std::to_string(ratings.raters()));
  }
  if (ratings.rows.empty()) throw Error(ErrorCode::InsufficientData, "no items");
  const auto m = static_cast<std::size_t>(ratings.scale_max);
  std::vector<std::vector<double>> table(m + 1, std::vector<double>(m + 1, 0.0));
  std::vector<double> row_marginal(m + 1, 0.0), col_marginal(m + 1, 0.0);
  for (const auto& row : ratings.rows) {
    if (!row[0] || !row[1]) throw Error(ErrorCode::InvalidRatings, "Cohen's kappa needs a complete matrix");
    table[*row[0]][*row[1]] += 1.0;
    row_marginal[*row[0]] += 1.0;
    col_marginal[*row[1]] += 1.0;
  }
  auto constant = [](const std::vector<double>& marginal) {
    return std::count_if(marginal.begin(), marginal.end(), [](double x) { return x > 0.0; }) == 1;
  };
  if (constant(row_marginal) || constant(col_marginal)) {
    throw Error(ErrorCode::DegenerateMarginals, "a rater gave the same score to every item");
  }
  const double scale = m > 1 ? static_cast<double>(m - 1) : 1.0;
  auto weight = [&](std::size_t i, std::size_t j) {
    double d = std::abs(static_cast<double>(i) - static_cast<double>(j));
    switch (weighting) {
      case KappaWeighting::Unweighted: return d == 0.0 ? 0.0 : 1.0;
      case KappaWeighting::Linear: return d / scale;
      case KappaWeighting::Quadratic: return (d / scale) * (d / scale);
    }
    return 0.0;
  };
  const double total = static_cast<double>(ratings.rows.size());
  double observed = 0.0, expected = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      observed += weight(i, j) * table[i][j] / total;
      expected += weight(i, j) * row_marginal[i] * col_marginal[j] / (total * total);
    }
  }
  if (expected == 0.0) throw Error(ErrorCode::DegenerateMarginals, "no chance disagreement");
  return 1.0 - observed / expected;
}

double pairwise_cohen_kappa(const RatingMatrix& ratings, KappaWeighting weighting) {
  check_ratings(ratings);
  if (ratings.raters() < 2) throw Error(ErrorCode::RaterCountMismatch, "need at least 2 raters");
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < ratings.raters(); ++a) {
    for (std::size_t b = a + 1; b < ratings.raters(); ++b) {
      sum += cohen_kappa(column_pair(ratings, a, b), weighting);
      ++pairs;
    }
  }
  return sum / pairs;
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "sequences differ in length");
  if (x.size() < 2) throw Error(ErrorCode::InsufficientData, "need at least 2 paired values");
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;  // average ranks always sum to n(n+1)/2
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "one sequence is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pairwise_spearman_rho(const RatingMatrix& ratings) {
  check_ratings(ratings);
  if (ratings.raters() < 2) throw Error(ErrorCode::RaterCountMismatch, "need at least 2 raters");
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < ratings.raters(); ++a) {
    for (std::size_t b = a + 1; b < ratings.raters(); ++b) {
      auto pair = column_pair(ratings, a, b);
      std::vector<double> x, y;
      for (const auto& row : pair.rows) {
        x.push_back(*row[0]);
        y.push_back(*row[1]);
      }
      sum += spearman_rho(x, y);
      ++pairs;
    }
  }
  return sum / pairs;
}

}  // namespace sif::metrics
