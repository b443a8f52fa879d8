#pragma once

// Brute-force reference implementations for the metric kernels. Each one
// takes a different route to the same quantity (direct pair/cell sums,
// subsequence enumeration, counting ranks) so a shared mistake is unlikely.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sif/metrics.hpp"

namespace sif::test {

inline std::set<std::string> label_space(const std::vector<StatementPrediction>& preds, const std::set<std::string>& vocab) {
  std::set<std::string> space = vocab;
  for (const auto& p : preds) {
    for (const auto& g : p.gold) space.insert(g);
    for (const auto& l : p.predicted) space.insert(l.label);
  }
  return space;
}

inline std::set<std::string> predicted_set(const StatementPrediction& p) {
  std::set<std::string> out;
  for (const auto& l : p.predicted) out.insert(l.label);
  return out;
}

inline double oracle_hamming(const std::vector<StatementPrediction>& preds, const std::set<std::string>& vocab) {
  auto space = label_space(preds, vocab);
  double wrong = 0;
  for (const auto& p : preds) {
    auto h = predicted_set(p);
    std::vector<std::string> diff;
    std::set_symmetric_difference(p.gold.begin(), p.gold.end(), h.begin(), h.end(), std::back_inserter(diff));
    wrong += static_cast<double>(diff.size());
  }
  return wrong / static_cast<double>(preds.size() * space.size());
}

// F1 = 2TP / (2TP + FP + FN); accuracy = 1 - (FP + FN) / N
inline std::pair<double, double> oracle_weighted(const std::vector<StatementPrediction>& preds,
                                                 const std::set<std::string>& vocab) {
  double f1_sum = 0, acc_sum = 0, support_sum = 0;
  for (const auto& label : label_space(preds, vocab)) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& p : preds) {
      bool g = p.gold.count(label) > 0, h = predicted_set(p).count(label) > 0;
      tp += g && h;
      fp += !g && h;
      fn += g && !h;
    }
    double support = tp + fn;
    if (support == 0) continue;
    support_sum += support;
    f1_sum += support * (2 * tp / (2 * tp + fp + fn));
    acc_sum += support * (1.0 - (fp + fn) / static_cast<double>(preds.size()));
  }
  if (support_sum == 0) return {0.0, 0.0};
  return {f1_sum / support_sum, acc_sum / support_sum};
}

inline double oracle_top_k(const std::vector<StatementPrediction>& preds, std::size_t k) {
  double hits = 0;
  for (const auto& p : preds) {
    auto ranked = p.predicted;
    std::sort(ranked.begin(), ranked.end(), [](const LabelPrediction& a, const LabelPrediction& b) {
      return a.confidence > b.confidence || (a.confidence == b.confidence && a.label < b.label);
    });
    bool hit = false;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) hit |= p.gold.count(ranked[i].label) > 0;
    hits += hit;
  }
  return hits / static_cast<double>(preds.size());
}

inline std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// longest common subsequence by enumerating every subsequence of a (|a| <= 12)
inline double oracle_rouge_l(const std::string& candidate, const std::string& reference) {
  auto a = words(candidate), b = words(reference);
  std::size_t best = 0;
  for (unsigned mask = 0; mask < (1u << a.size()); ++mask) {
    std::size_t len = static_cast<std::size_t>(__builtin_popcount(mask));
    if (len <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < a.size() && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else ++j;
    }
    if (ok) best = len;
  }
  if (best == 0) return 0.0;
  double p = double(best) / double(a.size()), r = double(best) / double(b.size());
  return 2 * p * r / (p + r);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

// every (candidate token, reference token) pairing scored; best per row/column
inline double oracle_embedding_f1(const std::string& candidate, const std::string& reference,
                                  const metrics::EmbeddingProvider& provider) {
  auto c = words(candidate), r = words(reference);
  auto ce = provider.embed(c), re = provider.embed(r);
  std::vector<std::vector<double>> sim(c.size(), std::vector<double>(r.size()));
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < r.size(); ++j) sim[i][j] = cosine(ce[i], re[j]);
  double p = 0, rec = 0;
  for (std::size_t i = 0; i < c.size(); ++i) p += *std::max_element(sim[i].begin(), sim[i].end());
  for (std::size_t j = 0; j < r.size(); ++j) {
    double best = -2;
    for (std::size_t i = 0; i < c.size(); ++i) best = std::max(best, sim[i][j]);
    rec += best;
  }
  p = std::max(p / double(c.size()), 0.0);
  rec = std::max(rec / double(r.size()), 0.0);
  return p + rec == 0 ? 0.0 : 2 * p * rec / (p + rec);
}

// D_o and D_e summed over value instances directly, no coincidence matrix.
inline double oracle_alpha(const metrics::RatingMatrix& m, metrics::AlphaLevel level) {
  std::vector<std::vector<int>> units;
  std::vector<int> pooled;
  for (const auto& row : m.rows) {
    std::vector<int> v;
    for (const auto& c : row)
      if (c) v.push_back(*c);
    if (v.size() >= 2) {
      units.push_back(v);
      pooled.insert(pooled.end(), v.begin(), v.end());
    }
  }
  const double n = static_cast<double>(pooled.size());
  std::map<int, double> freq;
  for (int v : pooled) freq[v] += 1;
  auto delta = [&](int c, int k) -> double {
    if (level == metrics::AlphaLevel::Nominal) return c == k ? 0 : 1;
    if (level == metrics::AlphaLevel::Interval) return double(c - k) * double(c - k);
    double s = 0;
    for (int g = std::min(c, k); g <= std::max(c, k); ++g) s += freq.count(g) ? freq[g] : 0;
    s -= (freq[c] + freq[k]) / 2;
    return s * s;
  };
  double d_o = 0;
  for (const auto& v : units) {
    double within = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = 0; j < v.size(); ++j)
        if (i != j) within += delta(v[i], v[j]);
    d_o += within / double(v.size() - 1);
  }
  d_o /= n;
  double d_e = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i)
    for (std::size_t j = 0; j < pooled.size(); ++j)
      if (i != j) d_e += delta(pooled[i], pooled[j]);
  d_e /= n * (n - 1);
  return 1 - d_o / d_e;
}

// observed: mean weight over items; expected: mean weight over all item pairs (u, v)
inline double oracle_kappa(const metrics::RatingMatrix& m, metrics::KappaWeighting w) {
  const double span = m.scale_max > 1 ? m.scale_max - 1 : 1;
  auto weight = [&](int a, int b) -> double {
    double d = std::abs(a - b);
    if (w == metrics::KappaWeighting::Unweighted) return d == 0 ? 0 : 1;
    if (w == metrics::KappaWeighting::Linear) return d / span;
    return (d / span) * (d / span);
  };
  const double n = double(m.rows.size());
  double observed = 0, expected = 0;
  for (const auto& u : m.rows) {
    observed += weight(*u[0], *u[1]);
    for (const auto& v : m.rows) expected += weight(*u[0], *v[1]);
  }
  return 1 - (observed / n) / (expected / (n * n));
}

inline double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r;
    for (double a : v) {
      double below = 0, equal = 0;
      for (double b : v) {
        below += b < a;
        equal += b == a;
      }
      r.push_back(below + (equal + 1) / 2);
    }
    return r;
  };
  auto rx = ranks(x), ry = ranks(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= double(rx.size());
  my /= double(ry.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// generators

inline std::vector<StatementPrediction> random_predictions(std::mt19937& rng, std::set<std::string>& vocab) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  vocab.clear();
  int labels = pick(1, 6);
  for (int i = 0; i < labels; ++i) vocab.insert("T10" + std::to_string(10 + i));
  std::vector<std::string> pool(vocab.begin(), vocab.end());
  pool.push_back("T1999");  // outside the vocabulary
  std::vector<StatementPrediction> out(static_cast<std::size_t>(pick(1, 8)));
  for (std::size_t s = 0; s < out.size(); ++s) {
    out[s].statement_id = "s" + std::to_string(s);
    for (const auto& l : pool) {
      if (pick(0, 2) == 0) out[s].gold.insert(l);
      if (pick(0, 2) == 0) out[s].predicted.push_back({l, pick(0, 10) / 10.0, 0});
    }
    rank_predictions(out[s].predicted);
  }
  return out;
}

inline metrics::RatingMatrix random_ratings(std::mt19937& rng, std::size_t raters, bool allow_missing) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  metrics::RatingMatrix m;
  m.scale_max = pick(2, 5);
  int items = pick(2, 10);
  for (int i = 0; i < items; ++i) {
    std::vector<std::optional<int>> row;
    for (std::size_t r = 0; r < raters; ++r) {
      if (allow_missing && pick(0, 4) == 0) row.push_back(std::nullopt);
      else row.push_back(pick(1, m.scale_max));
    }
    m.rows.push_back(row);
  }
  return m;
}

}  // namespace sif::test
