#pragma once

// Scoring against gold timelines and synthetic ground truth.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pietl/corpus.hpp"
#include "pietl/errors.hpp"
#include "pietl/summary.hpp"

namespace pietl::eval {

using DocSet = std::set<std::string>;

// user -> event name -> member doc_ids
using GoldTimeline = std::map<std::string, std::map<std::string, DocSet>>;

// Tab-separated lines: user_id, event_name, doc_id. '#' starts a comment line.
inline GoldTimeline read_gold(std::istream& in) {
  GoldTimeline gold;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() != 3) throw data_error("gold line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    if (f[1].empty()) throw data_error("gold line " + std::to_string(line_no) + ": empty event name");
    gold[f[0]][f[1]].insert(f[2]);
  }
  return gold;
}

inline GoldTimeline read_gold(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read gold file " + path);
  return read_gold(in);
}

// Gold from the gold_pie fields of the corpus records.
inline GoldTimeline gold_from_corpus(const Corpus& corpus) {
  GoldTimeline gold;
  for (const auto& d : corpus.documents()) {
    if (d.gold_pie) gold[corpus.user_name(d.user)][*d.gold_pie].insert(d.doc_id);
  }
  return gold;
}

inline void check_gold(const GoldTimeline& gold, const Corpus& corpus) {
  for (const auto& [user, events] : gold) {
    for (const auto& [name, docs] : events) {
      for (const auto& id : docs) {
        if (!corpus.find_doc(id)) throw data_error("gold event '" + name + "' names unknown document " + id);
      }
    }
  }
}

inline DocSet gold_docs(const GoldTimeline& gold) {
  DocSet out;
  for (const auto& [user, events] : gold) {
    for (const auto& [name, docs] : events) out.insert(docs.begin(), docs.end());
  }
  return out;
}

// Fraction of gold events with at least one member document predicted.
inline double event_recall(const DocSet& predicted, const GoldTimeline& gold) {
  long events = 0;
  long hit = 0;
  for (const auto& [user, evs] : gold) {
    for (const auto& [name, docs] : evs) {
      ++events;
      if (std::any_of(docs.begin(), docs.end(), [&](const std::string& d) { return predicted.contains(d); })) ++hit;
    }
  }
  if (events == 0) throw std::domain_error("event_recall: gold timeline is empty");
  return static_cast<double>(hit) / static_cast<double>(events);
}

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Precision is 0 for an empty prediction, recall is 0 for an empty gold set,
// and F1 is 0 whenever P + R = 0.
inline PRF tweet_prf(const DocSet& predicted, const DocSet& gold) {
  long tp = 0;
  for (const auto& d : predicted) tp += gold.contains(d) ? 1 : 0;
  PRF out;
  if (!predicted.empty()) out.precision = static_cast<double>(tp) / static_cast<double>(predicted.size());
  if (!gold.empty()) out.recall = static_cast<double>(tp) / static_cast<double>(gold.size());
  // 2PR / (P + R) with the common factors cancelled
  if (tp > 0) out.f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(predicted.size() + gold.size());
  return out;
}

// Minimum-cost perfect assignment of rows to columns for a square cost
// matrix (Kuhn-Munkres with potentials). Returns the column of each row.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    if (p[static_cast<std::size_t>(j)] > 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  }
  return row_to_col;
}

inline double adjusted_rand_index(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: size mismatch");
  const double n = static_cast<double>(a.size());
  std::map<std::pair<std::int64_t, std::int64_t>, long> joint;
  std::map<std::int64_t, long> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, c] : joint) index += pairs(static_cast<double>(c));
  for (const auto& [k, c] : ra) sa += pairs(static_cast<double>(c));
  for (const auto& [k, c] : rb) sb += pairs(static_cast<double>(c));
  const double expected = n > 1 ? sa * sb / pairs(n) : 0.0;
  const double max_index = 0.5 * (sa + sb);
  // Both partitions trivial (all singletons or one block each) agree fully.
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

struct TopicMatch {
  std::map<std::int64_t, std::int64_t> mapping;  // predicted id -> truth id (matched pairs only)
  long overlap = 0;                              // documents on matched pairs
  double ari = 0.0;
};

// One-to-one matching of predicted to true topics maximizing the number of
// co-assigned documents; ARI is computed on the raw partitions.
inline TopicMatch match_topics(const std::vector<std::int64_t>& predicted, const std::vector<std::int64_t>& truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("match_topics: document sets differ");
  std::vector<std::int64_t> pids(predicted), tids(truth);
  std::sort(pids.begin(), pids.end());
  pids.erase(std::unique(pids.begin(), pids.end()), pids.end());
  std::sort(tids.begin(), tids.end());
  tids.erase(std::unique(tids.begin(), tids.end()), tids.end());
  const std::size_t n = std::max(pids.size(), tids.size());
  std::vector<std::vector<double>> overlap(n, std::vector<double>(n, 0.0));
  for (std::size_t d = 0; d < predicted.size(); ++d) {
    const auto i = static_cast<std::size_t>(std::lower_bound(pids.begin(), pids.end(), predicted[d]) - pids.begin());
    const auto j = static_cast<std::size_t>(std::lower_bound(tids.begin(), tids.end(), truth[d]) - tids.begin());
    overlap[i][j] += 1.0;
  }
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost[i][j] = -overlap[i][j];
  }
  const auto assign = hungarian(cost);
  TopicMatch out;
  for (std::size_t i = 0; i < pids.size(); ++i) {
    const auto j = static_cast<std::size_t>(assign[i]);
    if (j < tids.size()) {
      out.mapping[pids[i]] = tids[j];
      out.overlap += static_cast<long>(overlap[i][j]);
    }
  }
  out.ari = adjusted_rand_index(predicted, truth);
  return out;
}

// Fraction of documents whose modal (x, y) equals the true pair. Documents
// are matched by doc_id; a summary without time labels is scored on x only.
template <typename TruthMap>
double label_accuracy(const PosteriorSummary& s, const TruthMap& truth) {
  if (s.doc_ids.empty()) throw std::domain_error("label_accuracy: empty summary");
  long ok = 0;
  for (std::size_t d = 0; d < s.doc_ids.size(); ++d) {
    const auto& t = truth.at(s.doc_ids[d]);
    const bool x_ok = s.labels[d].x == t.x;
    const bool y_ok = s.labels[d].y == kUnlabeled || s.labels[d].y == t.y;
    ok += (x_ok && y_ok) ? 1 : 0;
  }
  return static_cast<double>(ok) / static_cast<double>(s.doc_ids.size());
}

// Published scores of the original study, kept for context only: the
// corpora and gold timelines behind them are private, so none of these can
// be reproduced here.
struct ReferenceScore {
  const char* system;
  double event_recall_o, event_recall_c;
  PRF tweet_o, tweet_c;
};

inline constexpr ReferenceScore kReferenceScores[] = {
    {"dpm", 0.752, 0.927, {0.798, 0.700, 0.742}, {0.841, 0.820, 0.830}},
    {"mlda", 0.736, 0.882, {0.770, 0.685, 0.725}, {0.835, 0.819, 0.827}},
    {"person-dp", 0.683, 0.786, {0.562, 0.636, 0.597}, {0.510, 0.740, 0.604}},
    {"public-dp", 0.764, 0.889, {0.536, 0.730, 0.618}, {0.547, 0.823, 0.657}},
};

// Published type proportions (PublicTG, PublicTS, PersonTG, PersonTS); same caveat.
inline constexpr std::array<double, 4> kReferenceTypeProportions{0.397, 0.203, 0.212, 0.188};

struct Report {
  std::string model;
  std::string mode;
  long predicted_docs = 0;
  long gold_docs = 0;
  long gold_events = 0;
  double event_recall = 0.0;
  PRF tweet;
  std::optional<std::array<double, 4>> type_proportions;
  std::optional<double> label_accuracy;
  std::optional<double> topic_ari;
  nlohmann::ordered_json provenance;
};

inline nlohmann::ordered_json report_to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["format"] = "pietl-report/1";
  j["model"] = r.model;
  j["mode"] = r.mode;
  j["provenance"] = r.provenance;
  j["predicted_docs"] = r.predicted_docs;
  j["gold_docs"] = r.gold_docs;
  j["gold_events"] = r.gold_events;
  j["event_recall"] = r.event_recall;
  j["tweet_precision"] = r.tweet.precision;
  j["tweet_recall"] = r.tweet.recall;
  j["tweet_f1"] = r.tweet.f1;
  if (r.type_proportions) {
    j["type_proportions"] = {{"PublicTG", (*r.type_proportions)[0]},
                             {"PublicTS", (*r.type_proportions)[1]},
                             {"PersonTG", (*r.type_proportions)[2]},
                             {"PersonTS", (*r.type_proportions)[3]}};
  }
  if (r.label_accuracy) j["label_accuracy"] = *r.label_accuracy;
  if (r.topic_ari) j["topic_ari"] = *r.topic_ari;
  auto refs = nlohmann::ordered_json::array();
  for (const auto& s : kReferenceScores) {
    refs.push_back({{"system", s.system},
                    {"event_recall", {{"twit_o", s.event_recall_o}, {"twit_c", s.event_recall_c}}},
                    {"tweet_f1", {{"twit_o", s.tweet_o.f1}, {"twit_c", s.tweet_c.f1}}}});
  }
  j["published_reference"] = {{"reproducible", false}, {"scores", std::move(refs)}};
  return j;
}

inline std::string report_to_text(const Report& r) {
  char buf[256];
  std::string out;
  auto line = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof buf, fmt, args...);
    out += buf;
    out += '\n';
  };
  out += "# " + r.provenance.dump() + "\n";
  line("model            %s", r.model.c_str());
  line("mode             %s", r.mode.c_str());
  line("predicted docs   %ld", r.predicted_docs);
  line("gold docs        %ld (%ld events)", r.gold_docs, r.gold_events);
  line("event recall     %.4f", r.event_recall);
  line("tweet precision  %.4f", r.tweet.precision);
  line("tweet recall     %.4f", r.tweet.recall);
  line("tweet F1         %.4f", r.tweet.f1);
  if (r.type_proportions) {
    const auto& p = *r.type_proportions;
    line("types            PublicTG %.3f  PublicTS %.3f  PersonTG %.3f  PersonTS %.3f", p[0], p[1], p[2], p[3]);
  }
  if (r.label_accuracy) line("label accuracy   %.4f", *r.label_accuracy);
  if (r.topic_ari) line("topic ARI        %.4f", *r.topic_ari);
  out += "\nPublished reference scores (private corpora; not reproducible here):\n";
  line("  %-10s %8s %8s %8s %8s", "system", "ER(O)", "ER(C)", "F1(O)", "F1(C)");
  for (const auto& s : kReferenceScores) {
    line("  %-10s %8.3f %8.3f %8.3f %8.3f", s.system, s.event_recall_o, s.event_recall_c, s.tweet_o.f1, s.tweet_c.f1);
  }
  const auto& t = kReferenceTypeProportions;
  line("  types      PublicTG %.3f  PublicTS %.3f  PersonTG %.3f  PersonTS %.3f", t[0], t[1], t[2], t[3]);
  return out;
}

}  // namespace pietl::eval
