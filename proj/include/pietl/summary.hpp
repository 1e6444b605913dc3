#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pietl/corpus.hpp"
#include "pietl/errors.hpp"

namespace pietl {

// x: 0 public / 1 personal. y: 0 time-general / 1 time-specific / -1 when the
// model has no time-specificity label.
struct LabelPair {
  int x = 0;
  int y = 0;
  friend bool operator==(const LabelPair&, const LabelPair&) = default;
};

inline constexpr int kUnlabeled = -1;

enum class TweetType { public_tg = 0, public_ts = 1, person_tg = 2, person_ts = 3 };

inline TweetType tweet_type(LabelPair l) {
  if (l.y == kUnlabeled) throw std::domain_error("tweet_type: time label is undefined");
  return static_cast<TweetType>(2 * l.x + l.y);
}

inline const char* type_name(TweetType t) {
  switch (t) {
    case TweetType::public_tg: return "PublicTG";
    case TweetType::public_ts: return "PublicTS";
    case TweetType::person_tg: return "PersonTG";
    case TweetType::person_ts: return "PersonTS";
  }
  return "?";
}

// Posterior aggregate emitted by every model. Topic ids are the sampler's
// stable ids; they are never relabeled within a chain.
struct PosteriorSummary {
  std::string model;
  bool has_time_labels = true;
  int num_samples = 0;
  int vocab_size = 0;
  std::vector<std::string> doc_ids;
  std::vector<LabelPair> labels;                                 // modal (x, y) per document
  std::vector<std::int64_t> topics;                              // modal topic per document
  std::map<std::int64_t, std::vector<double>> topic_word_counts; // averaged over samples
  std::vector<double> log_joint_trace;
  nlohmann::ordered_json provenance;  // config and seed that produced the summary

  int num_docs() const { return static_cast<int>(doc_ids.size()); }

  // PersonTS, or personal under a model without time labels.
  bool is_person_ts(int d) const {
    const LabelPair l = labels.at(static_cast<std::size_t>(d));
    return l.x == 1 && (l.y == 1 || l.y == kUnlabeled);
  }
  bool is_public_ts(int d) const {
    const LabelPair l = labels.at(static_cast<std::size_t>(d));
    return l.x == 0 && l.y == 1;
  }

  std::vector<double> topic_distribution(std::int64_t id) const {
    std::vector<double> p = topic_word_counts.at(id);
    double total = 0.0;
    for (double v : p) total += v;
    if (total > 0.0) {
      for (double& v : p) v /= total;
    }
    return p;
  }
};

// Fractions of documents by modal type, ordered PublicTG, PublicTS, PersonTG, PersonTS.
inline std::array<double, 4> type_proportions(const PosteriorSummary& summary) {
  if (summary.labels.empty()) throw std::domain_error("type_proportions: empty summary");
  if (!summary.has_time_labels) throw std::domain_error("type_proportions: model has no time labels");
  std::array<long, 4> counts{};
  for (const auto& l : summary.labels) ++counts[static_cast<std::size_t>(tweet_type(l))];
  std::array<double, 4> out{};
  const double n = static_cast<double>(summary.labels.size());
  for (std::size_t k = 0; k < 4; ++k) out[k] = static_cast<double>(counts[k]) / n;
  return out;
}

// Documents per (user, epoch) cell for each modal topic.
inline std::map<std::pair<int, int>, std::map<std::int64_t, int>> cell_topic_frequencies(
    const PosteriorSummary& summary, const Corpus& corpus) {
  std::map<std::pair<int, int>, std::map<std::int64_t, int>> out;
  for (int d = 0; d < corpus.num_docs(); ++d) {
    const auto& doc = corpus.doc(d);
    ++out[{doc.user, doc.epoch}][summary.topics.at(static_cast<std::size_t>(d))];
  }
  return out;
}

// Highest-count words of a topic, ties by word id.
inline std::vector<int> top_words(const std::vector<double>& counts, std::size_t n) {
  std::vector<int> ids(counts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  n = std::min(n, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<long>(n), ids.end(), [&](int a, int b) {
    return counts[static_cast<std::size_t>(a)] != counts[static_cast<std::size_t>(b)]
               ? counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)]
               : a < b;
  });
  ids.resize(n);
  return ids;
}

inline nlohmann::ordered_json summary_to_json(const PosteriorSummary& s) {
  nlohmann::ordered_json j;
  j["format"] = "pietl-summary/1";
  j["model"] = s.model;
  j["provenance"] = s.provenance;
  j["has_time_labels"] = s.has_time_labels;
  j["num_samples"] = s.num_samples;
  j["vocab_size"] = s.vocab_size;
  auto docs = nlohmann::ordered_json::array();
  for (std::size_t d = 0; d < s.doc_ids.size(); ++d) {
    docs.push_back({s.doc_ids[d], s.labels[d].x, s.labels[d].y, s.topics[d]});
  }
  j["documents"] = std::move(docs);
  auto topics = nlohmann::ordered_json::array();
  for (const auto& [id, counts] : s.topic_word_counts) {
    auto sparse = nlohmann::ordered_json::array();
    for (std::size_t w = 0; w < counts.size(); ++w) {
      if (counts[w] != 0.0) sparse.push_back({w, counts[w]});
    }
    topics.push_back({{"id", id}, {"word_counts", std::move(sparse)}});
  }
  j["topics"] = std::move(topics);
  j["log_joint_trace"] = s.log_joint_trace;
  return j;
}

inline PosteriorSummary summary_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("format") != "pietl-summary/1") throw data_error("unsupported summary format");
    PosteriorSummary s;
    s.model = j.at("model").get<std::string>();
    s.provenance = j.at("provenance");
    s.has_time_labels = j.at("has_time_labels").get<bool>();
    s.num_samples = j.at("num_samples").get<int>();
    s.vocab_size = j.at("vocab_size").get<int>();
    for (const auto& row : j.at("documents")) {
      s.doc_ids.push_back(row.at(0).get<std::string>());
      s.labels.push_back({row.at(1).get<int>(), row.at(2).get<int>()});
      s.topics.push_back(row.at(3).get<std::int64_t>());
    }
    for (const auto& t : j.at("topics")) {
      std::vector<double> counts(static_cast<std::size_t>(s.vocab_size), 0.0);
      for (const auto& e : t.at("word_counts")) {
        counts.at(e.at(0).get<std::size_t>()) = e.at(1).get<double>();
      }
      s.topic_word_counts.emplace(t.at("id").get<std::int64_t>(), std::move(counts));
    }
    s.log_joint_trace = j.at("log_joint_trace").get<std::vector<double>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed summary: ") + e.what());
  }
}

inline void write_summary(const PosteriorSummary& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << summary_to_json(s).dump(1) << '\n';
}

inline PosteriorSummary read_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read summary " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("malformed summary " + path + ": " + e.what());
  }
  return summary_from_json(j);
}

// Checks that a summary lines up with the corpus it is used with.
inline void check_summary_matches(const PosteriorSummary& s, const Corpus& corpus) {
  if (s.num_docs() != corpus.num_docs()) {
    throw data_error("summary covers " + std::to_string(s.num_docs()) + " documents, corpus has " +
                     std::to_string(corpus.num_docs()));
  }
  for (int d = 0; d < corpus.num_docs(); ++d) {
    if (s.doc_ids[static_cast<std::size_t>(d)] != corpus.doc(d).doc_id) {
      throw data_error("summary document order does not match corpus at " + corpus.doc(d).doc_id);
    }
  }
  if (s.vocab_size != corpus.vocab_size()) throw data_error("summary vocabulary size does not match corpus");
}

}  // namespace pietl
