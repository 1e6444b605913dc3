#pragma once

// Personal-important-event timelines: topic merging by clustering balance,
// celebrity-related PublicTS filtering and representative-document choice.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pietl/corpus.hpp"
#include "pietl/errors.hpp"
#include "pietl/special.hpp"
#include "pietl/summary.hpp"

namespace pietl::timeline {

// Per-document error term inside a cluster. The literal -p log p of the
// per-token likelihood is increasing in p for p < 1/e, so with realistic
// vocabularies it rewards broader centers and merges everything; -log p is
// the default.
enum class IntraClusterError { neg_log_p, neg_p_log_p };

enum class ShapeStatistic { temporal, lexical };

struct ClusterOptions {
  double smoothing = 0.1;
  IntraClusterError intra = IntraClusterError::neg_log_p;
};

struct TopicCluster {
  std::vector<std::int64_t> members;  // topic ids, ascending
  std::vector<double> counts;         // summed member word counts
  std::vector<int> docs;              // corpus document indices, ascending
};

using Partition = std::vector<TopicCluster>;

// A topic with the documents that represent it.
struct TopicInput {
  std::int64_t id = 0;
  std::vector<double> counts;
  std::vector<int> docs;
};

inline TopicCluster singleton(const TopicInput& t) {
  TopicCluster c;
  c.members = {t.id};
  c.counts = t.counts;
  c.docs = t.docs;
  std::sort(c.docs.begin(), c.docs.end());
  return c;
}

inline TopicCluster merge(const TopicCluster& a, const TopicCluster& b) {
  TopicCluster c;
  std::merge(a.members.begin(), a.members.end(), b.members.begin(), b.members.end(), std::back_inserter(c.members));
  c.counts = a.counts;
  for (std::size_t w = 0; w < c.counts.size(); ++w) c.counts[w] += b.counts[w];
  std::merge(a.docs.begin(), a.docs.end(), b.docs.begin(), b.docs.end(), std::back_inserter(c.docs));
  c.docs.erase(std::unique(c.docs.begin(), c.docs.end()), c.docs.end());
  return c;
}

// (counts + s) / (total + V s)
inline std::vector<double> smoothed_center(const std::vector<double>& counts, double smoothing) {
  double total = 0.0;
  for (double v : counts) total += v;
  std::vector<double> p(counts.size());
  const double z = total + smoothing * static_cast<double>(counts.size());
  if (!(z > 0.0)) throw std::domain_error("cluster center has no mass");
  for (std::size_t w = 0; w < counts.size(); ++w) p[w] = (counts[w] + smoothing) / z;
  return p;
}

inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  double kl = 0.0;
  for (std::size_t w = 0; w < p.size(); ++w) {
    if (p[w] > 0.0) kl += p[w] * std::log(p[w] / q[w]);
  }
  return kl;
}

inline double symmetric_kl(const std::vector<double>& p, const std::vector<double>& q) {
  return kl_divergence(p, q) + kl_divergence(q, p);
}

// Mean per-token log-likelihood of a document under a word distribution.
inline double mean_token_loglik(const Document& doc, const std::vector<double>& center) {
  if (doc.tokens.empty()) throw std::domain_error("document has no tokens");
  double ll = 0.0;
  for (auto [w, n] : doc.word_counts) {
    const double p = center[static_cast<std::size_t>(w)];
    if (p <= 0.0) return kNegInf;
    ll += n * std::log(p);
  }
  return ll / doc.length();
}

namespace detail {

inline Partition canonical(Partition p) {
  for (auto& c : p) {
    std::sort(c.members.begin(), c.members.end());
    std::sort(c.docs.begin(), c.docs.end());
  }
  std::sort(p.begin(), p.end(), [](const TopicCluster& a, const TopicCluster& b) { return a.members < b.members; });
  return p;
}

}  // namespace detail

struct Balance {
  double intra = 0.0;  // Lambda
  double inter = 0.0;  // Omega
  double total() const { return intra + inter; }
};

// epsilon = Lambda + Omega. Lambda sums the per-document error of every
// member document under its smoothed cluster center (p = per-token geometric
// mean likelihood); Omega sums KL(cluster center || grand center).
inline Balance clustering_balance_parts(const Partition& partition, const Corpus& corpus,
                                        const ClusterOptions& opt = {}) {
  if (partition.empty()) throw std::domain_error("clustering_balance: empty partition");
  for (const auto& c : partition) {
    if (c.members.empty()) throw std::domain_error("clustering_balance: empty cluster");
  }
  const Partition p = detail::canonical(partition);
  std::vector<double> all(p.front().counts.size(), 0.0);
  for (const auto& c : p) {
    for (std::size_t w = 0; w < all.size(); ++w) all[w] += c.counts[w];
  }
  const auto grand = smoothed_center(all, opt.smoothing);
  Balance b;
  for (const auto& c : p) {
    const auto center = smoothed_center(c.counts, opt.smoothing);
    for (int d : c.docs) {
      const double lp = mean_token_loglik(corpus.doc(d), center);
      b.intra += opt.intra == IntraClusterError::neg_log_p ? -lp : -std::exp(lp) * lp;
    }
    b.inter += kl_divergence(center, grand);
  }
  return b;
}

inline double clustering_balance(const Partition& partition, const Corpus& corpus, const ClusterOptions& opt = {}) {
  return clustering_balance_parts(partition, corpus, opt).total();
}

struct MergeResult {
  Partition best;
  double best_balance = 0.0;
  std::vector<double> path;  // epsilon after 0, 1, 2, ... merges
};

// Greedy agglomeration: repeatedly merge the closest pair of clusters
// (symmetrized KL between smoothed centers; ties to the lexicographically
// first pair of member lists) and keep the partition with the lowest epsilon
// seen along the path (earliest on ties).
inline MergeResult merge_topics(const std::vector<TopicInput>& topics, const Corpus& corpus,
                                const ClusterOptions& opt = {}) {
  if (topics.empty()) throw std::domain_error("merge_topics: no topics");
  Partition current;
  for (const auto& t : topics) current.push_back(singleton(t));
  current = detail::canonical(std::move(current));
  MergeResult out;
  out.best = current;
  out.best_balance = clustering_balance(current, corpus, opt);
  out.path.push_back(out.best_balance);
  while (current.size() > 1) {
    std::vector<std::vector<double>> centers;
    for (const auto& c : current) centers.push_back(smoothed_center(c.counts, opt.smoothing));
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < current.size(); ++i) {
      for (std::size_t j = i + 1; j < current.size(); ++j) {
        const double d = symmetric_kl(centers[i], centers[j]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    TopicCluster merged = merge(current[bi], current[bj]);
    current.erase(current.begin() + static_cast<long>(bj));
    current[bi] = std::move(merged);
    current = detail::canonical(std::move(current));
    const double e = clustering_balance(current, corpus, opt);
    out.path.push_back(e);
    if (e < out.best_balance) {
      out.best_balance = e;
      out.best = current;
    }
  }
  return out;
}

// Pearson chi-square of b's counts against expectations proportional to a's
// shape. Bins where a is zero are folded into the next bin with nonzero
// expectation (the previous one at the end). Returns the upper-tail p-value
// with df = bins - 1; df = 0 gives p = 1.
struct ShapeTest {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

inline ShapeTest chi2_shape_test(const std::vector<double>& shape, const std::vector<double>& observed) {
  if (shape.size() != observed.size()) throw std::invalid_argument("chi2_shape: histograms differ in length");
  double ta = 0.0, tb = 0.0;
  for (double v : shape) {
    if (v < 0.0) throw std::domain_error("chi2_shape: negative count");
    ta += v;
  }
  for (double v : observed) {
    if (v < 0.0) throw std::domain_error("chi2_shape: negative count");
    tb += v;
  }
  if (!(ta > 0.0) || !(tb > 0.0)) throw std::domain_error("chi2_shape: all-zero profile");
  std::vector<double> e, o;
  double carry_o = 0.0;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (shape[k] > 0.0) {
      e.push_back(tb * shape[k] / ta);
      o.push_back(observed[k] + carry_o);
      carry_o = 0.0;
    } else {
      carry_o += observed[k];
    }
  }
  o.back() += carry_o;
  ShapeTest t;
  for (std::size_t k = 0; k < e.size(); ++k) t.statistic += (o[k] - e[k]) * (o[k] - e[k]) / e[k];
  t.df = static_cast<int>(e.size()) - 1;
  t.p_value = chi2_upper_tail(t.statistic, t.df);
  return t;
}

inline double chi2_shape_pvalue(const std::vector<double>& shape, const std::vector<double>& observed) {
  return chi2_shape_test(shape, observed).p_value;
}

// Argmax of the per-token geometric-mean likelihood under the normalized
// (unsmoothed) cluster center; ties to the smallest doc_id.
inline int select_tweet(const TopicCluster& cluster, const Corpus& corpus) {
  if (cluster.docs.empty()) throw std::domain_error("select_tweet: cluster has no documents");
  double total = 0.0;
  for (double v : cluster.counts) total += v;
  std::vector<double> center(cluster.counts.size(), 0.0);
  if (total > 0.0) {
    for (std::size_t w = 0; w < center.size(); ++w) center[w] = cluster.counts[w] / total;
  }
  int best = -1;
  double best_ll = 0.0;
  for (int d : cluster.docs) {
    const double ll = mean_token_loglik(corpus.doc(d), center);
    if (best < 0 || ll > best_ll ||
        (ll == best_ll && corpus.doc(d).doc_id < corpus.doc(best).doc_id)) {
      best = d;
      best_ll = ll;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Timelines

enum class Mode { ordinary, celebrity };

inline Mode parse_mode(const std::string& s) {
  if (s == "ordinary") return Mode::ordinary;
  if (s == "celebrity") return Mode::celebrity;
  throw std::invalid_argument("unknown timeline mode '" + s + "'");
}

inline const char* mode_name(Mode m) { return m == Mode::ordinary ? "ordinary" : "celebrity"; }

// user_id -> names and handles.
using NameTable = std::map<std::string, std::vector<std::string>>;

// Tab-separated "user_id<TAB>name" lines; a user may have several lines.
inline NameTable read_names(std::istream& in) {
  NameTable names;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw data_error("names line " + std::to_string(line_no) + ": expected user_id<TAB>name");
    }
    names[line.substr(0, tab)].push_back(line.substr(tab + 1));
  }
  return names;
}

inline NameTable read_names(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read names file " + path);
  return read_names(in);
}

struct TimelineOptions {
  Mode mode = Mode::ordinary;
  ClusterOptions cluster;
  ShapeStatistic shape = ShapeStatistic::temporal;
  double mention_threshold = 0.10;  // rule 1: "at least 10%"
  double shape_p_threshold = 0.5;   // rule 2: p-value strictly above
  std::size_t top_words = 10;
};

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Case-insensitive substring match of any name in any raw token.
inline bool mentions(const Document& doc, const std::vector<std::string>& names) {
  for (const auto& tok : doc.raw_tokens) {
    const std::string t = lower(tok);
    for (const auto& n : names) {
      if (!n.empty() && t.find(lower(n)) != std::string::npos) return true;
    }
  }
  return false;
}

inline double mention_fraction(const TopicCluster& c, const Corpus& corpus, const std::vector<std::string>& names) {
  if (c.docs.empty()) return 0.0;
  long hit = 0;
  for (int d : c.docs) hit += mentions(corpus.doc(d), names) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(c.docs.size());
}

inline std::vector<double> epoch_profile(const std::vector<int>& docs, const Corpus& corpus) {
  std::vector<double> h(static_cast<std::size_t>(corpus.num_epochs()), 0.0);
  for (int d : docs) h[static_cast<std::size_t>(corpus.doc(d).epoch)] += 1.0;
  return h;
}

inline std::vector<double> word_profile(const std::vector<int>& docs, const Corpus& corpus) {
  std::vector<double> h(static_cast<std::size_t>(corpus.vocab_size()), 0.0);
  for (int d : docs) {
    for (auto [w, n] : corpus.doc(d).word_counts) h[static_cast<std::size_t>(w)] += n;
  }
  return h;
}

struct CelebrityVerdict {
  double mention_fraction = 0.0;
  double shape_p = 0.0;
  double balance_with = 0.0;     // epsilon({D + L_j, other candidates})
  double balance_without = 0.0;  // epsilon({D, all candidates})
  bool rule1 = false, rule2 = false, rule3 = false;
  bool accepted() const { return rule1 && rule2 && rule3; }
};

// Evaluates the three rules for candidate `j`. `personal` is D, the user's
// PersonTS topics taken as one cluster.
inline CelebrityVerdict judge_candidate(std::size_t j, const Partition& candidates, const TopicCluster& personal,
                                        const std::vector<int>& user_docs, const std::vector<std::string>& names,
                                        const Corpus& corpus, const TimelineOptions& opt) {
  CelebrityVerdict v;
  const auto& cand = candidates.at(j);
  v.mention_fraction = mention_fraction(cand, corpus, names);
  v.rule1 = v.mention_fraction >= opt.mention_threshold;
  if (opt.shape == ShapeStatistic::temporal) {
    v.shape_p = chi2_shape_pvalue(epoch_profile(user_docs, corpus), epoch_profile(cand.docs, corpus));
  } else {
    v.shape_p = chi2_shape_pvalue(word_profile(user_docs, corpus), word_profile(cand.docs, corpus));
  }
  v.rule2 = v.shape_p > opt.shape_p_threshold;
  Partition without{personal};
  without.insert(without.end(), candidates.begin(), candidates.end());
  Partition with{merge(personal, cand)};
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (k != j) with.push_back(candidates[k]);
  }
  v.balance_without = clustering_balance(without, corpus, opt.cluster);
  v.balance_with = clustering_balance(with, corpus, opt.cluster);
  v.rule3 = v.balance_with <= v.balance_without;
  return v;
}

struct Entry {
  int epoch = 0;
  int cluster_id = 0;
  bool celebrity = false;
  std::vector<std::int64_t> topics;
  std::string doc_id;
  std::vector<std::string> top_words;
  std::vector<std::string> doc_ids;  // all member documents
};

struct Timeline {
  std::string user_id;
  Mode mode = Mode::ordinary;
  std::vector<Entry> entries;
  nlohmann::ordered_json provenance;
};

namespace detail {

inline std::vector<TopicInput> topic_inputs(const PosteriorSummary& s, const std::map<std::int64_t, std::vector<int>>& docs) {
  std::vector<TopicInput> out;
  for (const auto& [id, ds] : docs) {
    TopicInput t;
    t.id = id;
    auto it = s.topic_word_counts.find(id);
    if (it == s.topic_word_counts.end()) throw data_error("summary lacks word counts for topic " + std::to_string(id));
    t.counts = it->second;
    t.docs = ds;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace detail

// Ordinary mode: the user's PersonTS documents grouped by modal topic and
// merged. Celebrity mode adds the accepted clusters of the user's PublicTS
// topics (their documents being every PublicTS document of those topics).
inline Timeline build_timeline(const std::string& user_id, const PosteriorSummary& summary, const Corpus& corpus,
                               const TimelineOptions& opt = {}, const NameTable& names = {},
                               std::vector<CelebrityVerdict>* verdicts = nullptr) {
  const auto user = corpus.find_user(user_id);
  if (!user) throw std::out_of_range("unknown user " + user_id);
  check_summary_matches(summary, corpus);
  const std::vector<int> udocs = corpus.user_docs(*user);

  std::map<std::int64_t, std::vector<int>> personal_docs, public_topics;
  for (int d : udocs) {
    const auto z = summary.topics[static_cast<std::size_t>(d)];
    if (summary.is_person_ts(d)) personal_docs[z].push_back(d);
    if (summary.is_public_ts(d)) public_topics[z];
  }

  Timeline tl;
  tl.user_id = user_id;
  tl.mode = opt.mode;
  struct Pending {
    TopicCluster cluster;
    bool celebrity;
  };
  std::vector<Pending> pending;
  Partition personal;
  if (!personal_docs.empty()) {
    personal = merge_topics(detail::topic_inputs(summary, personal_docs), corpus, opt.cluster).best;
    for (const auto& c : personal) pending.push_back({c, false});
  }

  if (opt.mode == Mode::celebrity && !public_topics.empty()) {
    for (int d = 0; d < corpus.num_docs(); ++d) {
      const auto z = summary.topics[static_cast<std::size_t>(d)];
      if (summary.is_public_ts(d) && public_topics.contains(z)) public_topics[z].push_back(d);
    }
    const Partition candidates = merge_topics(detail::topic_inputs(summary, public_topics), corpus, opt.cluster).best;
    auto nit = names.find(user_id);
    const std::vector<std::string> user_names = nit == names.end() ? std::vector<std::string>{} : nit->second;
    TopicCluster all_personal;
    if (!personal.empty()) {
      all_personal = personal.front();
      for (std::size_t k = 1; k < personal.size(); ++k) all_personal = merge(all_personal, personal[k]);
    }
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      CelebrityVerdict v;
      if (personal.empty()) {
        // Without D rule 3 has nothing to compare against.
        v.mention_fraction = mention_fraction(candidates[j], corpus, user_names);
        v.rule1 = v.mention_fraction >= opt.mention_threshold;
        v.shape_p = opt.shape == ShapeStatistic::temporal
                        ? chi2_shape_pvalue(epoch_profile(udocs, corpus), epoch_profile(candidates[j].docs, corpus))
                        : chi2_shape_pvalue(word_profile(udocs, corpus), word_profile(candidates[j].docs, corpus));
        v.rule2 = v.shape_p > opt.shape_p_threshold;
        v.rule3 = false;
      } else {
        v = judge_candidate(j, candidates, all_personal, udocs, user_names, corpus, opt);
      }
      if (verdicts) verdicts->push_back(v);
      if (v.accepted()) pending.push_back({candidates[j], true});
    }
  }

  for (std::size_t k = 0; k < pending.size(); ++k) {
    const auto& c = pending[k].cluster;
    Entry e;
    e.cluster_id = static_cast<int>(k);
    e.celebrity = pending[k].celebrity;
    e.topics = c.members;
    const int rep = select_tweet(c, corpus);
    e.doc_id = corpus.doc(rep).doc_id;
    e.epoch = corpus.doc(rep).epoch;
    for (int w : top_words(c.counts, opt.top_words)) e.top_words.push_back(corpus.vocabulary().word(w));
    for (int d : c.docs) e.doc_ids.push_back(corpus.doc(d).doc_id);
    tl.entries.push_back(std::move(e));
  }
  std::stable_sort(tl.entries.begin(), tl.entries.end(), [](const Entry& a, const Entry& b) {
    return a.epoch != b.epoch ? a.epoch < b.epoch : a.cluster_id < b.cluster_id;
  });
  return tl;
}

// Documents a timeline predicts as PIE-related: every member document of
// every entry.
inline std::set<std::string> predicted_docs(const Timeline& tl) {
  std::set<std::string> out;
  for (const auto& e : tl.entries) out.insert(e.doc_ids.begin(), e.doc_ids.end());
  return out;
}

inline std::string join(const std::vector<std::string>& xs, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

// One line per entry: epoch, date range, cluster id, top words, representative.
inline std::string timeline_to_text(const Timeline& tl, const Corpus& corpus) {
  std::ostringstream os;
  os << "# timeline " << tl.user_id << " mode=" << mode_name(tl.mode) << '\n';
  for (const auto& e : tl.entries) {
    const auto d = corpus.find_doc(e.doc_id);
    os << e.epoch << '\t' << epoch_date_range(corpus, e.epoch) << '\t' << e.cluster_id << (e.celebrity ? "*" : "")
       << '\t' << join(e.top_words, " ") << '\t' << e.doc_id << ": " << join(corpus.doc(*d).raw_tokens, " ")
       << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json timeline_to_json(const Timeline& tl, const Corpus& corpus) {
  nlohmann::ordered_json j;
  j["format"] = "pietl-timeline/1";
  j["user_id"] = tl.user_id;
  j["mode"] = mode_name(tl.mode);
  j["provenance"] = tl.provenance;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : tl.entries) {
    nlohmann::ordered_json x;
    x["epoch"] = e.epoch;
    x["dates"] = epoch_date_range(corpus, e.epoch);
    x["cluster_id"] = e.cluster_id;
    x["celebrity"] = e.celebrity;
    x["topics"] = e.topics;
    x["top_words"] = e.top_words;
    x["representative"] = e.doc_id;
    x["text"] = join(corpus.doc(*corpus.find_doc(e.doc_id)).raw_tokens, " ");
    x["documents"] = e.doc_ids;
    entries.push_back(std::move(x));
  }
  j["entries"] = std::move(entries);
  return j;
}

}  // namespace pietl::timeline
