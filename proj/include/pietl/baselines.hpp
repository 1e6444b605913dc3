#pragma once

// Comparison systems: a fixed-dimension multi-level LDA with the same label
// scheme as the DPM, and the two reduced hierarchies (Person-DP per user,
// Public-DP without time labels).

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pietl/corpus.hpp"
#include "pietl/dpm.hpp"
#include "pietl/random.hpp"
#include "pietl/special.hpp"
#include "pietl/summary.hpp"

namespace pietl::baselines {

struct LdaConfig {
  int background_topics = 20;
  int epoch_topics = 5;      // per epoch
  int user_topics = 5;       // per user
  int cell_topics = 2;       // per (user, epoch)
  double topic_prior = 0.1;  // symmetric Dirichlet over a stratum's topics
  double word_prior = 0.1;   // symmetric Dirichlet over words
  double eta_x = 20.0;
  double eta_y = 20.0;
  dpm::Schedule schedule;

  void validate() const {
    if (background_topics < 1 || epoch_topics < 1 || user_topics < 1 || cell_topics < 1) {
      throw std::invalid_argument("LDA topic counts must be positive");
    }
    for (double v : {topic_prior, word_prior, eta_x, eta_y}) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("LDA priors must be positive and finite");
    }
    schedule.validate();
  }
};

// Topic ids are laid out stratum by stratum: background, then each epoch's
// block, each user's block, each cell's block.
class LdaLayout {
 public:
  LdaLayout(const LdaConfig& c, int users, int epochs) : c_(c), users_(users), epochs_(epochs) {}

  int size(int code) const {
    switch (code) {
      case 0: return c_.background_topics;
      case 1: return c_.epoch_topics;
      case 2: return c_.user_topics;
      default: return c_.cell_topics;
    }
  }

  // Stratum instance (row of the doc-topic count table) for a document.
  int group(int code, int user, int epoch) const {
    switch (code) {
      case 0: return 0;
      case 1: return 1 + epoch;
      case 2: return 1 + epochs_ + user;
      default: return 1 + epochs_ + users_ + user * epochs_ + epoch;
    }
  }
  int num_groups() const { return 1 + epochs_ + users_ + users_ * epochs_; }

  int first_topic(int code, int user, int epoch) const {
    const int b = c_.background_topics;
    const int e = b + epochs_ * c_.epoch_topics;
    const int u = e + users_ * c_.user_topics;
    switch (code) {
      case 0: return 0;
      case 1: return b + epoch * c_.epoch_topics;
      case 2: return e + user * c_.user_topics;
      default: return u + (user * epochs_ + epoch) * c_.cell_topics;
    }
  }
  int num_topics() const {
    return c_.background_topics + epochs_ * c_.epoch_topics + users_ * c_.user_topics +
           users_ * epochs_ * c_.cell_topics;
  }

 private:
  LdaConfig c_;
  int users_, epochs_;
};

// Collapsed Gibbs state. One topic per document, as in the DPM.
struct LdaState {
  const Corpus* corpus = nullptr;
  LdaConfig config;
  LdaLayout layout{LdaConfig{}, 0, 0};
  std::vector<int> label;  // label code
  std::vector<int> topic;  // global topic id
  std::vector<std::vector<int>> word_counts;
  std::vector<long> topic_totals;
  std::vector<std::vector<int>> group_counts;  // docs per topic within a stratum instance
  std::vector<int> group_totals;
  std::vector<std::array<int, 4>> label_counts;
  Rng rng;

  const Document& doc(int d) const { return corpus->doc(d); }
  int group_of(int d, int code) const { return layout.group(code, doc(d).user, doc(d).epoch); }
  int first_of(int d, int code) const { return layout.first_topic(code, doc(d).user, doc(d).epoch); }
};

namespace detail {

inline void move_doc(LdaState& s, int d, int sign) {
  const auto ud = static_cast<std::size_t>(d);
  const auto& doc = s.doc(d);
  const int k = s.topic[ud];
  const int code = s.label[ud];
  const int g = s.group_of(d, code);
  for (auto [w, n] : doc.word_counts) s.word_counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)] += sign * n;
  s.topic_totals[static_cast<std::size_t>(k)] += sign * doc.length();
  s.group_counts[static_cast<std::size_t>(g)][static_cast<std::size_t>(k - s.first_of(d, code))] += sign;
  s.group_totals[static_cast<std::size_t>(g)] += sign;
  s.label_counts[static_cast<std::size_t>(doc.user)][static_cast<std::size_t>(code)] += sign;
}

inline double lda_doc_loglik(const LdaState& s, const Document& doc, int k) {
  const auto& wc = s.word_counts[static_cast<std::size_t>(k)];
  const double lam = s.config.word_prior;
  double ll = 0.0;
  for (auto [w, n] : doc.word_counts) ll += log_rising(wc[static_cast<std::size_t>(w)] + lam, n);
  ll -= log_rising(static_cast<double>(s.topic_totals[static_cast<std::size_t>(k)]) + lam * s.corpus->vocab_size(),
                   doc.length());
  return ll;
}

}  // namespace detail

inline LdaState init_lda(const Corpus& corpus, const LdaConfig& config, std::uint64_t seed) {
  config.validate();
  if (corpus.num_docs() == 0) throw std::invalid_argument("fit_multilevel_lda: empty corpus");
  LdaState s;
  s.corpus = &corpus;
  s.config = config;
  s.layout = LdaLayout(config, corpus.num_users(), corpus.num_epochs());
  s.rng = Rng(seed);
  const auto K = static_cast<std::size_t>(s.layout.num_topics());
  s.word_counts.assign(K, std::vector<int>(static_cast<std::size_t>(corpus.vocab_size()), 0));
  s.topic_totals.assign(K, 0);
  s.group_counts.resize(static_cast<std::size_t>(s.layout.num_groups()));
  s.group_totals.assign(static_cast<std::size_t>(s.layout.num_groups()), 0);
  s.label_counts.assign(static_cast<std::size_t>(corpus.num_users()), {0, 0, 0, 0});
  for (int code = 0; code < 4; ++code) {
    for (int i = 0; i < corpus.num_users(); ++i) {
      for (int t = 0; t < corpus.num_epochs(); ++t) {
        s.group_counts[static_cast<std::size_t>(s.layout.group(code, i, t))].assign(
            static_cast<std::size_t>(s.layout.size(code)), 0);
      }
    }
  }
  s.label.resize(static_cast<std::size_t>(corpus.num_docs()));
  s.topic.resize(static_cast<std::size_t>(corpus.num_docs()));
  for (int d = 0; d < corpus.num_docs(); ++d) {
    const int code = static_cast<int>(s.rng.below(4));
    s.label[static_cast<std::size_t>(d)] = code;
    s.topic[static_cast<std::size_t>(d)] =
        s.first_of(d, code) + static_cast<int>(s.rng.below(static_cast<std::size_t>(s.layout.size(code))));
    detail::move_doc(s, d, +1);
  }
  return s;
}

// Log marginal of a document under one stratum, topics summed out, plus the
// per-topic log weights (for reuse when drawing the topic).
inline double lda_stratum_marginal(const LdaState& s, int d, int code, std::vector<double>& logw) {
  const int g = s.group_of(d, code);
  const int first = s.first_of(d, code);
  const int n = s.layout.size(code);
  const auto& gc = s.group_counts[static_cast<std::size_t>(g)];
  const double a = s.config.topic_prior;
  const double denom = std::log(s.group_totals[static_cast<std::size_t>(g)] + n * a);
  logw.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    logw[static_cast<std::size_t>(j)] =
        std::log(gc[static_cast<std::size_t>(j)] + a) - denom + detail::lda_doc_loglik(s, s.doc(d), first + j);
  }
  return log_sum_exp(logw);
}

inline void lda_sweep(LdaState& s) {
  std::array<std::vector<double>, 4> logw;
  for (int d = 0; d < s.corpus->num_docs(); ++d) {
    const auto ud = static_cast<std::size_t>(d);
    detail::move_doc(s, d, -1);
    std::array<double, 4> marg{};
    for (int code = 0; code < 4; ++code) marg[static_cast<std::size_t>(code)] = lda_stratum_marginal(s, d, code, logw[static_cast<std::size_t>(code)]);
    const auto& lc = s.label_counts[static_cast<std::size_t>(s.doc(d).user)];
    int x = s.label[ud] / 2;
    int y = s.label[ud] % 2;
    {
      std::array<double, 2> lp{};
      for (int xx = 0; xx < 2; ++xx) {
        lp[static_cast<std::size_t>(xx)] = std::log(dpm::label_prior_x(lc, xx, y, s.config.eta_x)) +
                                           marg[static_cast<std::size_t>(2 * xx + y)];
      }
      x = static_cast<int>(s.rng.categorical_log(lp));
    }
    {
      std::array<double, 2> lp{};
      for (int yy = 0; yy < 2; ++yy) {
        lp[static_cast<std::size_t>(yy)] = std::log(dpm::label_prior_y(lc, x, yy, s.config.eta_y)) +
                                           marg[static_cast<std::size_t>(2 * x + yy)];
      }
      y = static_cast<int>(s.rng.categorical_log(lp));
    }
    const int code = 2 * x + y;
    s.label[ud] = code;
    s.topic[ud] = s.first_of(d, code) + static_cast<int>(s.rng.categorical_log(logw[static_cast<std::size_t>(code)]));
    detail::move_doc(s, d, +1);
  }
}

// Collapsed Gibbs over fixed-dimension topics. Topic rows in the summary are
// posterior-mean word distributions scaled to the average token count, so
// every listed topic normalizes to 1.
inline PosteriorSummary fit_multilevel_lda(const Corpus& corpus, const LdaConfig& config, std::uint64_t seed) {
  LdaState s = init_lda(corpus, config, seed);
  const auto& sch = config.schedule;
  for (int i = 0; i < sch.burn_in; ++i) lda_sweep(s);
  const auto D = static_cast<std::size_t>(corpus.num_docs());
  const auto K = static_cast<std::size_t>(s.layout.num_topics());
  const auto V = static_cast<std::size_t>(corpus.vocab_size());
  std::vector<std::array<int, 4>> label_votes(D, {0, 0, 0, 0});
  std::vector<std::vector<int>> topic_votes(D, std::vector<int>(K, 0));
  std::vector<std::vector<double>> sums(K, std::vector<double>(V, 0.0));
  for (int j = 0; j < sch.samples; ++j) {
    for (int t = 0; t < sch.thin; ++t) lda_sweep(s);
    for (std::size_t d = 0; d < D; ++d) {
      ++label_votes[d][static_cast<std::size_t>(s.label[d])];
      ++topic_votes[d][static_cast<std::size_t>(s.topic[d])];
    }
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t w = 0; w < V; ++w) sums[k][w] += s.word_counts[k][w];
    }
  }
  PosteriorSummary out;
  out.model = "mlda";
  out.has_time_labels = true;
  out.num_samples = sch.samples;
  out.vocab_size = corpus.vocab_size();
  for (std::size_t d = 0; d < D; ++d) {
    out.doc_ids.push_back(corpus.doc(static_cast<int>(d)).doc_id);
    const auto& lv = label_votes[d];
    out.labels.push_back(dpm::code_labels(static_cast<int>(std::max_element(lv.begin(), lv.end()) - lv.begin())));
    const auto& tv = topic_votes[d];
    out.topics.push_back(std::max_element(tv.begin(), tv.end()) - tv.begin());
  }
  for (std::size_t k = 0; k < K; ++k) {
    double total = 0.0;
    for (double v : sums[k]) total += v;
    if (total <= 0.0) continue;
    std::vector<double> avg(V);
    for (std::size_t w = 0; w < V; ++w) avg[w] = sums[k][w] / sch.samples;
    out.topic_word_counts.emplace(static_cast<std::int64_t>(k), std::move(avg));
  }
  return out;
}

// Two-level hierarchy over one user's stream: G_i -> G_i^t, only y latent.
inline PosteriorSummary fit_person_dp(const Corpus& single_user, const dpm::Hyperparams& hyper,
                                      const dpm::Schedule& schedule, std::uint64_t seed) {
  if (single_user.num_users() != 1) throw std::domain_error("person-dp expects a single-user corpus");
  return dpm::run_chain(single_user, hyper, schedule, seed, dpm::ModelKind::person_dp);
}

// Person-DP fitted independently for every user of a corpus; topic ids of
// user i are offset so they stay distinct in the combined summary. User i's
// chain uses seed + i.
inline PosteriorSummary fit_person_dp_all(const Corpus& corpus, const dpm::Hyperparams& hyper,
                                          const dpm::Schedule& schedule, std::uint64_t seed) {
  PosteriorSummary out;
  out.model = dpm::model_name(dpm::ModelKind::person_dp);
  out.has_time_labels = true;
  out.num_samples = schedule.samples;
  out.vocab_size = corpus.vocab_size();
  const auto D = static_cast<std::size_t>(corpus.num_docs());
  out.doc_ids.resize(D);
  out.labels.resize(D);
  out.topics.resize(D);
  std::int64_t offset = 0;
  for (int i = 0; i < corpus.num_users(); ++i) {
    const Corpus sub = corpus.restrict_to_user(i);
    if (sub.num_docs() == 0) continue;
    const PosteriorSummary part = fit_person_dp(sub, hyper, schedule, seed + static_cast<std::uint64_t>(i));
    std::int64_t max_id = -1;
    for (const auto& [id, counts] : part.topic_word_counts) {
      out.topic_word_counts.emplace(id + offset, counts);
      max_id = std::max(max_id, id);
    }
    for (int d = 0; d < sub.num_docs(); ++d) {
      const auto full = static_cast<std::size_t>(*corpus.find_doc(part.doc_ids[static_cast<std::size_t>(d)]));
      out.doc_ids[full] = part.doc_ids[static_cast<std::size_t>(d)];
      out.labels[full] = part.labels[static_cast<std::size_t>(d)];
      out.topics[full] = part.topics[static_cast<std::size_t>(d)] + offset;
    }
    offset += max_id + 1;
  }
  return out;
}

// Two-level hierarchy G_0 -> G_i with latent x only; y is reported unlabeled.
inline PosteriorSummary fit_public_dp(const Corpus& corpus, const dpm::Hyperparams& hyper,
                                      const dpm::Schedule& schedule, std::uint64_t seed) {
  return dpm::run_chain(corpus, hyper, schedule, seed, dpm::ModelKind::public_dp);
}

}  // namespace pietl::baselines
