#pragma once

// Four-level Dirichlet Process mixture sampler.
//
// The model is a tree of restaurants sharing one set of topic atoms:
//
//   G_0 (global, alpha) --+-- G_t   (per epoch, gamma)
//                         +-- G_i   (per user, mu) --- G_i^t (per user-epoch, kappa)
//
// A document's label pair (x, y) picks the measure it draws its single topic
// from: (0,0) G_0, (0,1) G_t, (1,0) G_i, (1,1) G_i^t. Every measure carries an
// explicit weight vector over the instantiated topics plus a remainder mass
// for all uninstantiated ones. Documents are single-customer restaurants, so
// the "tables" a measure contributes to its parent are the draws from the
// parent: each restaurant's customers are the documents drawing from it
// directly plus the tables of its children.
//
// The same engine runs the two-level DP baselines by swapping the tree
// (see ModelKind).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "pietl/corpus.hpp"
#include "pietl/errors.hpp"
#include "pietl/random.hpp"
#include "pietl/special.hpp"
#include "pietl/summary.hpp"

namespace pietl::dpm {

struct Hyperparams {
  double alpha = 1.0;  // G_0 ~ DP(alpha, H)
  double gamma = 1.0;  // G_t ~ DP(gamma, G_0)
  double mu = 1.0;     // G_i ~ DP(mu, G_0)
  double kappa = 1.0;  // G_i^t ~ DP(kappa, G_i)
  double eta_x = 20.0;
  double eta_y = 20.0;
  double lambda = 0.1;  // symmetric Dirichlet prior on topic-word distributions
  double concentration_shape = 1.0;
  double concentration_rate = 1.0;
  bool resample_concentrations = true;
  int concentration_iterations = 20;

  void validate() const {
    for (double v : {alpha, gamma, mu, kappa, eta_x, eta_y, lambda, concentration_shape, concentration_rate}) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("hyperparameters must be positive and finite");
    }
    if (concentration_iterations < 1) throw std::invalid_argument("concentration_iterations must be >= 1");
  }
};

struct Schedule {
  int burn_in = 200;
  int samples = 100;
  int thin = 1;

  void validate() const {
    if (burn_in < 0 || samples < 1 || thin < 1) throw std::invalid_argument("schedule values must be positive");
  }
};

enum class ModelKind { dpm, person_dp, public_dp };

inline const char* model_name(ModelKind k) {
  switch (k) {
    case ModelKind::dpm: return "dpm";
    case ModelKind::person_dp: return "person-dp";
    case ModelKind::public_dp: return "public-dp";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "dpm") return ModelKind::dpm;
  if (s == "person-dp") return ModelKind::person_dp;
  if (s == "public-dp") return ModelKind::public_dp;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

// Which concentration parameter governs a restaurant.
enum class Level { global, epoch, user, user_epoch };

inline double concentration(const Hyperparams& h, Level level) {
  switch (level) {
    case Level::global: return h.alpha;
    case Level::epoch: return h.gamma;
    case Level::user: return h.mu;
    case Level::user_epoch: return h.kappa;
  }
  return h.alpha;
}

inline double& concentration(Hyperparams& h, Level level) {
  switch (level) {
    case Level::global: return h.alpha;
    case Level::epoch: return h.gamma;
    case Level::user: return h.mu;
    case Level::user_epoch: return h.kappa;
  }
  return h.alpha;
}

// Weights over instantiated topics plus the remainder mass, with cached logs.
struct Stick {
  std::vector<double> weights;
  double remainder = 1.0;
  std::vector<double> log_weights;
  double log_remainder = 0.0;

  void refresh_logs() {
    log_weights.resize(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k) log_weights[k] = std::log(weights[k]);
    log_remainder = std::log(remainder);
  }

  double total() const {
    double s = remainder;
    for (double w : weights) s += w;
    return s;
  }
};

struct Restaurant {
  int parent = -1;
  Level level = Level::global;
  std::vector<int> children;
  Stick stick;
  std::vector<int> direct;     // documents drawing from this measure, per topic slot
  std::vector<int> tables;     // draws from the parent measure, per topic slot
  std::vector<int> customers;  // direct + children's tables, refreshed by resample_tables
};

// Label code of a document: 2x + y.
inline int label_code(LabelPair l) { return 2 * l.x + (l.y == kUnlabeled ? 0 : l.y); }
inline LabelPair code_labels(int code) { return {code / 2, code % 2}; }

struct SamplerState {
  const Corpus* corpus = nullptr;
  ModelKind kind = ModelKind::dpm;
  Hyperparams hyper;
  std::vector<Restaurant> restaurants;            // parents precede children
  std::vector<std::array<int, 4>> doc_restaurant;  // per document, per label code; -1 if unavailable
  std::uint8_t allowed_codes = 0xF;                // bit c set if label code c is used by the model

  std::vector<int> label;  // per document: label code
  std::vector<int> topic;  // per document: topic slot

  std::vector<std::int64_t> topic_ids;  // stable id per slot
  std::int64_t next_topic_id = 0;
  std::vector<std::vector<int>> word_counts;  // E_z^(w), [slot][word]
  std::vector<long> topic_totals;             // E_z^(.)
  std::vector<std::array<int, 4>> label_counts;  // E_i^(x,y), per user, by label code

  Rng rng;
  long sweeps = 0;

  int num_topics() const { return static_cast<int>(topic_ids.size()); }
  int num_docs() const { return static_cast<int>(label.size()); }
  const Corpus& data() const { return *corpus; }

  bool code_allowed(int code) const { return (allowed_codes >> code) & 1U; }
  bool x_latent() const { return code_allowed(0) && code_allowed(2); }
  bool y_latent() const { return code_allowed(2) && code_allowed(3); }

  LabelPair labels(int d) const {
    LabelPair l = code_labels(label[static_cast<std::size_t>(d)]);
    if (kind == ModelKind::public_dp) l.y = kUnlabeled;
    return l;
  }

  int restaurant_of(int d) const {
    return doc_restaurant[static_cast<std::size_t>(d)][static_cast<std::size_t>(label[static_cast<std::size_t>(d)])];
  }

  std::optional<int> slot_of(std::int64_t id) const {
    auto it = std::find(topic_ids.begin(), topic_ids.end(), id);
    if (it == topic_ids.end()) return std::nullopt;
    return static_cast<int>(it - topic_ids.begin());
  }

  // Restaurant indices for the full DPM tree.
  int root() const { return 0; }
  int epoch_restaurant(int t) const { return 1 + t; }
  int user_restaurant(int i) const { return 1 + data().num_epochs() + i; }
  int cell_restaurant(int i, int t) const {
    return 1 + data().num_epochs() + data().num_users() + i * data().num_epochs() + t;
  }
};

inline constexpr int kNewTopic = -1;

// ---------------------------------------------------------------------------
// Topology

namespace detail {

inline int add_restaurant(SamplerState& s, int parent, Level level) {
  Restaurant r;
  r.parent = parent;
  r.level = level;
  s.restaurants.push_back(std::move(r));
  const int id = static_cast<int>(s.restaurants.size()) - 1;
  if (parent >= 0) s.restaurants[static_cast<std::size_t>(parent)].children.push_back(id);
  return id;
}

inline void build_topology(SamplerState& s) {
  const Corpus& c = s.data();
  const int T = c.num_epochs();
  const int I = c.num_users();
  s.restaurants.clear();
  s.doc_restaurant.assign(static_cast<std::size_t>(c.num_docs()), {-1, -1, -1, -1});
  switch (s.kind) {
    case ModelKind::dpm: {
      const int root = add_restaurant(s, -1, Level::global);
      for (int t = 0; t < T; ++t) add_restaurant(s, root, Level::epoch);
      for (int i = 0; i < I; ++i) add_restaurant(s, root, Level::user);
      for (int i = 0; i < I; ++i) {
        for (int t = 0; t < T; ++t) add_restaurant(s, s.user_restaurant(i), Level::user_epoch);
      }
      for (int d = 0; d < c.num_docs(); ++d) {
        const auto& doc = c.doc(d);
        s.doc_restaurant[static_cast<std::size_t>(d)] = {root, s.epoch_restaurant(doc.epoch),
                                                         s.user_restaurant(doc.user),
                                                         s.cell_restaurant(doc.user, doc.epoch)};
      }
      s.allowed_codes = 0xF;
      break;
    }
    case ModelKind::person_dp: {
      if (I != 1) throw std::domain_error("person-dp expects a single-user corpus");
      const int root = add_restaurant(s, -1, Level::user);
      for (int t = 0; t < T; ++t) add_restaurant(s, root, Level::user_epoch);
      for (int d = 0; d < c.num_docs(); ++d) {
        s.doc_restaurant[static_cast<std::size_t>(d)] = {-1, -1, root, 1 + c.doc(d).epoch};
      }
      s.allowed_codes = 0b1100;
      break;
    }
    case ModelKind::public_dp: {
      const int root = add_restaurant(s, -1, Level::global);
      for (int i = 0; i < I; ++i) add_restaurant(s, root, Level::user);
      for (int d = 0; d < c.num_docs(); ++d) {
        s.doc_restaurant[static_cast<std::size_t>(d)] = {root, -1, 1 + c.doc(d).user, -1};
      }
      s.allowed_codes = 0b0101;
      break;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bookkeeping

inline void remove_document(SamplerState& s, int d) {
  const auto ud = static_cast<std::size_t>(d);
  const auto& doc = s.data().doc(d);
  const auto k = static_cast<std::size_t>(s.topic[ud]);
  auto& counts = s.word_counts[k];
  for (auto [w, n] : doc.word_counts) counts[static_cast<std::size_t>(w)] -= n;
  s.topic_totals[k] -= doc.length();
  --s.restaurants[static_cast<std::size_t>(s.restaurant_of(d))].direct[k];
  --s.label_counts[static_cast<std::size_t>(doc.user)][static_cast<std::size_t>(s.label[ud])];
}

inline void add_document(SamplerState& s, int d) {
  const auto ud = static_cast<std::size_t>(d);
  const auto& doc = s.data().doc(d);
  const auto k = static_cast<std::size_t>(s.topic[ud]);
  auto& counts = s.word_counts[k];
  for (auto [w, n] : doc.word_counts) counts[static_cast<std::size_t>(w)] += n;
  s.topic_totals[k] += doc.length();
  ++s.restaurants[static_cast<std::size_t>(s.restaurant_of(d))].direct[k];
  ++s.label_counts[static_cast<std::size_t>(doc.user)][static_cast<std::size_t>(s.label[ud])];
}

// Instantiates a new topic slot. Every weight vector gains a component by
// beta-splitting its remainder: Beta(1, alpha) at the root, and
// Beta(c * parent_new, c * parent_remainder) below it. When the topic is
// created because a document in restaurant `origin` drew its remainder, the
// new atom is a size-biased pick from that restaurant's remainder, which adds
// one to the first Beta parameter at every restaurant between the root and
// `origin`.
inline int add_topic(SamplerState& s, int origin = -1) {
  std::vector<char> on_path(s.restaurants.size(), 0);
  for (int r = origin; r >= 0; r = s.restaurants[static_cast<std::size_t>(r)].parent) {
    on_path[static_cast<std::size_t>(r)] = 1;
  }
  const int slot = s.num_topics();
  s.topic_ids.push_back(s.next_topic_id++);
  s.word_counts.emplace_back(static_cast<std::size_t>(s.data().vocab_size()), 0);
  s.topic_totals.push_back(0);
  for (std::size_t ri = 0; ri < s.restaurants.size(); ++ri) {
    auto& r = s.restaurants[ri];
    double frac;
    if (r.parent < 0) {
      frac = s.rng.beta(1.0, concentration(s.hyper, r.level));
    } else {
      const Stick& p = s.restaurants[static_cast<std::size_t>(r.parent)].stick;
      const double c = concentration(s.hyper, r.level);
      frac = s.rng.beta(c * p.weights.back() + (on_path[ri] ? 1.0 : 0.0), c * p.remainder);
    }
    const double w = frac * r.stick.remainder;
    r.stick.weights.push_back(w);
    r.stick.remainder -= w;
    if (r.stick.remainder < 0.0) r.stick.remainder = 0.0;
    r.stick.log_weights.push_back(std::log(w));
    r.stick.log_remainder = std::log(r.stick.remainder);
    r.direct.push_back(0);
    r.tables.push_back(0);
    r.customers.push_back(0);
  }
  return slot;
}

// Removes an unused topic slot; its weight returns to each remainder.
inline void remove_topic(SamplerState& s, int slot) {
  const auto k = static_cast<std::size_t>(slot);
  for (auto& r : s.restaurants) {
    r.stick.remainder += r.stick.weights[k];
    r.stick.weights.erase(r.stick.weights.begin() + slot);
    r.stick.refresh_logs();
    r.direct.erase(r.direct.begin() + slot);
    r.tables.erase(r.tables.begin() + slot);
    r.customers.erase(r.customers.begin() + slot);
  }
  s.topic_ids.erase(s.topic_ids.begin() + slot);
  s.word_counts.erase(s.word_counts.begin() + slot);
  s.topic_totals.erase(s.topic_totals.begin() + slot);
  for (int& z : s.topic) {
    if (z > slot) --z;
  }
}

// Recomputes every count cache from the assignment vectors (used after
// loading a checkpoint or swapping the corpus).
inline void rebuild_caches(SamplerState& s) {
  const Corpus& c = s.data();
  const auto K = static_cast<std::size_t>(s.num_topics());
  s.word_counts.assign(K, std::vector<int>(static_cast<std::size_t>(c.vocab_size()), 0));
  s.topic_totals.assign(K, 0);
  s.label_counts.assign(static_cast<std::size_t>(c.num_users()), {0, 0, 0, 0});
  for (auto& r : s.restaurants) r.direct.assign(K, 0);
  for (int d = 0; d < c.num_docs(); ++d) add_document(s, d);
}

inline void refresh_customers(SamplerState& s) {
  for (std::size_t r = s.restaurants.size(); r-- > 0;) {
    auto& rest = s.restaurants[r];
    rest.customers = rest.direct;
    for (int ch : rest.children) {
      const auto& child = s.restaurants[static_cast<std::size_t>(ch)];
      for (std::size_t k = 0; k < rest.customers.size(); ++k) rest.customers[k] += child.tables[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Likelihood

// log Pr(v | topic) with the topic-word distribution integrated out:
//   Gamma(E + V lambda) / Gamma(E + N_v + V lambda) * prod_w Gamma(E_w + N_v^w + lambda) / Gamma(E_w + lambda)
// For kNewTopic the counts are all zero.
inline double doc_loglik(const SamplerState& s, const Document& doc, int slot) {
  const double lambda = s.hyper.lambda;
  const double v_lambda = lambda * s.data().vocab_size();
  if (slot == kNewTopic) {
    double ll = -log_rising(v_lambda, doc.length());
    for (auto [w, n] : doc.word_counts) ll += log_rising(lambda, n);
    return ll;
  }
  if (slot < 0 || slot >= s.num_topics()) {
    throw std::domain_error("doc_loglik: topic slot " + std::to_string(slot) + " is not active");
  }
  const auto& counts = s.word_counts[static_cast<std::size_t>(slot)];
  double ll = -log_rising(static_cast<double>(s.topic_totals[static_cast<std::size_t>(slot)]) + v_lambda,
                          doc.length());
  for (auto [w, n] : doc.word_counts) {
    ll += log_rising(static_cast<double>(counts[static_cast<std::size_t>(w)]) + lambda, n);
  }
  return ll;
}

inline double doc_loglik(const SamplerState& s, int d, int slot) { return doc_loglik(s, s.data().doc(d), slot); }

// Per-topic log-likelihoods of one document; the last entry is the new topic.
struct DocScores {
  std::vector<double> loglik;
  std::array<double, 4> log_marginal{kNegInf, kNegInf, kNegInf, kNegInf};  // per label code
};

inline double log_marginal_for(const Stick& stick, std::span<const double> loglik) {
  const std::size_t K = stick.weights.size();
  double hi = loglik[K] + stick.log_remainder;
  for (std::size_t k = 0; k < K; ++k) hi = std::max(hi, loglik[k] + stick.log_weights[k]);
  if (hi == kNegInf) return kNegInf;
  double acc = std::exp(loglik[K] + stick.log_remainder - hi);
  for (std::size_t k = 0; k < K; ++k) acc += std::exp(loglik[k] + stick.log_weights[k] - hi);
  return hi + std::log(acc);
}

inline DocScores score_document(const SamplerState& s, int d) {
  DocScores out;
  const auto& doc = s.data().doc(d);
  const int K = s.num_topics();
  out.loglik.resize(static_cast<std::size_t>(K) + 1);
  for (int k = 0; k < K; ++k) out.loglik[static_cast<std::size_t>(k)] = doc_loglik(s, doc, k);
  out.loglik[static_cast<std::size_t>(K)] = doc_loglik(s, doc, kNewTopic);
  for (int code = 0; code < 4; ++code) {
    if (!s.code_allowed(code)) continue;
    const int r = s.doc_restaurant[static_cast<std::size_t>(d)][static_cast<std::size_t>(code)];
    out.log_marginal[static_cast<std::size_t>(code)] =
        log_marginal_for(s.restaurants[static_cast<std::size_t>(r)].stick, out.loglik);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Topic and label draws

// Draws z for a document whose statistics have been removed, from the measure
// selected by its current label. Drawing the remainder instantiates a topic.
inline int sample_topic(SamplerState& s, int d, const DocScores& scores) {
  const int r = s.restaurant_of(d);
  const Stick& stick = s.restaurants[static_cast<std::size_t>(r)].stick;
  const std::size_t K = stick.weights.size();
  std::vector<double> logp(K + 1);
  for (std::size_t k = 0; k < K; ++k) logp[k] = scores.loglik[k] + stick.log_weights[k];
  logp[K] = scores.loglik[K] + stick.log_remainder;
  const std::size_t pick = s.rng.categorical_log(logp);
  if (pick == K) return add_topic(s, r);
  return static_cast<int>(pick);
}

inline int sample_topic(SamplerState& s, int d) { return sample_topic(s, d, score_document(s, d)); }

// Collapsed label-preference factor for choosing x given y:
//   (E_i^(x,y) + eta_x) / (E_i^(.,y) + 2 eta_x)
inline double label_prior_x(const std::array<int, 4>& counts, int x, int y, double eta_x) {
  const double num = counts[static_cast<std::size_t>(2 * x + y)] + eta_x;
  const double den = counts[static_cast<std::size_t>(y)] + counts[static_cast<std::size_t>(2 + y)] + 2.0 * eta_x;
  return num / den;
}

// Same for y given x: (E_i^(x,y) + eta_y) / (E_i^(x,.) + 2 eta_y).
inline double label_prior_y(const std::array<int, 4>& counts, int x, int y, double eta_y) {
  const double num = counts[static_cast<std::size_t>(2 * x + y)] + eta_y;
  const double den = counts[static_cast<std::size_t>(2 * x)] + counts[static_cast<std::size_t>(2 * x + 1)] + 2.0 * eta_y;
  return num / den;
}

// Normalized Pr(x = 0), Pr(x = 1) given y, from the per-code log marginals.
inline std::array<double, 2> x_posterior(const std::array<int, 4>& counts, int y,
                                         const std::array<double, 4>& log_marginal, double eta_x) {
  std::array<double, 2> lp{};
  for (int x = 0; x < 2; ++x) {
    lp[static_cast<std::size_t>(x)] =
        std::log(label_prior_x(counts, x, y, eta_x)) + log_marginal[static_cast<std::size_t>(2 * x + y)];
  }
  const double z = log_sum_exp(lp[0], lp[1]);
  return {std::exp(lp[0] - z), std::exp(lp[1] - z)};
}

inline std::array<double, 2> y_posterior(const std::array<int, 4>& counts, int x,
                                         const std::array<double, 4>& log_marginal, double eta_y) {
  std::array<double, 2> lp{};
  for (int y = 0; y < 2; ++y) {
    lp[static_cast<std::size_t>(y)] =
        std::log(label_prior_y(counts, x, y, eta_y)) + log_marginal[static_cast<std::size_t>(2 * x + y)];
  }
  const double z = log_sum_exp(lp[0], lp[1]);
  return {std::exp(lp[0] - z), std::exp(lp[1] - z)};
}

// Draws x given the current y, then y given the new x, with the per-user
// Beta preferences integrated out and the topic marginalized (including the
// new-topic term). Labels a model does not treat as latent are kept fixed.
inline LabelPair sample_labels(SamplerState& s, int d, const DocScores& scores) {
  const auto& counts = s.label_counts[static_cast<std::size_t>(s.data().doc(d).user)];
  LabelPair cur = code_labels(s.label[static_cast<std::size_t>(d)]);
  if (s.x_latent()) {
    const auto p = x_posterior(counts, cur.y, scores.log_marginal, s.hyper.eta_x);
    cur.x = s.rng.uniform() < p[1] ? 1 : 0;
  }
  if (s.y_latent()) {
    const auto p = y_posterior(counts, cur.x, scores.log_marginal, s.hyper.eta_y);
    cur.y = s.rng.uniform() < p[1] ? 1 : 0;
  }
  if (s.kind == ModelKind::public_dp) cur.y = kUnlabeled;
  return cur;
}

inline LabelPair sample_labels(SamplerState& s, int d) { return sample_labels(s, d, score_document(s, d)); }

// ---------------------------------------------------------------------------
// Tables, weights, concentrations

// Number of tables after seating `customers` customers of one dish by
// sequential CRP simulation, where `new_table_weight` is the concentration
// times the parent weight of the dish. The first customer always opens a table.
inline int crp_table_count(Rng& rng, int customers, double new_table_weight) {
  if (customers <= 0) return 0;
  int tables = 1;
  for (int j = 1; j < customers; ++j) {
    if (rng.uniform() * (new_table_weight + j) < new_table_weight) ++tables;
  }
  return tables;
}

// Drops topic slots that have no documents anywhere (and hence no tables).
inline void prune_topics(SamplerState& s) {
  for (int k = s.num_topics() - 1; k >= 0; --k) {
    long docs = 0;
    for (const auto& r : s.restaurants) docs += r.direct[static_cast<std::size_t>(k)];
    if (docs == 0) remove_topic(s, k);
  }
}

// Children are visited before parents so that table counts propagate upward.
inline void resample_tables(SamplerState& s) {
  const std::size_t K = static_cast<std::size_t>(s.num_topics());
  for (std::size_t ri = s.restaurants.size(); ri-- > 0;) {
    auto& r = s.restaurants[ri];
    r.customers = r.direct;
    for (int ch : r.children) {
      const auto& child = s.restaurants[static_cast<std::size_t>(ch)];
      for (std::size_t k = 0; k < K; ++k) r.customers[k] += child.tables[k];
    }
    if (r.parent < 0) {
      // Draws from the continuous base measure: one table per dish.
      for (std::size_t k = 0; k < K; ++k) r.tables[k] = r.customers[k] > 0 ? 1 : 0;
      continue;
    }
    const auto& parent = s.restaurants[static_cast<std::size_t>(r.parent)].stick;
    const double c = concentration(s.hyper, r.level);
    for (std::size_t k = 0; k < K; ++k) {
      r.tables[k] = crp_table_count(s.rng, r.customers[k], c * parent.weights[k]);
    }
  }
  prune_topics(s);
}

// Parents first: each weight vector is drawn from its Dirichlet posterior
// given its customers and the freshly drawn parent weights.
//   root:  Dir(n_1, ..., n_K, c)
//   child: Dir(n_1 + c p_1, ..., n_K + c p_K, c p_rem)
// where n_k counts the restaurant's customers of dish k (direct documents
// plus the tables of its children) and p is the parent's weight vector.
inline std::vector<double> weight_posterior(std::span<const int> customers, double c, const Stick* parent) {
  const std::size_t K = customers.size();
  std::vector<double> params(K + 1);
  for (std::size_t k = 0; k < K; ++k) params[k] = customers[k] + (parent ? c * parent->weights[k] : 0.0);
  params[K] = parent ? c * parent->remainder : c;
  return params;
}

inline void resample_weights(SamplerState& s) {
  for (auto& r : s.restaurants) {
    const Stick* parent = r.parent < 0 ? nullptr : &s.restaurants[static_cast<std::size_t>(r.parent)].stick;
    const auto params = weight_posterior(r.customers, concentration(s.hyper, r.level), parent);
    std::vector<double> draw = s.rng.dirichlet(params);
    r.stick.remainder = draw.back();
    draw.pop_back();
    r.stick.weights = std::move(draw);
    r.stick.refresh_logs();
  }
}

// One restaurant's contribution to a concentration update.
struct RestaurantCounts {
  long customers = 0;
  long tables = 0;
};

// Auxiliary-variable update of a DP concentration shared by a group of
// restaurants, under a Gamma(shape, rate) prior. Restaurants without
// customers carry no information; with none at all this is a prior draw.
inline double resample_concentration(Rng& rng, double current, std::span<const RestaurantCounts> groups,
                                     double shape, double rate, int iterations) {
  double c = current;
  for (int it = 0; it < iterations; ++it) {
    double a = shape;
    double b = rate;
    for (const auto& g : groups) {
      if (g.customers <= 0) continue;
      const double n = static_cast<double>(g.customers);
      const double w = rng.beta(c + 1.0, n);
      const bool s = rng.uniform() * (n + c) < n;
      a += static_cast<double>(g.tables) - (s ? 1.0 : 0.0);
      b -= std::log(w);
    }
    c = rng.gamma(a, b);
    if (!(c > 0.0)) c = std::numeric_limits<double>::min();
  }
  return c;
}

inline void resample_concentrations(SamplerState& s) {
  for (Level level : {Level::global, Level::epoch, Level::user, Level::user_epoch}) {
    std::vector<RestaurantCounts> groups;
    for (const auto& r : s.restaurants) {
      if (r.level != level) continue;
      RestaurantCounts g;
      for (int n : r.customers) g.customers += n;
      for (int m : r.tables) g.tables += m;
      groups.push_back(g);
    }
    if (groups.empty()) continue;
    double& c = concentration(s.hyper, level);
    c = resample_concentration(s.rng, c, groups, s.hyper.concentration_shape, s.hyper.concentration_rate,
                               s.hyper.concentration_iterations);
  }
}

// ---------------------------------------------------------------------------
// Diagnostics

// log p(words | z) + sum_v log weight(z_v) + log p(labels) with the label
// preferences integrated out.
inline double log_joint(const SamplerState& s) {
  const double lambda = s.hyper.lambda;
  const double v_lambda = lambda * s.data().vocab_size();
  double lj = 0.0;
  for (int k = 0; k < s.num_topics(); ++k) {
    const auto uk = static_cast<std::size_t>(k);
    lj -= log_rising(v_lambda, s.topic_totals[uk]);
    for (int n : s.word_counts[uk]) {
      if (n > 0) lj += log_rising(lambda, n);
    }
  }
  for (int d = 0; d < s.num_docs(); ++d) {
    const auto& st = s.restaurants[static_cast<std::size_t>(s.restaurant_of(d))].stick;
    lj += st.log_weights[static_cast<std::size_t>(s.topic[static_cast<std::size_t>(d)])];
  }
  auto log_beta = [](double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); };
  for (const auto& c : s.label_counts) {
    if (s.x_latent()) {
      lj += log_beta(c[2] + c[3] + s.hyper.eta_x, c[0] + c[1] + s.hyper.eta_x) - log_beta(s.hyper.eta_x, s.hyper.eta_x);
    }
    if (s.y_latent()) {
      lj += log_beta(c[1] + c[3] + s.hyper.eta_y, c[0] + c[2] + s.hyper.eta_y) - log_beta(s.hyper.eta_y, s.hyper.eta_y);
    }
  }
  return lj;
}

// Compares every cache against a from-scratch recount. Returns the list of
// violations; empty means consistent. `tables_current` additionally checks
// the table invariants that hold right after resample_tables.
inline std::vector<std::string> audit(const SamplerState& s, bool tables_current = true) {
  std::vector<std::string> bad;
  const Corpus& c = s.data();
  const auto K = static_cast<std::size_t>(s.num_topics());
  auto fail = [&](std::string msg) { bad.push_back(std::move(msg)); };

  if (s.word_counts.size() != K || s.topic_totals.size() != K) fail("topic tables size mismatch");
  {
    auto ids = s.topic_ids;
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) fail("duplicate topic ids");
  }
  std::vector<std::vector<int>> words(K, std::vector<int>(static_cast<std::size_t>(c.vocab_size()), 0));
  std::vector<long> totals(K, 0);
  std::vector<std::array<int, 4>> labels(static_cast<std::size_t>(c.num_users()), {0, 0, 0, 0});
  std::vector<std::vector<int>> direct(s.restaurants.size(), std::vector<int>(K, 0));
  for (int d = 0; d < c.num_docs(); ++d) {
    const auto ud = static_cast<std::size_t>(d);
    const int code = s.label[ud];
    if (code < 0 || code > 3 || !s.code_allowed(code)) {
      fail("document " + std::to_string(d) + " has a disallowed label");
      continue;
    }
    const int z = s.topic[ud];
    if (z < 0 || static_cast<std::size_t>(z) >= K) {
      fail("document " + std::to_string(d) + " has an inactive topic");
      continue;
    }
    const auto& doc = c.doc(d);
    for (auto [w, n] : doc.word_counts) words[static_cast<std::size_t>(z)][static_cast<std::size_t>(w)] += n;
    totals[static_cast<std::size_t>(z)] += doc.length();
    ++labels[static_cast<std::size_t>(doc.user)][static_cast<std::size_t>(code)];
    ++direct[static_cast<std::size_t>(s.restaurant_of(d))][static_cast<std::size_t>(z)];
  }
  if (bad.empty()) {
    if (words != s.word_counts) fail("topic word counts differ from recount");
    if (totals != s.topic_totals) fail("topic totals differ from recount");
    for (std::size_t k = 0; k < K; ++k) {
      long sum = 0;
      for (int n : s.word_counts[k]) sum += n;
      if (sum != s.topic_totals[k]) fail("topic total is not the sum of its word counts");
    }
    if (labels != s.label_counts) fail("label counts differ from recount");
    for (std::size_t r = 0; r < s.restaurants.size(); ++r) {
      if (direct[r] != s.restaurants[r].direct) fail("restaurant " + std::to_string(r) + " document counts differ");
    }
  }
  for (int u = 0; u < c.num_users() && u < static_cast<int>(s.label_counts.size()); ++u) {
    const auto& lc = s.label_counts[static_cast<std::size_t>(u)];
    if (lc[0] + lc[1] + lc[2] + lc[3] != static_cast<int>(c.user_docs(u).size())) {
      fail("label counts of user " + std::to_string(u) + " do not sum to its documents");
    }
  }
  for (std::size_t ri = 0; ri < s.restaurants.size(); ++ri) {
    const auto& r = s.restaurants[ri];
    const auto& st = r.stick;
    if (st.weights.size() != K || r.tables.size() != K) fail("restaurant " + std::to_string(ri) + " size mismatch");
    if (std::fabs(st.total() - 1.0) > 1e-9) fail("weights of restaurant " + std::to_string(ri) + " do not sum to 1");
    if (st.remainder < 0.0 || std::any_of(st.weights.begin(), st.weights.end(), [](double w) { return w < 0.0; })) {
      fail("negative weight in restaurant " + std::to_string(ri));
    }
    if (!tables_current) continue;
    std::vector<int> customers = r.direct;
    for (int ch : r.children) {
      for (std::size_t k = 0; k < K; ++k) customers[k] += s.restaurants[static_cast<std::size_t>(ch)].tables[k];
    }
    if (customers != r.customers) fail("customer cache of restaurant " + std::to_string(ri) + " is stale");
    for (std::size_t k = 0; k < K && k < r.tables.size(); ++k) {
      if (r.tables[k] > customers[k] || (customers[k] > 0 && r.tables[k] < 1)) {
        fail("restaurant " + std::to_string(ri) + " has an impossible table count");
        break;
      }
    }
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Initialization and sweeps

// x, y from the collapsed prior urn; z by sequential CRP seeding (each
// document joins topic k with weight n_k * Pr(v | k) or opens a new one with
// weight alpha * Pr(v | new)); then one table per dish and weights from
// their posteriors.
inline SamplerState init_state(const Corpus& corpus, const Hyperparams& hyper, std::uint64_t seed,
                               ModelKind kind = ModelKind::dpm) {
  hyper.validate();
  if (corpus.num_docs() == 0) throw std::invalid_argument("init_state: empty corpus");
  SamplerState s;
  s.corpus = &corpus;
  s.kind = kind;
  s.hyper = hyper;
  s.rng = Rng(seed);
  detail::build_topology(s);
  const int D = corpus.num_docs();
  s.label.assign(static_cast<std::size_t>(D), 0);
  s.topic.assign(static_cast<std::size_t>(D), 0);
  s.label_counts.assign(static_cast<std::size_t>(corpus.num_users()), {0, 0, 0, 0});

  std::vector<long> docs_per_topic;
  for (int d = 0; d < D; ++d) {
    const auto& doc = corpus.doc(d);
    auto& lc = s.label_counts[static_cast<std::size_t>(doc.user)];
    const int n = lc[0] + lc[1] + lc[2] + lc[3];
    int x = s.kind == ModelKind::person_dp ? 1 : 0;
    int y = 0;
    if (s.x_latent()) x = s.rng.uniform() * (n + 2.0 * hyper.eta_x) < (lc[2] + lc[3] + hyper.eta_x) ? 1 : 0;
    if (s.y_latent()) y = s.rng.uniform() * (n + 2.0 * hyper.eta_y) < (lc[1] + lc[3] + hyper.eta_y) ? 1 : 0;
    const int code = 2 * x + y;
    s.label[static_cast<std::size_t>(d)] = code;

    const int K = s.num_topics();
    std::vector<double> logp(static_cast<std::size_t>(K) + 1);
    for (int k = 0; k < K; ++k) {
      logp[static_cast<std::size_t>(k)] =
          std::log(static_cast<double>(docs_per_topic[static_cast<std::size_t>(k)])) + doc_loglik(s, doc, k);
    }
    logp[static_cast<std::size_t>(K)] = std::log(hyper.alpha) + doc_loglik(s, doc, kNewTopic);
    int z = static_cast<int>(s.rng.categorical_log(logp));
    if (z == K) {
      z = add_topic(s, s.restaurant_of(d));
      docs_per_topic.push_back(0);
    }
    ++docs_per_topic[static_cast<std::size_t>(z)];
    s.topic[static_cast<std::size_t>(d)] = z;
    add_document(s, d);
  }
  for (std::size_t ri = s.restaurants.size(); ri-- > 0;) {
    auto& r = s.restaurants[ri];
    r.customers = r.direct;
    for (int ch : r.children) {
      for (std::size_t k = 0; k < r.customers.size(); ++k) r.customers[k] += s.restaurants[static_cast<std::size_t>(ch)].tables[k];
    }
    for (std::size_t k = 0; k < r.customers.size(); ++k) r.tables[k] = r.customers[k] > 0 ? 1 : 0;
  }
  resample_weights(s);
  return s;
}

// Starts from given label codes and topic indices (>= 0, any range; unused
// indices are dropped). Used for warm starts and for diagnosing the posterior
// around known assignments.
inline SamplerState init_state_from(const Corpus& corpus, const Hyperparams& hyper, std::uint64_t seed,
                                    const std::vector<int>& labels, const std::vector<int>& topics,
                                    ModelKind kind = ModelKind::dpm) {
  hyper.validate();
  const auto D = static_cast<std::size_t>(corpus.num_docs());
  if (labels.size() != D || topics.size() != D) throw std::invalid_argument("init_state_from: size mismatch");
  SamplerState s;
  s.corpus = &corpus;
  s.kind = kind;
  s.hyper = hyper;
  s.rng = Rng(seed);
  detail::build_topology(s);
  std::map<int, int> slot;
  for (int z : topics) {
    if (z < 0) throw std::invalid_argument("init_state_from: negative topic");
    slot.emplace(z, 0);
  }
  for (auto& [z, k] : slot) {
    k = s.num_topics();
    s.topic_ids.push_back(s.next_topic_id++);
  }
  s.label = labels;
  s.topic.resize(D);
  for (std::size_t d = 0; d < D; ++d) {
    if (labels[d] < 0 || labels[d] > 3 || !s.code_allowed(labels[d])) {
      throw std::invalid_argument("init_state_from: label not available in this model");
    }
    s.topic[d] = slot.at(topics[d]);
  }
  const std::size_t K = slot.size();
  for (auto& r : s.restaurants) {
    r.stick.weights.assign(K, 0.0);
    r.tables.assign(K, 0);
  }
  rebuild_caches(s);
  for (std::size_t ri = s.restaurants.size(); ri-- > 0;) {
    auto& r = s.restaurants[ri];
    r.customers = r.direct;
    for (int ch : r.children) {
      for (std::size_t k = 0; k < K; ++k) r.customers[k] += s.restaurants[static_cast<std::size_t>(ch)].tables[k];
    }
    for (std::size_t k = 0; k < K; ++k) r.tables[k] = r.customers[k] > 0 ? 1 : 0;
  }
  resample_weights(s);
  return s;
}

// One pass over every document (labels, then topic), followed by tables,
// concentrations and weights.
inline void gibbs_sweep(SamplerState& s) {
  for (int d = 0; d < s.num_docs(); ++d) {
    remove_document(s, d);
    const DocScores scores = score_document(s, d);
    s.label[static_cast<std::size_t>(d)] = label_code(sample_labels(s, d, scores));
    s.topic[static_cast<std::size_t>(d)] = sample_topic(s, d, scores);
    add_document(s, d);
  }
  resample_tables(s);
  if (s.hyper.resample_concentrations) resample_concentrations(s);
  resample_weights(s);
  ++s.sweeps;
}

// ---------------------------------------------------------------------------
// Posterior collection

class SummaryCollector {
 public:
  explicit SummaryCollector(const SamplerState& s)
      : label_votes_(static_cast<std::size_t>(s.num_docs()), {0, 0, 0, 0}),
        topic_votes_(static_cast<std::size_t>(s.num_docs())),
        vocab_size_(s.data().vocab_size()) {}

  void collect(const SamplerState& s) {
    ++samples_;
    for (int d = 0; d < s.num_docs(); ++d) {
      const auto ud = static_cast<std::size_t>(d);
      ++label_votes_[ud][static_cast<std::size_t>(s.label[ud])];
      const std::int64_t id = s.topic_ids[static_cast<std::size_t>(s.topic[ud])];
      auto& votes = topic_votes_[ud];
      auto it = std::find_if(votes.begin(), votes.end(), [id](const auto& p) { return p.first == id; });
      if (it == votes.end()) {
        votes.emplace_back(id, 1);
      } else {
        ++it->second;
      }
    }
    for (int k = 0; k < s.num_topics(); ++k) {
      auto& acc = word_sums_[s.topic_ids[static_cast<std::size_t>(k)]];
      if (acc.empty()) acc.assign(static_cast<std::size_t>(vocab_size_), 0.0);
      const auto& counts = s.word_counts[static_cast<std::size_t>(k)];
      for (std::size_t w = 0; w < counts.size(); ++w) acc[w] += counts[w];
    }
  }

  int samples() const { return samples_; }

  // Modal labels (ties to the lower code) and topics (ties to the lower id).
  PosteriorSummary finish(const SamplerState& s) const {
    PosteriorSummary out;
    out.model = model_name(s.kind);
    out.has_time_labels = s.kind != ModelKind::public_dp;
    out.num_samples = samples_;
    out.vocab_size = vocab_size_;
    for (int d = 0; d < s.num_docs(); ++d) {
      const auto ud = static_cast<std::size_t>(d);
      out.doc_ids.push_back(s.data().doc(d).doc_id);
      const auto& lv = label_votes_[ud];
      const int code = static_cast<int>(std::max_element(lv.begin(), lv.end()) - lv.begin());
      LabelPair l = code_labels(code);
      if (s.kind == ModelKind::public_dp) l.y = kUnlabeled;
      out.labels.push_back(l);
      std::int64_t best = -1;
      int best_votes = -1;
      for (const auto& [id, v] : topic_votes_[ud]) {
        if (v > best_votes || (v == best_votes && id < best)) {
          best = id;
          best_votes = v;
        }
      }
      out.topics.push_back(best);
    }
    for (const auto& [id, sums] : word_sums_) {
      std::vector<double> avg(sums.size());
      for (std::size_t w = 0; w < sums.size(); ++w) avg[w] = sums[w] / samples_;
      out.topic_word_counts.emplace(id, std::move(avg));
    }
    return out;
  }

 private:
  std::vector<std::array<int, 4>> label_votes_;
  std::vector<std::vector<std::pair<std::int64_t, int>>> topic_votes_;
  std::map<std::int64_t, std::vector<double>> word_sums_;
  int vocab_size_ = 0;
  int samples_ = 0;
};

inline void check_finite(double lj, long sweep) {
  if (!std::isfinite(lj)) throw numerical_error("log-joint is not finite after sweep " + std::to_string(sweep));
}

// Burn-in, then `samples` states collected every `thin` sweeps. The log-joint
// trace covers every sweep.
inline PosteriorSummary run_chain(SamplerState& s, const Schedule& schedule) {
  schedule.validate();
  std::vector<double> trace;
  for (int i = 0; i < schedule.burn_in; ++i) {
    gibbs_sweep(s);
    trace.push_back(log_joint(s));
    check_finite(trace.back(), s.sweeps);
  }
  SummaryCollector collector(s);
  for (int j = 0; j < schedule.samples; ++j) {
    for (int t = 0; t < schedule.thin; ++t) {
      gibbs_sweep(s);
      trace.push_back(log_joint(s));
      check_finite(trace.back(), s.sweeps);
    }
    collector.collect(s);
  }
  PosteriorSummary out = collector.finish(s);
  out.log_joint_trace = std::move(trace);
  return out;
}

inline PosteriorSummary run_chain(const Corpus& corpus, const Hyperparams& hyper, const Schedule& schedule,
                                  std::uint64_t seed, ModelKind kind = ModelKind::dpm) {
  schedule.validate();
  SamplerState s = init_state(corpus, hyper, seed, kind);
  return run_chain(s, schedule);
}

// ---------------------------------------------------------------------------
// Checkpoints: plain text, doubles in hex-float so resumption is exact.

namespace detail {

inline std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double unhex(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw data_error("checkpoint: bad number '" + tok + "'");
  return v;
}

inline std::string expect_key(std::istream& in, const char* key) {
  std::string k;
  if (!(in >> k) || k != key) throw data_error(std::string("checkpoint: expected '") + key + "'");
  return k;
}

template <typename T>
T read_value(std::istream& in) {
  T v;
  if (!(in >> v)) throw data_error("checkpoint: truncated");
  return v;
}

inline double read_double(std::istream& in) { return unhex(read_value<std::string>(in)); }

}  // namespace detail

inline void save_checkpoint(const SamplerState& s, std::ostream& out) {
  using detail::hex;
  const Hyperparams& h = s.hyper;
  out << "pietl-checkpoint 1\n";
  out << "model " << model_name(s.kind) << '\n';
  out << "sweeps " << s.sweeps << '\n';
  out << "hyper " << hex(h.alpha) << ' ' << hex(h.gamma) << ' ' << hex(h.mu) << ' ' << hex(h.kappa) << ' '
      << hex(h.eta_x) << ' ' << hex(h.eta_y) << ' ' << hex(h.lambda) << ' ' << hex(h.concentration_shape) << ' '
      << hex(h.concentration_rate) << ' ' << (h.resample_concentrations ? 1 : 0) << ' '
      << h.concentration_iterations << '\n';
  out << "topics " << s.num_topics() << ' ' << s.next_topic_id;
  for (auto id : s.topic_ids) out << ' ' << id;
  out << '\n';
  out << "docs " << s.num_docs() << '\n';
  for (int d = 0; d < s.num_docs(); ++d) {
    out << s.data().doc(d).doc_id << ' ' << s.label[static_cast<std::size_t>(d)] << ' '
        << s.topic[static_cast<std::size_t>(d)] << '\n';
  }
  out << "restaurants " << s.restaurants.size() << '\n';
  for (const auto& r : s.restaurants) {
    out << hex(r.stick.remainder);
    for (double w : r.stick.weights) out << ' ' << hex(w);
    for (int t : r.tables) out << ' ' << t;
    out << '\n';
  }
  out << "rng " << s.rng.state() << '\n';
}

// Restores a state saved by save_checkpoint against the same corpus.
inline SamplerState load_checkpoint(std::istream& in, const Corpus& corpus) {
  using namespace detail;
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "pietl-checkpoint" || version != 1) {
    throw data_error("not a pietl checkpoint");
  }
  SamplerState s;
  s.corpus = &corpus;
  expect_key(in, "model");
  s.kind = parse_model_kind(read_value<std::string>(in));
  expect_key(in, "sweeps");
  s.sweeps = read_value<long>(in);
  expect_key(in, "hyper");
  Hyperparams& h = s.hyper;
  h.alpha = read_double(in);
  h.gamma = read_double(in);
  h.mu = read_double(in);
  h.kappa = read_double(in);
  h.eta_x = read_double(in);
  h.eta_y = read_double(in);
  h.lambda = read_double(in);
  h.concentration_shape = read_double(in);
  h.concentration_rate = read_double(in);
  h.resample_concentrations = read_value<int>(in) != 0;
  h.concentration_iterations = read_value<int>(in);
  expect_key(in, "topics");
  const int K = read_value<int>(in);
  s.next_topic_id = read_value<std::int64_t>(in);
  for (int k = 0; k < K; ++k) s.topic_ids.push_back(read_value<std::int64_t>(in));
  expect_key(in, "docs");
  const int D = read_value<int>(in);
  if (D != corpus.num_docs()) throw data_error("checkpoint does not match the corpus (document count)");
  detail::build_topology(s);
  s.label.resize(static_cast<std::size_t>(D));
  s.topic.resize(static_cast<std::size_t>(D));
  for (int d = 0; d < D; ++d) {
    const auto id = read_value<std::string>(in);
    if (id != corpus.doc(d).doc_id) throw data_error("checkpoint does not match the corpus at " + id);
    s.label[static_cast<std::size_t>(d)] = read_value<int>(in);
    s.topic[static_cast<std::size_t>(d)] = read_value<int>(in);
    if (s.topic[static_cast<std::size_t>(d)] < 0 || s.topic[static_cast<std::size_t>(d)] >= K) {
      throw data_error("checkpoint: topic slot out of range");
    }
    if (!s.code_allowed(s.label[static_cast<std::size_t>(d)])) throw data_error("checkpoint: invalid label");
  }
  expect_key(in, "restaurants");
  const auto R = read_value<std::size_t>(in);
  if (R != s.restaurants.size()) throw data_error("checkpoint: restaurant count mismatch");
  for (auto& r : s.restaurants) {
    r.stick.remainder = read_double(in);
    r.stick.weights.resize(static_cast<std::size_t>(K));
    for (auto& w : r.stick.weights) w = read_double(in);
    r.stick.refresh_logs();
    r.tables.resize(static_cast<std::size_t>(K));
    for (auto& t : r.tables) t = read_value<int>(in);
  }
  expect_key(in, "rng");
  std::string rest;
  std::getline(in, rest);
  s.rng.set_state(rest);
  rebuild_caches(s);
  refresh_customers(s);
  return s;
}

}  // namespace pietl::dpm
