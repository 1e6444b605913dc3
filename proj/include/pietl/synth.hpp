#pragma once

// Forward simulator for the four-level model. Produces record-format corpora
// with known per-document labels and topics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "pietl/corpus.hpp"
#include "pietl/dpm.hpp"
#include "pietl/errors.hpp"
#include "pietl/random.hpp"

namespace pietl::synth {

struct GenConfig {
  int users = 20;
  int epochs = 20;
  int vocab_size = 500;
  int docs_per_cell = 12;
  int words_per_doc = 10;
  dpm::Hyperparams hyper;
  int truncation = 50;       // atoms in the truncated G_0
  double sharpness = 0.01;   // generator Dirichlet parameter off each atom's support block
  double support_weight = 1.0;  // Dirichlet parameter on the support block
  std::optional<double> personal_rate;  // forces pi_x^i for every user
  std::optional<double> time_rate;      // forces pi_y^i for every user
  std::int64_t origin = 1262304000;     // 2010-01-01T00:00:00Z
  std::int64_t epoch_length = 7 * kSecondsPerDay;

  void validate() const {
    if (users < 1 || epochs < 1 || vocab_size < 1 || docs_per_cell < 1 || words_per_doc < 1) {
      throw std::invalid_argument("GenConfig: counts must be positive");
    }
    if (truncation < 1) throw std::invalid_argument("GenConfig: truncation must be >= 1");
    if (!(sharpness > 0.0) || !(support_weight > 0.0)) throw std::invalid_argument("GenConfig: atom priors must be positive");
    for (auto r : {personal_rate, time_rate}) {
      if (r && (*r < 0.0 || *r > 1.0)) throw std::invalid_argument("GenConfig: forced rates must lie in [0, 1]");
    }
    if (epoch_length <= 0) throw std::invalid_argument("GenConfig: epoch_length must be positive");
    hyper.validate();
  }
};

// I=20, T=20, V=500, 12 documents per cell (4,800 documents), truncation 30.
// Children are peaked draws around few parent atoms, and the per-user label
// rates are skewed (eta = 0.1) so that the four strata are identifiable: with
// Beta(20, 20) rates even the true measures classify only ~75% of documents.
inline GenConfig separable_preset() {
  GenConfig c;
  c.users = 20;
  c.epochs = 20;
  c.vocab_size = 500;
  c.docs_per_cell = 12;
  c.words_per_doc = 12;
  c.truncation = 30;
  c.sharpness = 0.01;
  c.hyper.alpha = 30.0;
  c.hyper.gamma = 0.15;
  c.hyper.mu = 3.0;
  c.hyper.kappa = 0.1;
  c.hyper.eta_x = 0.1;
  c.hyper.eta_y = 0.1;
  return c;
}

// The Geweke-sized model: V=5, I=2, T=2, 20 documents.
inline GenConfig tiny_preset() {
  GenConfig c;
  c.users = 2;
  c.epochs = 2;
  c.vocab_size = 5;
  c.docs_per_cell = 5;
  c.words_per_doc = 4;
  c.truncation = 10;
  c.sharpness = 0.5;
  return c;
}

inline GenConfig preset(const std::string& name) {
  if (name == "separable") return separable_preset();
  if (name == "tiny") return tiny_preset();
  throw std::invalid_argument("unknown preset '" + name + "'");
}

// Sampler settings for fitting a generated corpus: the generator's eta and
// lambda, concentrations started at 1 and resampled.
inline dpm::Hyperparams sampler_hyper(const GenConfig& c) {
  dpm::Hyperparams h = c.hyper;
  h.alpha = h.gamma = h.mu = h.kappa = 1.0;
  h.resample_concentrations = true;
  return h;
}

struct TruthLabel {
  int x = 0;
  int y = 0;
  int z = 0;
};

struct PlantedEvent {
  std::string user_id;
  int epoch = 0;
  int topic = 0;
  std::vector<std::string> doc_ids;
};

struct GroundTruth {
  std::map<std::string, TruthLabel> labels;        // by doc_id
  std::vector<std::vector<double>> topics;         // phi_k over generator words w000..
  std::vector<std::string> words;                  // generator vocabulary
  std::vector<PlantedEvent> events;                // PersonTS (user, epoch, topic) groups
  // The truncated measures: r, psi_t, beta_i, pi_it (indexed i * T + t).
  std::vector<double> r;
  std::vector<std::vector<double>> psi, beta, pi;

  const TruthLabel& at(const std::string& doc_id) const {
    auto it = labels.find(doc_id);
    if (it == labels.end()) throw std::out_of_range("no ground truth for " + doc_id);
    return it->second;
  }
};

struct Generated {
  std::vector<DocumentRecord> records;
  Corpus corpus;
  GroundTruth truth;
};

namespace detail {

inline std::string padded(const char* prefix, int value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

inline int digits(int n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

}  // namespace detail

inline std::string event_name(const std::string& user_id, int epoch, int topic) {
  return user_id + "/t" + std::to_string(epoch) + "/k" + std::to_string(topic);
}

inline Generated generate(const GenConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const int K = config.truncation;
  const int V = config.vocab_size;
  const auto& h = config.hyper;

  // G_0 by truncated stick-breaking; the last atom takes what is left.
  std::vector<double> r(static_cast<std::size_t>(K));
  double left = 1.0;
  for (int k = 0; k < K - 1; ++k) {
    const double b = rng.beta(1.0, h.alpha);
    r[static_cast<std::size_t>(k)] = b * left;
    left -= r[static_cast<std::size_t>(k)];
  }
  r[static_cast<std::size_t>(K - 1)] = std::max(left, 0.0);

  auto draw_child = [&](const std::vector<double>& parent, double c) {
    std::vector<double> params(parent.size());
    for (std::size_t k = 0; k < parent.size(); ++k) params[k] = c * parent[k];
    return rng.dirichlet(params);
  };
  std::vector<std::vector<double>> psi, beta, pi;
  for (int t = 0; t < config.epochs; ++t) psi.push_back(draw_child(r, h.gamma));
  for (int i = 0; i < config.users; ++i) beta.push_back(draw_child(r, h.mu));
  for (int i = 0; i < config.users; ++i) {
    for (int t = 0; t < config.epochs; ++t) pi.push_back(draw_child(beta[static_cast<std::size_t>(i)], h.kappa));
  }

  // Atoms lean on disjoint blocks of the vocabulary.
  GroundTruth truth;
  const int wd = detail::digits(std::max(V - 1, 1));
  for (int w = 0; w < V; ++w) truth.words.push_back(detail::padded("w", w, wd));
  for (int k = 0; k < K; ++k) {
    const int lo = static_cast<int>(static_cast<long>(k) * V / K);
    const int hi = std::max(static_cast<int>(static_cast<long>(k + 1) * V / K), lo + 1);
    std::vector<double> params(static_cast<std::size_t>(V), config.sharpness);
    for (int w = lo; w < hi && w < V; ++w) params[static_cast<std::size_t>(w)] = config.support_weight;
    truth.topics.push_back(rng.dirichlet(params));
  }

  std::vector<double> px(static_cast<std::size_t>(config.users)), py(static_cast<std::size_t>(config.users));
  for (int i = 0; i < config.users; ++i) {
    px[static_cast<std::size_t>(i)] = config.personal_rate ? *config.personal_rate : rng.beta(h.eta_x, h.eta_x);
    py[static_cast<std::size_t>(i)] = config.time_rate ? *config.time_rate : rng.beta(h.eta_y, h.eta_y);
  }

  Generated out;
  const int ud = detail::digits(std::max(config.users - 1, 1));
  const long total = static_cast<long>(config.users) * config.epochs * config.docs_per_cell;
  const int dd = detail::digits(static_cast<int>(std::max(total - 1, 1L)));
  std::map<std::tuple<int, int, int>, std::size_t> event_index;
  long n = 0;
  for (int t = 0; t < config.epochs; ++t) {
    for (int i = 0; i < config.users; ++i) {
      const std::string user = detail::padded("u", i, ud);
      for (int j = 0; j < config.docs_per_cell; ++j) {
        TruthLabel lab;
        lab.x = rng.uniform() < px[static_cast<std::size_t>(i)] ? 1 : 0;
        lab.y = rng.uniform() < py[static_cast<std::size_t>(i)] ? 1 : 0;
        const std::vector<double>* g = nullptr;
        switch (2 * lab.x + lab.y) {
          case 0: g = &r; break;
          case 1: g = &psi[static_cast<std::size_t>(t)]; break;
          case 2: g = &beta[static_cast<std::size_t>(i)]; break;
          default: g = &pi[static_cast<std::size_t>(i * config.epochs + t)]; break;
        }
        lab.z = static_cast<int>(rng.categorical(*g));
        DocumentRecord rec;
        rec.doc_id = detail::padded("d", static_cast<int>(n++), dd);
        rec.user_id = user;
        rec.timestamp = config.origin + static_cast<std::int64_t>(t) * config.epoch_length +
                        static_cast<std::int64_t>(rng.below(static_cast<std::size_t>(config.epoch_length)));
        const auto& phi = truth.topics[static_cast<std::size_t>(lab.z)];
        for (int w = 0; w < config.words_per_doc; ++w) {
          rec.tokens.push_back(truth.words[rng.categorical(phi)]);
        }
        if (lab.x == 1 && lab.y == 1) {
          rec.gold_pie = event_name(user, t, lab.z);
          auto [it, fresh] = event_index.emplace(std::tuple{i, t, lab.z}, truth.events.size());
          if (fresh) truth.events.push_back({user, t, lab.z, {}});
          truth.events[it->second].doc_ids.push_back(rec.doc_id);
        }
        truth.labels.emplace(rec.doc_id, lab);
        out.records.push_back(std::move(rec));
      }
    }
  }
  IngestConfig ic;
  ic.origin = config.origin;
  ic.epoch_length = config.epoch_length;
  out.corpus = build_corpus(out.records, ic);
  truth.r = std::move(r);
  truth.psi = std::move(psi);
  truth.beta = std::move(beta);
  truth.pi = std::move(pi);
  out.truth = std::move(truth);
  return out;
}

// Sidecar: one JSON object per document, {doc_id, x, y, z}.
inline void write_truth(const Generated& g, std::ostream& out) {
  for (const auto& rec : g.records) {
    const auto& l = g.truth.at(rec.doc_id);
    nlohmann::ordered_json j;
    j["doc_id"] = rec.doc_id;
    j["x"] = l.x;
    j["y"] = l.y;
    j["z"] = l.z;
    out << j.dump() << '\n';
  }
}

inline std::map<std::string, TruthLabel> read_truth(std::istream& in) {
  std::map<std::string, TruthLabel> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out[j.at("doc_id").get<std::string>()] = {j.at("x").get<int>(), j.at("y").get<int>(), j.at("z").get<int>()};
    } catch (const nlohmann::json::exception& e) {
      throw data_error("truth line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::map<std::string, TruthLabel> read_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read truth file " + path);
  return read_truth(in);
}

// Gold timeline lines (user_id, event_name, doc_id) for every planted PersonTS document.
inline void write_gold(const Generated& g, std::ostream& out) {
  for (const auto& e : g.truth.events) {
    for (const auto& d : e.doc_ids) out << e.user_id << '\t' << event_name(e.user_id, e.epoch, e.topic) << '\t' << d << '\n';
  }
}

}  // namespace pietl::synth
