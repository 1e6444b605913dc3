#pragma once

#include <string>
#include <vector>

#include "pietl/corpus.hpp"
#include "pietl/random.hpp"
#include "pietl/summary.hpp"

namespace pietl::testing {

struct DocSpec {
  std::string id;
  int user = 0;
  int epoch = 0;
  std::vector<int> words;
};

inline Corpus make_corpus(const std::vector<std::string>& words, int users, int epochs,
                          const std::vector<DocSpec>& specs) {
  std::vector<std::string> names;
  for (int u = 0; u < users; ++u) names.push_back("u" + std::to_string(u));
  std::vector<Document> docs;
  for (const auto& s : specs) {
    Document d;
    d.doc_id = s.id;
    d.user = s.user;
    d.epoch = s.epoch;
    d.timestamp = static_cast<std::int64_t>(s.epoch) * 7 * kSecondsPerDay;
    d.tokens = s.words;
    d.word_counts = count_words(d.tokens);
    for (int w : s.words) d.raw_tokens.push_back(words[static_cast<std::size_t>(w)]);
    docs.push_back(std::move(d));
  }
  return Corpus(Vocabulary(words), names, epochs, std::move(docs));
}

inline Corpus make_corpus(int vocab, int users, int epochs, const std::vector<DocSpec>& specs) {
  std::vector<std::string> words;
  for (int w = 0; w < vocab; ++w) words.push_back("w" + std::to_string(w));
  return make_corpus(words, users, epochs, specs);
}

// A summary with the given modal labels and topics; topic word counts are
// the summed counts of each topic's documents.
inline PosteriorSummary summary_for(const Corpus& c, const std::vector<LabelPair>& labels,
                                    const std::vector<std::int64_t>& topics, const std::string& model = "dpm") {
  PosteriorSummary s;
  s.model = model;
  s.num_samples = 1;
  s.vocab_size = c.vocab_size();
  s.labels = labels;
  s.topics = topics;
  for (int d = 0; d < c.num_docs(); ++d) {
    s.doc_ids.push_back(c.doc(d).doc_id);
    auto& counts = s.topic_word_counts[topics[static_cast<std::size_t>(d)]];
    counts.resize(static_cast<std::size_t>(c.vocab_size()), 0.0);
    for (int w : c.doc(d).tokens) counts[static_cast<std::size_t>(w)] += 1.0;
  }
  return s;
}

// Every cell gets `per_cell` documents of 1..max_len uniform words.
inline Corpus random_corpus(Rng& rng, int vocab, int users, int epochs, int per_cell, int max_len) {
  std::vector<DocSpec> specs;
  int n = 0;
  for (int u = 0; u < users; ++u) {
    for (int t = 0; t < epochs; ++t) {
      for (int j = 0; j < per_cell; ++j) {
        DocSpec s;
        s.id = "d" + std::to_string(10000 + n++);
        s.user = u;
        s.epoch = t;
        const int len = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(max_len)));
        for (int k = 0; k < len; ++k) s.words.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(vocab))));
        specs.push_back(std::move(s));
      }
    }
  }
  return make_corpus(vocab, users, epochs, specs);
}

}  // namespace pietl::testing
