#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pietl/errors.hpp"

namespace pietl {

inline constexpr std::int64_t kSecondsPerDay = 86400;

// One input line: a pre-tokenized document.
struct DocumentRecord {
  std::string doc_id;
  std::string user_id;
  std::int64_t timestamp = 0;
  std::vector<std::string> tokens;
  std::optional<std::string> gold_pie;

  friend bool operator==(const DocumentRecord&, const DocumentRecord&) = default;
};

// Dense bijection between words and ids 0..V-1.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    for (std::size_t i = 0; i < words_.size(); ++i) {
      auto [it, fresh] = ids_.emplace(words_[i], static_cast<int>(i));
      if (!fresh) throw std::invalid_argument("Vocabulary: duplicate word '" + words_[i] + "'");
    }
  }

  int size() const { return static_cast<int>(words_.size()); }
  bool empty() const { return words_.empty(); }
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& words() const { return words_; }

  std::optional<int> find(const std::string& word) const {
    auto it = ids_.find(word);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
};

// A document after vocabulary filtering.
struct Document {
  std::string doc_id;
  int user = 0;
  int epoch = 0;
  std::int64_t timestamp = 0;
  std::vector<int> tokens;                        // in-vocabulary ids, original order
  std::vector<std::pair<int, int>> word_counts;   // (word id, multiplicity), ascending id
  std::vector<std::string> raw_tokens;            // as ingested, before filtering
  std::optional<std::string> gold_pie;

  int length() const { return static_cast<int>(tokens.size()); }

  friend bool operator==(const Document&, const Document&) = default;
};

inline std::vector<std::pair<int, int>> count_words(std::span<const int> tokens) {
  std::map<int, int> counts;
  for (int w : tokens) ++counts[w];
  return {counts.begin(), counts.end()};
}

struct IngestConfig {
  int min_count = 1;
  std::int64_t epoch_length = 7 * kSecondsPerDay;
  std::optional<std::int64_t> origin;  // default: earliest kept timestamp
  std::string stop_list_path;          // optional, one word per line
};

// epoch = floor((timestamp - origin) / epoch_length).
inline std::vector<int> assign_epochs(std::span<const std::int64_t> timestamps,
                                      std::int64_t epoch_length, std::int64_t origin) {
  if (epoch_length <= 0) throw std::invalid_argument("assign_epochs: epoch_length must be positive");
  std::vector<int> epochs;
  epochs.reserve(timestamps.size());
  for (std::int64_t ts : timestamps) {
    if (ts < origin) {
      throw std::out_of_range("assign_epochs: timestamp " + std::to_string(ts) +
                              " precedes origin " + std::to_string(origin));
    }
    epochs.push_back(static_cast<int>((ts - origin) / epoch_length));
  }
  return epochs;
}

// Words with corpus frequency >= min_count; ids by descending frequency,
// ties broken lexicographically.
inline Vocabulary build_vocabulary(std::span<const DocumentRecord> records, int min_count,
                                   const std::unordered_set<std::string>& stop_words = {}) {
  if (records.empty()) throw std::invalid_argument("build_vocabulary: no records");
  if (min_count < 1) throw std::invalid_argument("build_vocabulary: min_count must be positive");
  std::unordered_map<std::string, long> freq;
  for (const auto& r : records) {
    for (const auto& t : r.tokens) {
      if (!stop_words.contains(t)) ++freq[t];
    }
  }
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [w, c] : freq) {
    if (c >= min_count) kept.emplace_back(w, c);
  }
  if (kept.empty()) throw data_error("empty vocabulary: every word is below min_count");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> words;
  words.reserve(kept.size());
  for (auto& [w, c] : kept) words.push_back(w);
  return Vocabulary(std::move(words));
}

// Immutable store of documents indexed by user and epoch.
class Corpus {
 public:
  Corpus() = default;

  // Assembles a corpus from already-processed documents. User and epoch
  // indices in `docs` must be in range.
  Corpus(Vocabulary vocab, std::vector<std::string> users, int num_epochs, std::vector<Document> docs,
         std::int64_t origin = 0, std::int64_t epoch_length = 7 * kSecondsPerDay, int dropped = 0)
      : vocab_(std::move(vocab)),
        users_(std::move(users)),
        num_epochs_(num_epochs),
        docs_(std::move(docs)),
        origin_(origin),
        epoch_length_(epoch_length),
        dropped_(dropped) {
    cells_.assign(static_cast<std::size_t>(num_users()) * static_cast<std::size_t>(num_epochs_), {});
    for (std::size_t d = 0; d < docs_.size(); ++d) {
      const auto& doc = docs_[d];
      if (doc.user < 0 || doc.user >= num_users() || doc.epoch < 0 || doc.epoch >= num_epochs_) {
        throw std::invalid_argument("Corpus: document " + doc.doc_id + " outside the user/epoch grid");
      }
      for (int w : doc.tokens) {
        if (w < 0 || w >= vocab_.size()) throw std::invalid_argument("Corpus: token id out of range");
      }
      if (!index_.emplace(doc.doc_id, static_cast<int>(d)).second) {
        throw data_error("duplicate doc_id " + doc.doc_id);
      }
      cells_[cell(doc.user, doc.epoch)].push_back(static_cast<int>(d));
    }
    for (std::size_t u = 0; u < users_.size(); ++u) user_index_.emplace(users_[u], static_cast<int>(u));
  }

  const Vocabulary& vocabulary() const { return vocab_; }
  int vocab_size() const { return vocab_.size(); }
  int num_users() const { return static_cast<int>(users_.size()); }
  int num_epochs() const { return num_epochs_; }
  int num_docs() const { return static_cast<int>(docs_.size()); }
  int dropped() const { return dropped_; }
  std::int64_t origin() const { return origin_; }
  std::int64_t epoch_length() const { return epoch_length_; }

  const std::vector<Document>& documents() const { return docs_; }
  const Document& doc(int d) const { return docs_.at(static_cast<std::size_t>(d)); }
  const std::vector<std::string>& users() const { return users_; }
  const std::string& user_name(int u) const { return users_.at(static_cast<std::size_t>(u)); }

  std::optional<int> find_doc(const std::string& doc_id) const {
    auto it = index_.find(doc_id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<int> find_user(const std::string& user_id) const {
    auto it = user_index_.find(user_id);
    if (it == user_index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t cell(int user, int epoch) const {
    return static_cast<std::size_t>(user) * static_cast<std::size_t>(num_epochs_) +
           static_cast<std::size_t>(epoch);
  }

  // S_i^t: documents of `user` in `epoch`, in ingestion order.
  const std::vector<int>& cell_docs(int user, int epoch) const { return cells_.at(cell(user, epoch)); }

  std::vector<int> user_docs(int user) const {
    std::vector<int> out;
    for (int t = 0; t < num_epochs_; ++t) {
      const auto& c = cell_docs(user, t);
      out.insert(out.end(), c.begin(), c.end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  // Restriction to one user's documents (vocabulary and epoch grid preserved).
  Corpus restrict_to_user(int user) const {
    std::vector<Document> docs;
    for (int d : user_docs(user)) {
      Document copy = docs_[static_cast<std::size_t>(d)];
      copy.user = 0;
      docs.push_back(std::move(copy));
    }
    return Corpus(vocab_, {users_.at(static_cast<std::size_t>(user))}, num_epochs_, std::move(docs), origin_,
                  epoch_length_, 0);
  }

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.vocab_ == b.vocab_ && a.users_ == b.users_ && a.num_epochs_ == b.num_epochs_ &&
           a.docs_ == b.docs_ && a.origin_ == b.origin_ && a.epoch_length_ == b.epoch_length_;
  }

 private:
  Vocabulary vocab_;
  std::vector<std::string> users_;
  int num_epochs_ = 0;
  std::vector<Document> docs_;
  std::int64_t origin_ = 0;
  std::int64_t epoch_length_ = 7 * kSecondsPerDay;
  int dropped_ = 0;
  std::vector<std::vector<int>> cells_;
  std::unordered_map<std::string, int> index_;
  std::unordered_map<std::string, int> user_index_;
};

inline std::unordered_set<std::string> read_stop_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read stop list " + path);
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() != '#') words.insert(line);
  }
  return words;
}

// Builds the corpus from parsed records: vocabulary, filtering, epochs.
// Records left with no in-vocabulary token are dropped and counted.
inline Corpus build_corpus(std::vector<DocumentRecord> records, const IngestConfig& config,
                           const std::unordered_set<std::string>& stop_words = {}) {
  if (records.empty()) throw data_error("no document records");
  {
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
      if (!seen.insert(r.doc_id).second) throw data_error("duplicate doc_id " + r.doc_id);
    }
  }
  Vocabulary vocab = build_vocabulary(records, config.min_count, stop_words);

  std::vector<Document> docs;
  int dropped = 0;
  for (auto& r : records) {
    Document doc;
    doc.doc_id = r.doc_id;
    doc.timestamp = r.timestamp;
    for (const auto& t : r.tokens) {
      if (stop_words.contains(t)) continue;
      if (auto id = vocab.find(t)) doc.tokens.push_back(*id);
    }
    if (doc.tokens.empty()) {
      ++dropped;
      continue;
    }
    doc.word_counts = count_words(doc.tokens);
    doc.raw_tokens = std::move(r.tokens);
    doc.gold_pie = std::move(r.gold_pie);
    docs.push_back(std::move(doc));
  }
  // Users keyed by the kept records that mention them; the user table is sorted
  // so that the index is independent of line order.
  std::vector<std::string> users;
  std::vector<std::string> doc_users;
  {
    std::unordered_map<std::string, std::string> owner;
    for (const auto& r : records) owner.emplace(r.doc_id, r.user_id);
    for (const auto& d : docs) doc_users.push_back(owner.at(d.doc_id));
    users = doc_users;
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
  }
  std::int64_t origin = 0;
  if (config.origin) {
    origin = *config.origin;
  } else if (!docs.empty()) {
    origin = std::min_element(docs.begin(), docs.end(), [](const Document& a, const Document& b) {
               return a.timestamp < b.timestamp;
             })->timestamp;
  }
  std::vector<std::int64_t> stamps;
  for (const auto& d : docs) stamps.push_back(d.timestamp);
  const std::vector<int> epochs = assign_epochs(stamps, config.epoch_length, origin);
  int num_epochs = 0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    docs[d].epoch = epochs[d];
    docs[d].user = static_cast<int>(std::lower_bound(users.begin(), users.end(), doc_users[d]) - users.begin());
    num_epochs = std::max(num_epochs, epochs[d] + 1);
  }
  if (docs.empty()) throw data_error("every document was emptied by vocabulary filtering");
  return Corpus(std::move(vocab), std::move(users), num_epochs, std::move(docs), origin, config.epoch_length,
                dropped);
}

// Parses one record line. `line_no` is 1-based and used in error messages.
inline DocumentRecord parse_record(const std::string& line, int line_no) {
  const std::string where = "line " + std::to_string(line_no) + ": ";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw data_error(where + "malformed record (" + std::string(e.what()) + ")");
  }
  if (!j.is_object()) throw data_error(where + "record is not an object");
  for (const char* key : {"doc_id", "user_id", "ts", "tokens"}) {
    if (!j.contains(key)) throw data_error(where + "missing field " + key);
  }
  DocumentRecord r;
  auto as_id = [&](const char* key) {
    const auto& v = j.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw data_error(where + "field " + key + " must be a string");
  };
  r.doc_id = as_id("doc_id");
  r.user_id = as_id("user_id");
  if (r.doc_id.empty()) throw data_error(where + "empty doc_id");
  if (r.user_id.empty()) throw data_error(where + "empty user_id");
  if (!j.at("ts").is_number_integer()) throw data_error(where + "field ts must be an integer");
  r.timestamp = j.at("ts").get<std::int64_t>();
  const auto& toks = j.at("tokens");
  if (!toks.is_array()) throw data_error(where + "field tokens must be an array");
  for (const auto& t : toks) {
    if (!t.is_string()) throw data_error(where + "tokens must be strings");
    r.tokens.push_back(t.get<std::string>());
  }
  if (j.contains("gold_pie") && !j.at("gold_pie").is_null()) {
    if (!j.at("gold_pie").is_string()) throw data_error(where + "field gold_pie must be a string");
    r.gold_pie = j.at("gold_pie").get<std::string>();
  }
  return r;
}

inline std::vector<DocumentRecord> read_records(std::istream& in) {
  std::vector<DocumentRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    records.push_back(parse_record(line, line_no));
  }
  return records;
}

inline Corpus ingest(std::istream& in, const IngestConfig& config) {
  std::unordered_set<std::string> stop;
  if (!config.stop_list_path.empty()) stop = read_stop_list(config.stop_list_path);
  return build_corpus(read_records(in), config, stop);
}

inline Corpus ingest(const std::string& path, const IngestConfig& config) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read corpus " + path);
  return ingest(in, config);
}

inline std::string record_to_json(const DocumentRecord& r) {
  nlohmann::ordered_json j;
  j["doc_id"] = r.doc_id;
  j["user_id"] = r.user_id;
  j["ts"] = r.timestamp;
  j["tokens"] = r.tokens;
  if (r.gold_pie) j["gold_pie"] = *r.gold_pie;
  return j.dump();
}

// Exports the corpus in the record format (raw tokens, ingestion order).
inline void write_records(const Corpus& corpus, std::ostream& out) {
  for (const auto& d : corpus.documents()) {
    DocumentRecord r{d.doc_id, corpus.user_name(d.user), d.timestamp, d.raw_tokens, d.gold_pie};
    out << record_to_json(r) << '\n';
  }
}

// "YYYY-MM-DD" for a unix timestamp (UTC).
inline std::string iso_date(std::int64_t seconds) {
  // Civil-from-days, H. Hinnant.
  std::int64_t z = (seconds >= 0 ? seconds : seconds - (kSecondsPerDay - 1)) / kSecondsPerDay + 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  if (m <= 2) ++y;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(y), m, d);
  return buf;
}

// Inclusive date range "start..end" covered by an epoch.
inline std::string epoch_date_range(const Corpus& corpus, int epoch) {
  const std::int64_t start = corpus.origin() + static_cast<std::int64_t>(epoch) * corpus.epoch_length();
  const std::int64_t end = start + corpus.epoch_length() - 1;
  return iso_date(start) + ".." + iso_date(end);
}

}  // namespace pietl
