#include <gtest/gtest.h>

#include <sstream>

#include "pietl/corpus.hpp"
#include "pietl/random.hpp"

using namespace pietl;

namespace {

Corpus ingest_text(const std::string& text, IngestConfig cfg = {}) {
  std::istringstream in(text);
  return ingest(in, cfg);
}

std::string record(const std::string& id, const std::string& user, std::int64_t ts,
                   const std::vector<std::string>& tokens) {
  return record_to_json({id, user, ts, tokens, std::nullopt}) + "\n";
}

}  // namespace

TEST(Ingest, ThreeValidLines) {
  const auto c = ingest_text(record("a", "u1", 0, {"x", "y"}) + record("b", "u1", 10, {"y"}) +
                             record("c", "u2", 20, {"z"}));
  EXPECT_EQ(c.num_docs(), 3);
  EXPECT_EQ(c.num_users(), 2);
  EXPECT_EQ(c.dropped(), 0);
}

TEST(Ingest, MissingUserIdNamesLine) {
  const std::string text = record("a", "u1", 0, {"x"}) + R"({"doc_id":"b","ts":1,"tokens":["x"]})" + "\n";
  try {
    ingest_text(text);
    FAIL() << "expected data_error";
  } catch (const data_error& e) {
    EXPECT_EQ(std::string(e.what()), "line 2: missing field user_id");
  }
}

TEST(Ingest, MalformedJsonNamesLine) {
  try {
    ingest_text(record("a", "u1", 0, {"x"}) + "{not json\n");
    FAIL();
  } catch (const data_error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("line 2:", 0), 0u);
  }
}

TEST(Ingest, UnreadablePathIsIoError) {
  EXPECT_THROW(ingest("/nonexistent/corpus.jsonl", {}), io_error);
}

TEST(Ingest, DocumentBelowMinCountIsDropped) {
  IngestConfig cfg;
  cfg.min_count = 2;
  const auto c = ingest_text(record("a", "u", 0, {"x", "x"}) + record("b", "u", 5, {"rare"}), cfg);
  EXPECT_EQ(c.num_docs(), 1);
  EXPECT_EQ(c.dropped(), 1);
}

TEST(Ingest, CommentLinesIgnored) {
  const auto c = ingest_text("# header\n" + record("a", "u", 0, {"x"}));
  EXPECT_EQ(c.num_docs(), 1);
}

TEST(Ingest, DuplicateDocIdRejected) {
  EXPECT_THROW(ingest_text(record("a", "u", 0, {"x"}) + record("a", "v", 0, {"y"})), data_error);
}

TEST(Ingest, StopListHook) {
  const std::string path = ::testing::TempDir() + "/stop.txt";
  {
    std::ofstream out(path);
    out << "the\n";
  }
  IngestConfig cfg;
  cfg.stop_list_path = path;
  const auto c = ingest_text(record("a", "u", 0, {"the", "cat"}), cfg);
  EXPECT_EQ(c.vocab_size(), 1);
  EXPECT_EQ(c.vocabulary().word(0), "cat");
  EXPECT_EQ(c.doc(0).raw_tokens.size(), 2u);
}

TEST(AssignEpochs, FloorArithmetic) {
  const std::int64_t origin = 1000;
  const std::int64_t week = 7 * kSecondsPerDay;
  const std::vector<std::int64_t> ts{origin, origin + 13 * kSecondsPerDay, origin + 14 * kSecondsPerDay};
  EXPECT_EQ(assign_epochs(ts, week, origin), (std::vector<int>{0, 1, 2}));
}

TEST(AssignEpochs, SpanOf637DaysIs91Weeks) {
  const std::vector<std::int64_t> ts{0, 637 * kSecondsPerDay - 1};
  const auto e = assign_epochs(ts, 7 * kSecondsPerDay, 0);
  EXPECT_EQ(e.back() + 1, 91);
}

TEST(AssignEpochs, BeforeOriginIsRangeError) {
  const std::vector<std::int64_t> ts{5};
  EXPECT_THROW(assign_epochs(ts, 10, 6), std::out_of_range);
}

TEST(BuildVocabulary, Threshold) {
  std::vector<DocumentRecord> r{{"1", "u", 0, {"a", "a", "b", "a"}, {}}};
  const auto v = build_vocabulary(r, 2);
  EXPECT_EQ(v.size(), 1);
  EXPECT_EQ(v.word(0), "a");
}

TEST(BuildVocabulary, MinCountOneKeepsAllDistinctWords) {
  std::vector<DocumentRecord> r{{"1", "u", 0, {"c", "a", "b", "a"}, {}}};
  EXPECT_EQ(build_vocabulary(r, 1).size(), 3);
}

TEST(BuildVocabulary, LexicographicTieBreak) {
  std::vector<DocumentRecord> r{{"1", "u", 0, {"y", "x", "y", "x"}, {}}};
  const auto v = build_vocabulary(r, 1);
  EXPECT_EQ(*v.find("x"), 0);
  EXPECT_EQ(*v.find("y"), 1);
}

TEST(BuildVocabulary, DescendingFrequency) {
  std::vector<DocumentRecord> r{{"1", "u", 0, {"a", "b", "b", "c", "c", "c"}, {}}};
  const auto v = build_vocabulary(r, 1);
  EXPECT_EQ(v.words(), (std::vector<std::string>{"c", "b", "a"}));
}

TEST(BuildVocabulary, AllFilteredIsError) {
  std::vector<DocumentRecord> r{{"1", "u", 0, {"a"}, {}}};
  EXPECT_THROW(build_vocabulary(r, 2), data_error);
}

// Random record files for the property tests.
std::string random_records(Rng& rng, int n) {
  std::string text;
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> toks;
    const int len = 1 + static_cast<int>(rng.below(6));
    for (int k = 0; k < len; ++k) toks.push_back("t" + std::to_string(rng.below(30)));
    DocumentRecord r{"doc" + std::to_string(i), "user" + std::to_string(rng.below(5)),
                     static_cast<std::int64_t>(rng.below(60 * kSecondsPerDay)), toks, std::nullopt};
    if (rng.bernoulli(0.2)) r.gold_pie = "event" + std::to_string(rng.below(3));
    text += record_to_json(r) + "\n";
  }
  return text;
}

TEST(CorpusProperties, InvariantsOnRandomInputs) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    IngestConfig cfg;
    cfg.min_count = 1 + static_cast<int>(rng.below(3));
    cfg.epoch_length = (1 + static_cast<std::int64_t>(rng.below(10))) * kSecondsPerDay;
    Corpus c;
    try {
      c = ingest_text(random_records(rng, 1 + static_cast<int>(rng.below(80))), cfg);
    } catch (const data_error&) {
      continue;  // everything filtered
    }
    std::size_t cells = 0;
    for (int u = 0; u < c.num_users(); ++u) {
      for (int t = 0; t < c.num_epochs(); ++t) {
        for (int d : c.cell_docs(u, t)) {
          EXPECT_EQ(c.doc(d).user, u);
          EXPECT_EQ(c.doc(d).epoch, t);
        }
        cells += c.cell_docs(u, t).size();
      }
    }
    EXPECT_EQ(cells, static_cast<std::size_t>(c.num_docs()));
    for (const auto& d : c.documents()) {
      EXPECT_FALSE(d.tokens.empty());
      for (int w : d.tokens) EXPECT_LT(w, c.vocab_size());
      EXPECT_EQ(d.epoch, (d.timestamp - c.origin()) / c.epoch_length());
    }
    for (int w = 0; w < c.vocab_size(); ++w) EXPECT_EQ(*c.vocabulary().find(c.vocabulary().word(w)), w);
  }
}

TEST(CorpusProperties, DeterministicAndRoundTrips) {
  Rng rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const std::string text = random_records(rng, 1 + static_cast<int>(rng.below(60)));
    const auto a = ingest_text(text);
    const auto b = ingest_text(text);
    EXPECT_TRUE(a == b);
    std::ostringstream out;
    write_records(a, out);
    IngestConfig cfg;
    cfg.origin = a.origin();
    EXPECT_TRUE(ingest_text(out.str(), cfg) == a);
  }
}

TEST(Corpus, RestrictToUserKeepsGrid) {
  const auto c = ingest_text(record("a", "u1", 0, {"x"}) + record("b", "u2", 8 * kSecondsPerDay, {"y"}) +
                             record("c", "u1", 15 * kSecondsPerDay, {"x", "y"}));
  const auto sub = c.restrict_to_user(*c.find_user("u1"));
  EXPECT_EQ(sub.num_users(), 1);
  EXPECT_EQ(sub.num_docs(), 2);
  EXPECT_EQ(sub.num_epochs(), c.num_epochs());
  EXPECT_EQ(sub.vocab_size(), c.vocab_size());
}

TEST(Corpus, IsoDates) {
  EXPECT_EQ(iso_date(0), "1970-01-01");
  EXPECT_EQ(iso_date(951782400), "2000-02-29");
  EXPECT_EQ(iso_date(1262304000), "2010-01-01");
}
