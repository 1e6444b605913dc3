#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pietl/timeline.hpp"
#include "support/fixtures.hpp"
#include "support/timeline_oracle.hpp"

using namespace pietl;
using namespace pietl::timeline;
namespace tt = pietl::testing;
using tt::DocSpec;

namespace {

TopicInput input(std::int64_t id, std::vector<double> counts, std::vector<int> docs) {
  return {id, std::move(counts), std::move(docs)};
}

std::vector<TopicInput> inputs(const std::vector<tt::OracleTopic>& ts) {
  std::vector<TopicInput> out;
  for (const auto& t : ts) out.push_back({t.id, t.counts, t.docs});
  return out;
}

std::vector<std::vector<std::int64_t>> ids_of(const Partition& p) {
  std::vector<std::vector<std::int64_t>> out;
  for (const auto& c : p) out.push_back(c.members);
  std::sort(out.begin(), out.end());
  return out;
}

// Two documents over three words: A = w0 w0 w1, B = w2 w2 w1.
struct TwoTopics {
  Corpus corpus = tt::make_corpus(3, 1, 1, {{"a", 0, 0, {0, 0, 1}}, {"b", 0, 0, {2, 2, 1}}});
  TopicCluster t1 = singleton(input(1, {2, 1, 0}, {0}));
  TopicCluster t2 = singleton(input(2, {0, 1, 2}, {1}));
};

}  // namespace

TEST(ClusteringBalance, HandFixture) {
  TwoTopics f;
  // centers (2.1, 1.1, 0.1)/3.3 and its mirror; grand center uniform.
  const double c0 = 2.1 / 3.3, c1 = 1.1 / 3.3, c2 = 0.1 / 3.3;
  const double lambda_ = 2.0 * -(2.0 * std::log(c0) + std::log(c1)) / 3.0;
  const double omega = 2.0 * (c0 * std::log(3 * c0) + c1 * std::log(3 * c1) + c2 * std::log(3 * c2));
  const auto b = clustering_balance_parts({f.t1, f.t2}, f.corpus);
  EXPECT_NEAR(b.intra, lambda_, 1e-10);
  EXPECT_NEAR(b.inter, omega, 1e-10);
  EXPECT_NEAR(b.total(), 2.012708065959042, 1e-10);
  // merged: uniform center, every token has p = 1/3
  EXPECT_NEAR(clustering_balance({merge(f.t1, f.t2)}, f.corpus), 2.0 * std::log(3.0), 1e-10);
}

TEST(ClusteringBalance, EntropyStyleError) {
  TwoTopics f;
  ClusterOptions o;
  o.intra = IntraClusterError::neg_p_log_p;
  EXPECT_NEAR(clustering_balance({f.t1, f.t2}, f.corpus, o), 1.362503342032313, 1e-10);
}

TEST(ClusteringBalance, SingleClusterHasNoInterTerm) {
  TwoTopics f;
  EXPECT_DOUBLE_EQ(clustering_balance_parts({f.t1}, f.corpus).inter, 0.0);
  // two identical topics in one cluster
  const auto dup = singleton(input(3, {2, 1, 0}, {0}));
  EXPECT_DOUBLE_EQ(clustering_balance_parts({merge(f.t1, dup)}, f.corpus).inter, 0.0);
}

TEST(ClusteringBalance, Errors) {
  TwoTopics f;
  EXPECT_THROW(clustering_balance({}, f.corpus), std::domain_error);
  EXPECT_THROW(clustering_balance({f.t1, TopicCluster{{}, {0, 0, 0}, {}}}, f.corpus), std::domain_error);
}

TEST(ClusteringBalance, RelabelInvariance) {
  Rng rng(31);
  for (int rep = 0; rep < 30; ++rep) {
    const auto fx = tt::random_cluster_fixture(rng, 5);
    Partition p{singleton(input(fx.topics[0].id, fx.topics[0].counts, fx.topics[0].docs))};
    for (std::size_t k = 1; k < fx.topics.size(); ++k) {
      const auto c = singleton(input(fx.topics[k].id, fx.topics[k].counts, fx.topics[k].docs));
      if (k % 2) p.push_back(c);
      else p[0] = merge(p[0], c);
    }
    const double e = clustering_balance(p, fx.corpus);
    Partition q(p.rbegin(), p.rend());
    for (auto& c : q) std::reverse(c.members.begin(), c.members.end());
    EXPECT_DOUBLE_EQ(clustering_balance(q, fx.corpus), e);
  }
}

TEST(ClusteringBalance, MatchesOracle) {
  Rng rng(32);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 1 + static_cast<int>(rng.below(5));
    const auto fx = tt::random_cluster_fixture(rng, n);
    for (const auto& g : tt::all_partitions(n)) {
      Partition p;
      for (const auto& grp : g) {
        TopicCluster c = singleton(inputs(fx.topics)[static_cast<std::size_t>(grp[0])]);
        for (std::size_t i = 1; i < grp.size(); ++i) c = merge(c, singleton(inputs(fx.topics)[static_cast<std::size_t>(grp[i])]));
        p.push_back(c);
      }
      EXPECT_NEAR(clustering_balance(p, fx.corpus), tt::oracle_balance(g, fx.topics, fx.corpus, 0.1), 1e-10);
    }
  }
}

TEST(MergeTopics, SingleTopic) {
  TwoTopics f;
  const auto r = merge_topics({input(1, {2, 1, 0}, {0})}, f.corpus);
  ASSERT_EQ(r.best.size(), 1u);
  EXPECT_EQ(r.path.size(), 1u);
  EXPECT_THROW(merge_topics({}, f.corpus), std::domain_error);
}

TEST(MergeTopics, DuplicatesMergeDistantStaysAlone) {
  std::vector<DocSpec> specs;
  for (int j = 0; j < 3; ++j) specs.push_back({"a" + std::to_string(j), 0, 0, {0, 1, 0, 1}});
  for (int j = 0; j < 3; ++j) specs.push_back({"b" + std::to_string(j), 0, 0, {0, 1, 0, 1}});
  for (int j = 0; j < 3; ++j) specs.push_back({"c" + std::to_string(j), 0, 0, {4, 5, 4, 5}});
  const auto corpus = tt::make_corpus(6, 1, 1, specs);
  std::vector<tt::OracleTopic> ts{{1, {6, 6, 0, 0, 0, 0}, {0, 1, 2}},
                                       {2, {6, 6, 0, 0, 0, 0}, {3, 4, 5}},
                                       {3, {0, 0, 0, 0, 6, 6}, {6, 7, 8}}};
  const auto r = merge_topics(inputs(ts), corpus);
  const std::vector<std::vector<std::int64_t>> expected{{1, 2}, {3}};
  EXPECT_EQ(ids_of(r.best), expected);
  // exhaustive search over the five partitions of three topics agrees
  double best = 1e300;
  std::vector<std::vector<std::int64_t>> arg;
  for (const auto& g : tt::all_partitions(3)) {
    const double e = tt::oracle_balance(g, ts, corpus, 0.1);
    if (e < best) {
      best = e;
      arg = tt::grouping_ids(g, ts);
    }
  }
  EXPECT_EQ(arg, expected);
  EXPECT_NEAR(r.best_balance, best, 1e-10);
}

TEST(MergeTopics, MatchesReplayedMergePath) {
  Rng rng(33);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const auto fx = tt::random_cluster_fixture(rng, n);
    const auto r = merge_topics(inputs(fx.topics), fx.corpus);
    const auto o = tt::oracle_merge_path(fx.topics, fx.corpus, 0.1);
    ASSERT_EQ(r.path.size(), o.balances.size());
    for (std::size_t k = 0; k < r.path.size(); ++k) EXPECT_NEAR(r.path[k], o.balances[k], 1e-10);
    EXPECT_EQ(ids_of(r.best), tt::grouping_ids(o.partitions[o.argmin], fx.topics)) << "fixture " << rep;
    EXPECT_NEAR(r.best_balance, o.balances[o.argmin], 1e-10);
    // members disjoint and covering
    std::vector<std::int64_t> all;
    for (const auto& c : r.best) all.insert(all.end(), c.members.begin(), c.members.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all.size(), fx.topics.size());
    EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
  }
}

TEST(Chi2Shape, Examples) {
  const auto t = chi2_shape_test({10, 10}, {12, 8});
  EXPECT_NEAR(t.statistic, 0.8, 1e-12);
  EXPECT_EQ(t.df, 1);
  EXPECT_NEAR(t.p_value, 0.3711, 5e-5);
  const auto same = chi2_shape_test({3, 1, 4, 1, 5}, {3, 1, 4, 1, 5});
  EXPECT_DOUBLE_EQ(same.statistic, 0.0);
  EXPECT_DOUBLE_EQ(same.p_value, 1.0);
}

TEST(Chi2Shape, ScalingShapeLeavesPUnchanged) {
  Rng rng(41);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a, b;
    for (int k = 0; k < 6; ++k) {
      a.push_back(1.0 + static_cast<double>(rng.below(20)));
      b.push_back(static_cast<double>(rng.below(20)));
    }
    b[0] += 1.0;
    const double p = chi2_shape_pvalue(a, b);
    std::vector<double> scaled = a;
    for (double& v : scaled) v *= 3.5;
    EXPECT_NEAR(chi2_shape_pvalue(scaled, b), p, 1e-12);
  }
}

TEST(Chi2Shape, AgainstBoost) {
  Rng rng(42);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t bins = 2 + rng.below(8);
    std::vector<double> a, b;
    for (std::size_t k = 0; k < bins; ++k) {
      a.push_back(1.0 + static_cast<double>(rng.below(30)));
      b.push_back(static_cast<double>(rng.below(30)));
    }
    b[0] += 1.0;
    double ta = 0, tb = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      ta += a[k];
      tb += b[k];
    }
    double x2 = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double e = tb * a[k] / ta;
      x2 += (b[k] - e) * (b[k] - e) / e;
    }
    boost::math::chi_squared dist(static_cast<double>(bins - 1));
    const double expected = boost::math::cdf(boost::math::complement(dist, x2));
    EXPECT_NEAR(chi2_shape_pvalue(a, b), expected, 1e-6);
  }
}

TEST(Chi2Shape, ZeroExpectationBinsFold) {
  // shape (0, 2, 0, 2): bins fold into (b0 + b1, b2 + b3)
  const auto t = chi2_shape_test({0, 2, 0, 2}, {1, 5, 2, 0});
  EXPECT_EQ(t.df, 1);
  EXPECT_NEAR(t.statistic, (6 - 4.0) * (6 - 4.0) / 4.0 + (2 - 4.0) * (2 - 4.0) / 4.0, 1e-12);
  // trailing zero-expectation bin goes to the last nonzero one
  const auto u = chi2_shape_test({2, 2, 0}, {1, 2, 3});
  EXPECT_NEAR(u.statistic, (1 - 3.0) * (1 - 3.0) / 3.0 + (5 - 3.0) * (5 - 3.0) / 3.0, 1e-12);
  EXPECT_EQ(chi2_shape_test({0, 5, 0}, {1, 1, 1}).p_value, 1.0);
}

TEST(Chi2Shape, Errors) {
  EXPECT_THROW(chi2_shape_pvalue({0, 0}, {1, 2}), std::domain_error);
  EXPECT_THROW(chi2_shape_pvalue({1, 2}, {0, 0}), std::domain_error);
  EXPECT_THROW(chi2_shape_pvalue({1, -1}, {1, 1}), std::domain_error);
  EXPECT_THROW(chi2_shape_pvalue({1, 2}, {1, 2, 3}), std::invalid_argument);
}

TEST(SelectTweet, Singleton) {
  const auto c = tt::make_corpus(3, 1, 1, {{"only", 0, 0, {2}}});
  EXPECT_EQ(select_tweet(singleton(input(1, {5, 5, 1}, {0})), c), 0);
  EXPECT_THROW(select_tweet(TopicCluster{{1}, {1, 1, 1}, {}}, c), std::domain_error);
}

TEST(SelectTweet, TieGoesToSmallerDocId) {
  const auto c = tt::make_corpus(3, 1, 1, {{"b", 0, 0, {0, 1}}, {"a", 0, 0, {1, 0}}});
  EXPECT_EQ(c.doc(select_tweet(singleton(input(1, {1, 1, 0}, {0, 1})), c)).doc_id, "a");
}

TEST(SelectTweet, HandRanked) {
  // center (1/2, 1/3, 1/6): A = w0 w0 scores log 1/2, B = w0 w1 scores
  // (log 1/2 + log 1/3)/2, C = w2 scores log 1/6.
  const auto c = tt::make_corpus(3, 1, 1, {{"c", 0, 0, {2}}, {"b", 0, 0, {0, 1}}, {"a", 0, 0, {0, 0}}});
  const auto cl = singleton(input(1, {3, 2, 1}, {0, 1, 2}));
  EXPECT_EQ(c.doc(select_tweet(cl, c)).doc_id, "a");
  // without A the winner is B
  EXPECT_EQ(c.doc(select_tweet(singleton(input(1, {3, 2, 1}, {0, 1})), c)).doc_id, "b");
  EXPECT_NEAR(mean_token_loglik(c.doc(1), {0.5, 1.0 / 3, 1.0 / 6}), 0.5 * (std::log(0.5) + std::log(1.0 / 3)), 1e-15);
}

TEST(SelectTweet, InvariantUnderScaledCounts) {
  Rng rng(51);
  for (int rep = 0; rep < 30; ++rep) {
    const auto fx = tt::random_cluster_fixture(rng, 3);
    TopicCluster c = singleton(inputs(fx.topics)[0]);
    c = merge(c, singleton(inputs(fx.topics)[1]));
    const int before = select_tweet(c, fx.corpus);
    for (double& v : c.counts) v *= 4.0;
    EXPECT_EQ(select_tweet(c, fx.corpus), before);
  }
}

// ---------------------------------------------------------------------------
// Celebrity rules

namespace {

// Users u0 ("alice") and u1 over 4 epochs.
//   topic 1: u0's PersonTS docs, one per epoch, words a b alice
//   topic 2: PublicTS docs of both users, one each per epoch, same words
struct Celebrity {
  Corpus corpus;
  PosteriorSummary summary;
  NameTable names{{"u0", {"Alice"}}};

  explicit Celebrity(bool bursty_public = false) {
    const std::vector<std::string> words{"a", "b", "c", "d", "alice"};
    std::vector<DocSpec> specs;
    std::vector<LabelPair> labels;
    std::vector<std::int64_t> topics;
    for (int t = 0; t < 4; ++t) {
      specs.push_back({"p" + std::to_string(t), 0, t, {0, 1, 4}});
      labels.push_back({1, 1});
      topics.push_back(1);
      for (int u = 0; u < 2; ++u) {
        specs.push_back({"c" + std::to_string(u) + std::to_string(t), u, bursty_public ? 0 : t, {0, 1, 4}});
        labels.push_back({0, 1});
        topics.push_back(2);
      }
      specs.push_back({"g" + std::to_string(t), 1, t, {2, 3, 2}});
      labels.push_back({0, 0});
      topics.push_back(3);
    }
    corpus = tt::make_corpus(words, 2, 4, specs);
    summary = tt::summary_for(corpus, labels, topics);
  }
};

}  // namespace

TEST(Celebrity, AllRulesPassAccepted) {
  Celebrity f;
  TimelineOptions o;
  o.mode = Mode::celebrity;
  std::vector<CelebrityVerdict> v;
  const auto tl = build_timeline("u0", f.summary, f.corpus, o, f.names, &v);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_DOUBLE_EQ(v[0].mention_fraction, 1.0);
  EXPECT_TRUE(v[0].rule1);
  EXPECT_TRUE(v[0].rule2) << v[0].shape_p;
  EXPECT_TRUE(v[0].rule3) << v[0].balance_with << " vs " << v[0].balance_without;
  ASSERT_EQ(tl.entries.size(), 2u);
  EXPECT_EQ(std::count_if(tl.entries.begin(), tl.entries.end(), [](const Entry& e) { return e.celebrity; }), 1);
}

TEST(Celebrity, NoMentionsRejected) {
  Celebrity f;
  TimelineOptions o;
  o.mode = Mode::celebrity;
  std::vector<CelebrityVerdict> v;
  const auto tl = build_timeline("u0", f.summary, f.corpus, o, {{"u0", {"bob"}}}, &v);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_FALSE(v[0].rule1);
  EXPECT_FALSE(v[0].accepted());
  EXPECT_EQ(tl.entries.size(), 1u);
}

TEST(Celebrity, MisalignedBurstRejected) {
  Celebrity f(true);
  TimelineOptions o;
  o.mode = Mode::celebrity;
  std::vector<CelebrityVerdict> v;
  build_timeline("u0", f.summary, f.corpus, o, f.names, &v);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(v[0].rule1);
  EXPECT_FALSE(v[0].rule2) << v[0].shape_p;
  EXPECT_FALSE(v[0].accepted());
}

TEST(Celebrity, ExactlyTenPercentPassesRuleOne) {
  std::vector<DocSpec> specs;
  for (int j = 0; j < 10; ++j) specs.push_back({"d" + std::to_string(j), 0, 0, {j == 0 ? 1 : 0}});
  const auto c = tt::make_corpus(std::vector<std::string>{"x", "ALICE"}, 1, 1, specs);
  TopicCluster cl{{1}, {9, 1}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  EXPECT_DOUBLE_EQ(mention_fraction(cl, c, {"alice"}), 0.1);
  TopicCluster personal{{2}, {9, 1}, {0}};
  TimelineOptions o;
  const auto v = judge_candidate(0, {cl}, personal, c.user_docs(0), {"alice"}, c, o);
  EXPECT_TRUE(v.rule1);
  cl.docs.push_back(10);  // 1 in 11 falls below
  const auto c2 = tt::make_corpus(std::vector<std::string>{"x", "ALICE"}, 1, 1,
                                       [&] { auto s = specs; s.push_back({"d10", 0, 0, {0}}); return s; }());
  EXPECT_LT(mention_fraction(cl, c2, {"alice"}), 0.1);
}

TEST(Celebrity, NoPersonalClustersFailsRuleThree) {
  Celebrity f;
  // relabel the personal docs as PersonTG
  for (int d = 0; d < f.corpus.num_docs(); ++d) {
    if (f.summary.topics[static_cast<std::size_t>(d)] == 1) f.summary.labels[static_cast<std::size_t>(d)] = {1, 0};
  }
  TimelineOptions o;
  o.mode = Mode::celebrity;
  std::vector<CelebrityVerdict> v;
  const auto tl = build_timeline("u0", f.summary, f.corpus, o, f.names, &v);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(v[0].rule1);
  EXPECT_FALSE(v[0].rule3);
  EXPECT_TRUE(tl.entries.empty());
}

TEST(Names, Parse) {
  std::istringstream in("# names\nu0\tAlice\nu0\t@alice\r\nu1\tBob\n");
  const auto n = read_names(in);
  EXPECT_EQ(n.at("u0"), (std::vector<std::string>{"Alice", "@alice"}));
  EXPECT_EQ(n.at("u1").size(), 1u);
  std::istringstream bad("u0 Alice\n");
  EXPECT_THROW(read_names(bad), data_error);
}

// ---------------------------------------------------------------------------
// Timelines

TEST(BuildTimeline, NoPersonTsIsEmpty) {
  const auto c = tt::make_corpus(3, 1, 2, {{"a", 0, 0, {0}}, {"b", 0, 1, {1}}});
  const auto s = tt::summary_for(c, {{1, 0}, {0, 1}}, {1, 2});
  EXPECT_TRUE(build_timeline("u0", s, c).entries.empty());
  EXPECT_THROW(build_timeline("nobody", s, c), std::out_of_range);
}

TEST(BuildTimeline, OrdinaryExcludesPublic) {
  Celebrity f;
  const auto tl = build_timeline("u0", f.summary, f.corpus, {}, f.names);
  ASSERT_EQ(tl.entries.size(), 1u);
  EXPECT_FALSE(tl.entries[0].celebrity);
  EXPECT_EQ(tl.entries[0].topics, (std::vector<std::int64_t>{1}));
  EXPECT_EQ(tl.entries[0].doc_ids.size(), 4u);
}

TEST(BuildTimeline, ThreePlantedEvents) {
  // u0 has three bursts on disjoint vocabulary blocks in epochs 1, 3, 5 and
  // background chatter everywhere.
  std::vector<DocSpec> specs;
  std::vector<LabelPair> labels;
  std::vector<std::int64_t> topics;
  const int epochs[3] = {5, 1, 3};
  for (int e = 0; e < 3; ++e) {
    for (int j = 0; j < 4; ++j) {
      const int base = 3 * e;
      specs.push_back({"e" + std::to_string(e) + std::to_string(j), 0, epochs[e], {base, base + 1, base + (j % 3), base + 2}});
      labels.push_back({1, 1});
      topics.push_back(7 + e);
    }
  }
  for (int t = 0; t < 6; ++t) {
    specs.push_back({"z" + std::to_string(t), 0, t, {9, 10, 11}});
    labels.push_back({1, 0});
    topics.push_back(20);
  }
  const auto c = tt::make_corpus(12, 1, 6, specs);
  const auto s = tt::summary_for(c, labels, topics);
  const auto tl = build_timeline("u0", s, c);
  ASSERT_EQ(tl.entries.size(), 3u);
  EXPECT_EQ(tl.entries[0].epoch, 1);
  EXPECT_EQ(tl.entries[1].epoch, 3);
  EXPECT_EQ(tl.entries[2].epoch, 5);
  EXPECT_EQ(tl.entries[0].topics, (std::vector<std::int64_t>{8}));
  EXPECT_EQ(tl.entries[0].doc_ids, (std::vector<std::string>{"e10", "e11", "e12", "e13"}));
  for (const auto& e : tl.entries) EXPECT_EQ(e.doc_ids.size(), 4u);
  const auto text = timeline_to_text(tl, c);
  EXPECT_EQ(text.substr(0, text.find('\n')), "# timeline u0 mode=ordinary");
  const auto j = timeline_to_json(tl, c);
  EXPECT_EQ(j["format"], "pietl-timeline/1");
  EXPECT_EQ(j["entries"].size(), 3u);
  EXPECT_EQ(predicted_docs(tl).size(), 12u);
}

TEST(BuildTimeline, EntriesSorted) {
  Rng rng(61);
  for (int rep = 0; rep < 20; ++rep) {
    const auto c = tt::random_corpus(rng, 10, 2, 5, 4, 6);
    std::vector<LabelPair> labels;
    std::vector<std::int64_t> topics;
    for (int d = 0; d < c.num_docs(); ++d) {
      labels.push_back({static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))});
      topics.push_back(static_cast<std::int64_t>(rng.below(6)));
    }
    const auto s = tt::summary_for(c, labels, topics);
    for (const auto& u : c.users()) {
      const auto tl = build_timeline(u, s, c);
      for (std::size_t k = 1; k < tl.entries.size(); ++k) {
        const auto& a = tl.entries[k - 1];
        const auto& b = tl.entries[k];
        EXPECT_TRUE(a.epoch < b.epoch || (a.epoch == b.epoch && a.cluster_id < b.cluster_id));
      }
      // every PersonTS doc of the user appears exactly once
      std::size_t n = 0;
      for (const auto& e : tl.entries) n += e.doc_ids.size();
      std::size_t expected = 0;
      for (int d : c.user_docs(*c.find_user(u))) expected += s.is_person_ts(d) ? 1 : 0;
      EXPECT_EQ(n, expected);
    }
  }
}

TEST(BuildTimeline, SummaryMismatch) {
  const auto c = tt::make_corpus(3, 1, 1, {{"a", 0, 0, {0}}});
  auto s = tt::summary_for(c, {{1, 1}}, {1});
  s.doc_ids[0] = "zz";
  EXPECT_THROW(build_timeline("u0", s, c), data_error);
}
