#include <gtest/gtest.h>

#include <sstream>

#include "pietl/config.hpp"

using namespace pietl;
using namespace pietl::config;

namespace {

KeyValues parse_text(const std::string& s) {
  std::istringstream in(s);
  return parse(in);
}

}  // namespace

TEST(Config, ParsesKeyValues) {
  const auto kv = parse_text("# comment\nalpha = 2.5\n\n  burn_in=10   # trailing\nresample_concentrations = false\n");
  ASSERT_EQ(kv.size(), 3u);
  FitConfig c;
  config::apply(kv, c);
  EXPECT_EQ(c.hyper.alpha, 2.5);
  EXPECT_EQ(c.schedule.burn_in, 10);
  EXPECT_EQ(c.lda.schedule.burn_in, 10);
  EXPECT_FALSE(c.hyper.resample_concentrations);
}

TEST(Config, Defaults) {
  const FitConfig c;
  EXPECT_EQ(c.schedule.burn_in, 200);
  EXPECT_EQ(c.hyper.eta_x, 20.0);
  EXPECT_EQ(c.hyper.eta_y, 20.0);
  EXPECT_EQ(c.hyper.lambda, 0.1);
  EXPECT_EQ(c.epoch_days, 7);
  EXPECT_FALSE(c.origin.has_value());
}

TEST(Config, SharedKeysReachBothModels) {
  FitConfig c;
  config::apply({{"eta_x", "0.5"}, {"lambda", "0.2"}, {"samples", "7"}}, c);
  EXPECT_EQ(c.hyper.eta_x, 0.5);
  EXPECT_EQ(c.lda.eta_x, 0.5);
  EXPECT_EQ(c.hyper.lambda, 0.2);
  EXPECT_EQ(c.lda.word_prior, 0.2);
  EXPECT_EQ(c.lda.schedule.samples, 7);
}

TEST(Config, Errors) {
  FitConfig c;
  EXPECT_THROW(config::apply({{"nope", "1"}}, c), data_error);
  EXPECT_THROW(config::apply({{"alpha", "abc"}}, c), data_error);
  EXPECT_THROW(config::apply({{"burn_in", "1.5"}}, c), data_error);
  EXPECT_THROW(config::apply({{"resample_concentrations", "maybe"}}, c), data_error);
  EXPECT_THROW(parse_text("alpha\n"), data_error);
  EXPECT_THROW(parse_text("alpha =\n"), data_error);
  config::apply({{"alpha", "-1"}}, c);
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = FitConfig{};
  c.epoch_days = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  EXPECT_THROW(read("/nonexistent/pietl.conf"), io_error);
}

TEST(Config, JsonAndTextRoundTrip) {
  FitConfig c;
  c.hyper.alpha = 0.1 + 0.2;  // not exactly representable in short decimal
  c.hyper.kappa = 1e-3;
  c.schedule.thin = 3;
  c.lda.cell_topics = 4;
  c.min_count = 2;
  c.origin = 1262304000;
  FitConfig a;
  config::apply(from_json(to_json(c)), a);
  EXPECT_EQ(to_json(a), to_json(c));
  EXPECT_EQ(a.hyper.alpha, c.hyper.alpha);
  FitConfig b;
  config::apply(parse_text(to_text(c)), b);
  EXPECT_EQ(to_json(b), to_json(c));
  EXPECT_EQ(*b.origin, 1262304000);
}

TEST(Config, IngestSettings) {
  FitConfig c;
  c.epoch_days = 3;
  c.min_count = 4;
  c.origin = 100;
  const auto ic = ingest_config(c);
  EXPECT_EQ(ic.epoch_length, 3 * kSecondsPerDay);
  EXPECT_EQ(ic.min_count, 4);
  EXPECT_EQ(*ic.origin, 100);
}
